use serde::{Deserialize, Serialize};

use crate::error::{NbmfError, Result};
use crate::qubo::QuboInstance;

/// Sweep budget and temperature profile for the simulated annealers.
///
/// Reverse annealing maps the reversal distance onto a peak temperature
/// `reversal_distance * temp_max`: the read warms up from zero temperature
/// at the initial state, holds at the peak for `pause_fraction` of the
/// sweeps, then cools to `temp_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub sweeps_total: usize,
    pub reversal_distance: f64,
    pub pause_fraction: f64,
    /// `None` picks the largest absolute row sum of `Q`.
    pub temp_max: Option<f64>,
    /// `None` picks `1e-3 * temp_max`.
    pub temp_min: Option<f64>,
    pub reads: usize,
}

pub const DEFAULT_SWEEPS: usize = 100;
pub const DEFAULT_FA_READS: usize = 1000;
pub const DEFAULT_RA_READS: usize = 240;
pub const DEFAULT_REVERSAL_DISTANCE: f64 = 0.45;
pub const DEFAULT_PAUSE_FRACTION: f64 = 1.0 / 3.0;
const TEMP_MIN_RATIO: f64 = 1e-3;

impl AnnealSchedule {
    pub fn forward_default() -> Self {
        Self {
            sweeps_total: DEFAULT_SWEEPS,
            reversal_distance: 1.0,
            pause_fraction: 0.0,
            temp_max: None,
            temp_min: None,
            reads: DEFAULT_FA_READS,
        }
    }

    pub fn reverse_default() -> Self {
        Self {
            sweeps_total: DEFAULT_SWEEPS,
            reversal_distance: DEFAULT_REVERSAL_DISTANCE,
            pause_fraction: DEFAULT_PAUSE_FRACTION,
            temp_max: None,
            temp_min: None,
            reads: DEFAULT_RA_READS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps_total == 0 {
            return Err(NbmfError::Parameter("sweeps_total must be positive".into()));
        }
        if self.reads == 0 {
            return Err(NbmfError::Parameter("reads must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.reversal_distance) {
            return Err(NbmfError::Parameter(format!(
                "reversal_distance must lie in [0,1], got {}",
                self.reversal_distance
            )));
        }
        if !(0.0..1.0).contains(&self.pause_fraction) {
            return Err(NbmfError::Parameter(format!(
                "pause_fraction must lie in [0,1), got {}",
                self.pause_fraction
            )));
        }
        for (name, t) in [("temp_max", self.temp_max), ("temp_min", self.temp_min)] {
            if let Some(t) = t {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(NbmfError::Parameter(format!("{name} must be positive, got {t}")));
                }
            }
        }
        if let (Some(hi), Some(lo)) = (self.temp_max, self.temp_min) {
            if lo >= hi {
                return Err(NbmfError::Parameter(format!(
                    "temp_min ({lo}) must be below temp_max ({hi})"
                )));
            }
        }
        Ok(())
    }

    /// Concrete `(temp_max, temp_min)` for an instance.
    pub fn temperatures(&self, q: &QuboInstance) -> Result<(f64, f64)> {
        let hi = match self.temp_max {
            Some(t) => t,
            None => {
                let s = q.max_abs_row_sum();
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            }
        };
        let lo = self.temp_min.unwrap_or(TEMP_MIN_RATIO * hi);
        if !(lo < hi) {
            return Err(NbmfError::Parameter(format!(
                "temp_min ({lo}) must be below temp_max ({hi})"
            )));
        }
        Ok((hi, lo))
    }

    /// One temperature per sweep, geometric from `hi` down to `lo`.
    pub fn forward_profile(&self, hi: f64, lo: f64) -> Vec<f64> {
        geometric(hi, lo, self.sweeps_total)
    }

    /// One temperature per sweep: linear warm-up from zero, pause, geometric cool-down.
    /// A zero entry means the sweep is skipped (no fluctuation).
    pub fn reverse_profile(&self, hi: f64, lo: f64) -> Vec<f64> {
        let total = self.sweeps_total;
        let peak = self.reversal_distance * hi;
        if peak <= 0.0 {
            return vec![0.0; total];
        }
        let pause = ((self.pause_fraction * total as f64).round() as usize).min(total);
        let up = (total - pause) / 2;
        let down = total - pause - up;
        let mut temps = Vec::with_capacity(total);
        temps.extend((1..=up).map(|s| peak * s as f64 / up as f64));
        temps.extend(std::iter::repeat_n(peak, pause));
        let end = lo.min(peak);
        temps.extend((1..=down).map(|s| peak * (end / peak).powf(s as f64 / down as f64)));
        temps
    }
}

fn geometric(hi: f64, lo: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let ratio = lo / hi;
            (0..steps)
                .map(|s| hi * ratio.powf(s as f64 / (steps - 1) as f64))
                .collect()
        }
    }
}

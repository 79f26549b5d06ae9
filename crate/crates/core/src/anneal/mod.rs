//! Solvers for the binary column subproblem `min_h ||v - Wh||²`.
//!
//! | kind     | pipeline                                              | uses previous column |
//! |----------|-------------------------------------------------------|----------------------|
//! | `Exact`  | enumeration / branch-and-bound                        | no                   |
//! | `PGD`    | box relaxation by PGD, round at 0.5                   | warm start           |
//! | `FA`     | forward annealing                                     | no                   |
//! | `RA`     | reverse annealing from the previous column            | initial state        |
//! | `RA+FA`  | forward annealing, then reverse from its best state   | no                   |
//! | `RA+PGD` | relaxation + rounding, then reverse from the rounding | warm start           |

mod exact;
mod metropolis;
mod schedule;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use exact::{
    solve_branch_and_bound, solve_exact_outcome, solve_exhaustive, ExactConfig, ExactOutcome,
    EXHAUSTIVE_HARD_CAP,
};
pub use metropolis::{forward_reads, reverse_reads, ReadOutcome};
pub use schedule::{
    AnnealSchedule, DEFAULT_FA_READS, DEFAULT_PAUSE_FRACTION, DEFAULT_RA_READS,
    DEFAULT_REVERSAL_DISTANCE, DEFAULT_SWEEPS,
};

use crate::error::{NbmfError, Result};
use crate::model::{BinaryVector, NonnegMatrix, RngSpec};
use crate::pgd::{pgd_minimize, LeastSquaresProblem, PgdConfig};
use crate::qubo::{build_qubo, QuboInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolverKind {
    Exact,
    PgdRound,
    Fa,
    Ra,
    RaFa,
    RaPgd,
}

impl SolverKind {
    pub const ALL: [SolverKind; 6] = [
        SolverKind::Exact,
        SolverKind::PgdRound,
        SolverKind::Fa,
        SolverKind::Ra,
        SolverKind::RaFa,
        SolverKind::RaPgd,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            SolverKind::Exact => "Exact",
            SolverKind::PgdRound => "PGD",
            SolverKind::Fa => "FA",
            SolverKind::Ra => "RA",
            SolverKind::RaFa => "RA+FA",
            SolverKind::RaPgd => "RA+PGD",
        }
    }

    /// Whether the pipeline consumes the previous iteration's column.
    pub fn uses_previous(&self) -> bool {
        matches!(self, SolverKind::PgdRound | SolverKind::Ra | SolverKind::RaPgd)
    }

    /// Whether the previous column is mandatory.
    pub fn requires_previous(&self) -> bool {
        matches!(self, SolverKind::Ra | SolverKind::RaPgd)
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, SolverKind::Fa | SolverKind::Ra | SolverKind::RaFa | SolverKind::RaPgd)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SolverKind {
    type Err = NbmfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(SolverKind::Exact),
            "pgd" | "pgdround" | "pgd-round" => Ok(SolverKind::PgdRound),
            "fa" => Ok(SolverKind::Fa),
            "ra" => Ok(SolverKind::Ra),
            "ra+fa" | "rafa" | "ra-fa" => Ok(SolverKind::RaFa),
            "ra+pgd" | "rapgd" | "ra-pgd" => Ok(SolverKind::RaPgd),
            other => Err(NbmfError::Config(format!("unknown solver kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub best_state: BinaryVector,
    pub best_energy: f64,
    pub best_objective: f64,
    pub samples_evaluated: u64,
    pub wall_time: f64,
    pub seed: Option<RngSpec>,
    pub solver: SolverKind,
    /// Exact solver only: whether optimality was proven.
    pub optimal: Option<bool>,
    /// Exact enumeration only: whether the optimum is shared by several assignments.
    pub degenerate: Option<bool>,
    /// Relaxed solution for the PGD-based kinds.
    pub relaxed: Option<Vec<f64>>,
}

impl SolveReport {
    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &SolveReport) -> bool {
        let mut a = self.clone();
        a.wall_time = other.wall_time;
        &a == other
    }
}

/// Pluggable sampler boundary for external QUBO backends.
pub trait QuboSampler: Send + Sync {
    fn sample(
        &self,
        q: &QuboInstance,
        initial: Option<&BinaryVector>,
        rng: RngSpec,
    ) -> Result<SolveReport>;
}

/// Built-in simulated forward annealer.
#[derive(Debug, Clone, Copy)]
pub struct ForwardAnnealer(pub AnnealSchedule);

/// Built-in simulated reverse annealer.
#[derive(Debug, Clone, Copy)]
pub struct ReverseAnnealer(pub AnnealSchedule);

impl QuboSampler for ForwardAnnealer {
    fn sample(&self, q: &QuboInstance, _initial: Option<&BinaryVector>, rng: RngSpec) -> Result<SolveReport> {
        solve_fa(q, &self.0, rng)
    }
}

impl QuboSampler for ReverseAnnealer {
    fn sample(&self, q: &QuboInstance, initial: Option<&BinaryVector>, rng: RngSpec) -> Result<SolveReport> {
        let initial = initial.ok_or_else(|| {
            NbmfError::Config("reverse annealing needs an initial state".into())
        })?;
        solve_ra(q, initial, &self.0, rng)
    }
}

fn report(
    q: &QuboInstance,
    state: Vec<u8>,
    energy: f64,
    samples: u64,
    started: Instant,
    seed: Option<RngSpec>,
    solver: SolverKind,
) -> SolveReport {
    SolveReport {
        best_state: BinaryVector::new(state).expect("solver states are binary"),
        best_energy: energy,
        best_objective: energy + q.offset(),
        samples_evaluated: samples,
        wall_time: started.elapsed().as_secs_f64(),
        seed,
        solver,
        optimal: None,
        degenerate: None,
        relaxed: None,
    }
}

pub fn solve_exact(q: &QuboInstance, config: &ExactConfig) -> Result<SolveReport> {
    let started = Instant::now();
    let out = solve_exact_outcome(q, config)?;
    let mut r = report(q, out.state, out.energy, out.evaluated, started, None, SolverKind::Exact);
    r.optimal = Some(out.optimal);
    r.degenerate = out.degenerate;
    Ok(r)
}

/// Convenience form with only a time limit; other settings at their defaults.
pub fn solve_exact_with_limit(q: &QuboInstance, time_limit: Duration) -> Result<SolveReport> {
    solve_exact(
        q,
        &ExactConfig {
            time_limit: time_limit.as_secs_f64(),
            ..ExactConfig::default()
        },
    )
}

/// Rounds a relaxed solution: `h_i = 1` iff `relaxed_i >= 0.5`.
pub fn round_relaxed(relaxed: &[f64]) -> BinaryVector {
    BinaryVector::from_bools(relaxed.iter().map(|&x| x >= 0.5))
}

/// Solves the `[0,1]` box relaxation by PGD and rounds it.
/// `start` defaults to all zeros.
pub fn solve_pgd_round(
    w: &NonnegMatrix,
    v: &[f64],
    start: Option<&[f64]>,
    config: &PgdConfig,
) -> Result<(SolveReport, Vec<f64>)> {
    let started = Instant::now();
    let q = build_qubo(w, v)?;
    let problem = LeastSquaresProblem::relaxed_column(w.as_matrix(), v)?;
    let k = w.cols();
    let zeros = vec![0.0; k];
    let start = start.unwrap_or(&zeros);
    let out = pgd_minimize(
        &problem,
        start,
        &problem.lower_bounds(),
        &problem.upper_bounds(),
        config,
    )?;
    let rounded = round_relaxed(&out.point);
    let energy = q.energy_bits(rounded.bits());
    let mut r = report(
        &q,
        rounded.bits().to_vec(),
        energy,
        out.iterations as u64,
        started,
        None,
        SolverKind::PgdRound,
    );
    r.relaxed = Some(out.point.clone());
    Ok((r, out.point))
}

pub fn solve_fa(q: &QuboInstance, schedule: &AnnealSchedule, rng: RngSpec) -> Result<SolveReport> {
    let started = Instant::now();
    let out = metropolis::forward(q, schedule, rng)?;
    Ok(report(
        q,
        out.state,
        out.energy,
        schedule.reads as u64,
        started,
        Some(rng),
        SolverKind::Fa,
    ))
}

pub fn solve_ra(
    q: &QuboInstance,
    initial: &BinaryVector,
    schedule: &AnnealSchedule,
    rng: RngSpec,
) -> Result<SolveReport> {
    let started = Instant::now();
    let out = metropolis::reverse(q, initial, schedule, rng)?;
    Ok(report(
        q,
        out.state,
        out.energy,
        schedule.reads as u64,
        started,
        Some(rng),
        SolverKind::Ra,
    ))
}

/// Per-kind settings for [`solve_column`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub exact: ExactConfig,
    pub pgd: PgdConfig,
    pub fa: AnnealSchedule,
    pub ra: AnnealSchedule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            exact: ExactConfig::default(),
            pgd: PgdConfig::default(),
            fa: AnnealSchedule::forward_default(),
            ra: AnnealSchedule::reverse_default(),
        }
    }
}

/// Solves one column with the pipeline selected by `kind`.
pub fn solve_column(
    kind: SolverKind,
    w: &NonnegMatrix,
    v: &[f64],
    previous_h: Option<&BinaryVector>,
    config: &SolverConfig,
    rng: RngSpec,
) -> Result<SolveReport> {
    solve_column_with(
        kind,
        w,
        v,
        previous_h,
        config,
        rng,
        &ForwardAnnealer(config.fa),
        &ReverseAnnealer(config.ra),
    )
}

/// [`solve_column`] with caller-supplied annealing backends.
#[allow(clippy::too_many_arguments)]
pub fn solve_column_with(
    kind: SolverKind,
    w: &NonnegMatrix,
    v: &[f64],
    previous_h: Option<&BinaryVector>,
    config: &SolverConfig,
    rng: RngSpec,
    forward: &dyn QuboSampler,
    reverse: &dyn QuboSampler,
) -> Result<SolveReport> {
    let started = Instant::now();
    if let Some(p) = previous_h {
        if p.len() != w.cols() {
            return Err(NbmfError::dims(
                "solve_column",
                format!("W has {} columns, previous column has length {}", w.cols(), p.len()),
            ));
        }
    }
    if kind.requires_previous() && previous_h.is_none() {
        return Err(NbmfError::Config(format!(
            "solver {kind} requires the previous coefficient column"
        )));
    }
    let previous_f64 = previous_h.map(BinaryVector::to_f64);

    let mut out = match kind {
        SolverKind::Exact => solve_exact(&build_qubo(w, v)?, &config.exact)?,
        SolverKind::PgdRound => solve_pgd_round(w, v, previous_f64.as_deref(), &config.pgd)?.0,
        SolverKind::Fa => forward.sample(&build_qubo(w, v)?, None, rng)?,
        SolverKind::Ra => reverse.sample(&build_qubo(w, v)?, previous_h, rng)?,
        SolverKind::RaFa => {
            let q = build_qubo(w, v)?;
            let fa = forward.sample(&q, None, rng.child(1))?;
            let mut ra = reverse.sample(&q, Some(&fa.best_state), rng.child(2))?;
            ra.samples_evaluated += fa.samples_evaluated;
            ra
        }
        SolverKind::RaPgd => {
            let q = build_qubo(w, v)?;
            let (pgd, relaxed) = solve_pgd_round(w, v, previous_f64.as_deref(), &config.pgd)?;
            let mut ra = reverse.sample(&q, Some(&pgd.best_state), rng)?;
            ra.samples_evaluated += pgd.samples_evaluated;
            ra.relaxed = Some(relaxed);
            ra
        }
    };
    out.solver = kind;
    if kind.is_stochastic() {
        out.seed = Some(rng);
    }
    out.wall_time = started.elapsed().as_secs_f64();
    Ok(out)
}

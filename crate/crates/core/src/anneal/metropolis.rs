//! Single-flip Metropolis annealing: forward (random start, cooling) and
//! reverse (start from a given state, warm up to a peak, pause, re-cool).

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{NbmfError, Result};
use crate::model::{BinaryVector, RngSpec};
use crate::qubo::QuboInstance;

use super::schedule::AnnealSchedule;

/// Outcome of one reverse-annealing read.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadOutcome {
    pub final_state: Vec<u8>,
    pub final_energy: f64,
    pub best_state: Vec<u8>,
    pub best_energy: f64,
}

struct Chain<'a> {
    q: &'a QuboInstance,
    x: Vec<u8>,
    /// field[i] = Σ_{j≠i} Q_ij x_j
    field: Vec<f64>,
    energy: f64,
    best: Vec<u8>,
    best_energy: f64,
    order: Vec<usize>,
}

impl<'a> Chain<'a> {
    fn new(q: &'a QuboInstance, x: Vec<u8>) -> Self {
        let n = q.size();
        let m = q.matrix();
        let field = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && x[j] == 1)
                    .map(|j| m.get(i, j))
                    .sum()
            })
            .collect();
        let energy = q.energy_bits(&x);
        Self {
            q,
            best: x.clone(),
            best_energy: energy,
            x,
            field,
            energy,
            order: (0..n).collect(),
        }
    }

    fn flip(&mut self, i: usize, delta: f64) {
        let sign = if self.x[i] == 0 { 1.0 } else { -1.0 };
        self.x[i] ^= 1;
        self.energy += delta;
        let row = self.q.matrix().row(i);
        for (j, f) in self.field.iter_mut().enumerate() {
            if j != i {
                *f += sign * row[j];
            }
        }
        if self.energy < self.best_energy {
            self.best_energy = self.energy;
            self.best.copy_from_slice(&self.x);
        }
    }

    /// Energies recomputed from scratch so they carry no accumulated drift.
    fn finish(self) -> ReadOutcome {
        ReadOutcome {
            final_energy: self.q.energy_bits(&self.x),
            best_energy: self.q.energy_bits(&self.best),
            final_state: self.x,
            best_state: self.best,
        }
    }

    fn sweep(&mut self, temperature: f64, rng: &mut ChaCha8Rng) {
        if temperature <= 0.0 {
            return;
        }
        self.order.shuffle(rng);
        let m = self.q.matrix();
        for idx in 0..self.order.len() {
            let i = self.order[idx];
            let sign = if self.x[i] == 0 { 1.0 } else { -1.0 };
            let delta = sign * (m.get(i, i) + 2.0 * self.field[i]);
            if delta <= 0.0 || rng.random::<f64>() < (-delta / temperature).exp() {
                self.flip(i, delta);
            }
        }
    }
}

pub(crate) struct AnnealResult {
    pub state: Vec<u8>,
    pub energy: f64,
}

/// Every forward-annealing read, each from a uniform random start.
pub fn forward_reads(q: &QuboInstance, schedule: &AnnealSchedule, rng: RngSpec) -> Result<Vec<ReadOutcome>> {
    schedule.validate()?;
    let (hi, lo) = schedule.temperatures(q)?;
    let temps = schedule.forward_profile(hi, lo);
    let n = q.size();
    let mut rng = rng.rng();
    let mut reads = Vec::with_capacity(schedule.reads);
    for _ in 0..schedule.reads {
        let start: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
        let mut chain = Chain::new(q, start);
        for &t in &temps {
            chain.sweep(t, &mut rng);
        }
        reads.push(chain.finish());
    }
    Ok(reads)
}

/// Best state over all forward reads.
pub(crate) fn forward(q: &QuboInstance, schedule: &AnnealSchedule, rng: RngSpec) -> Result<AnnealResult> {
    let mut best: Option<AnnealResult> = None;
    for r in forward_reads(q, schedule, rng)? {
        if best.as_ref().is_none_or(|b| r.best_energy < b.energy) {
            best = Some(AnnealResult {
                state: r.best_state,
                energy: r.best_energy,
            });
        }
    }
    Ok(best.expect("reads >= 1"))
}

/// Every reverse-annealing read, each starting from `initial`.
pub fn reverse_reads(
    q: &QuboInstance,
    initial: &BinaryVector,
    schedule: &AnnealSchedule,
    rng: RngSpec,
) -> Result<Vec<ReadOutcome>> {
    schedule.validate()?;
    if initial.len() != q.size() {
        return Err(NbmfError::dims(
            "reverse annealing",
            format!("instance has {} variables, initial state has {}", q.size(), initial.len()),
        ));
    }
    let (hi, lo) = schedule.temperatures(q)?;
    let temps = schedule.reverse_profile(hi, lo);
    let mut rng = rng.rng();
    let mut reads = Vec::with_capacity(schedule.reads);
    for _ in 0..schedule.reads {
        let mut chain = Chain::new(q, initial.bits().to_vec());
        for &t in &temps {
            chain.sweep(t, &mut rng);
        }
        reads.push(chain.finish());
    }
    Ok(reads)
}

/// Best state over all reverse reads, never worse than `initial`.
pub(crate) fn reverse(
    q: &QuboInstance,
    initial: &BinaryVector,
    schedule: &AnnealSchedule,
    rng: RngSpec,
) -> Result<AnnealResult> {
    let reads = reverse_reads(q, initial, schedule, rng)?;
    let mut state = initial.bits().to_vec();
    let mut energy = q.energy_bits(&state);
    for r in reads {
        if r.best_energy < energy {
            energy = r.best_energy;
            state = r.best_state;
        }
    }
    Ok(AnnealResult { state, energy })
}

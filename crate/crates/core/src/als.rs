//! Alternating least squares for NMF and NBMF.
//!
//! Each iteration runs the W-step (joint PGD over `W >= 0`) and then the
//! H-step: PGD over `H >= 0` for NMF, or `n` independent binary column
//! subproblems for NBMF. Column subproblems are dispatched on the rayon pool;
//! column `j` of iteration `t` always draws from stream `j` of a master seed
//! derived from `t`, so the result does not depend on the thread count.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anneal::{
    solve_column, AnnealSchedule, ExactConfig, SolveReport, SolverConfig, SolverKind,
};
use crate::error::{NbmfError, Result};
use crate::model::{column, frobenius_error, BinaryMatrix, Matrix, NonnegMatrix, RngSpec};
use crate::pgd::{pgd_solve, LeastSquaresProblem, PgdConfig};

const W_INIT_TAG: u64 = 0x57;
const H_INIT_TAG: u64 = 0x48;
const DEAD_FEATURE_TAG: u64 = 0xdead;
const COLUMN_TAG: u64 = 0xc01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlsConfig {
    pub rank: usize,
    pub max_iterations: usize,
    /// Stop when `|e_{t-1} - e_t| / e_{t-1}` drops below this; `0` runs all iterations.
    pub rel_tol: f64,
    pub solver: SolverKind,
    pub seed: u64,
    pub w_pgd: PgdConfig,
    /// PGD settings for the NMF H-step and for the `[0,1]` relaxation.
    pub h_pgd: PgdConfig,
    pub exact: ExactConfig,
    pub fa: AnnealSchedule,
    pub ra: AnnealSchedule,
}

impl AlsConfig {
    pub fn new(rank: usize, solver: SolverKind) -> Self {
        Self {
            rank,
            max_iterations: 20,
            rel_tol: 1e-4,
            solver,
            seed: 0,
            w_pgd: PgdConfig::default(),
            h_pgd: PgdConfig::default(),
            exact: ExactConfig::default(),
            fa: AnnealSchedule::forward_default(),
            ra: AnnealSchedule::reverse_default(),
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            exact: self.exact,
            pgd: self.h_pgd,
            fa: self.fa,
            ra: self.ra,
        }
    }

    fn validate(&self, m: usize, n: usize) -> Result<()> {
        if self.rank == 0 || self.rank >= m.min(n) {
            return Err(NbmfError::Config(format!(
                "rank {} must satisfy 0 < k < min(m, n) = {}",
                self.rank,
                m.min(n)
            )));
        }
        if self.max_iterations == 0 {
            return Err(NbmfError::Config("max_iterations must be positive".into()));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(NbmfError::Config(format!("rel_tol must be >= 0, got {}", self.rel_tol)));
        }
        self.w_pgd.validate()?;
        self.h_pgd.validate()?;
        self.fa.validate()?;
        self.ra.validate()?;
        Ok(())
    }
}

/// Warning text when `k(n+m) >= nm`, i.e. the factorization has at least as
/// many parameters as the data.
pub fn overfit_warning(m: usize, n: usize, k: usize) -> Option<String> {
    (k * (n + m) >= n * m).then(|| {
        format!("rank {k} may overfit a {m}x{n} matrix: k(n+m) = {} >= nm = {}", k * (n + m), n * m)
    })
}

/// Snapshot after one ALS iteration (iteration 0 is the initialization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationState<H> {
    pub iteration: usize,
    pub w: NonnegMatrix,
    pub h: H,
    /// `||V - WH||_F²` after both steps.
    pub error: f64,
    /// Error after the W-step, before the H-step.
    pub error_after_w: Option<f64>,
    pub w_seconds: f64,
    pub h_seconds: f64,
    pub w_pgd_iterations: usize,
    /// Per-column reports of the binary H-step (NBMF only).
    pub column_reports: Vec<SolveReport>,
}

pub type NbmfState = FactorizationState<BinaryMatrix>;
pub type NmfState = FactorizationState<NonnegMatrix>;

/// Initial factors: `W` uniform on `[0,1)`, `H` Bernoulli(1/2).
pub fn initial_factors(m: usize, n: usize, k: usize, seed: u64) -> (NonnegMatrix, BinaryMatrix) {
    let base = RngSpec::new(seed, 0);
    let mut rng = base.child(W_INIT_TAG).rng();
    let w = NonnegMatrix::new(m, k, (0..m * k).map(|_| rng.random::<f64>()).collect())
        .expect("uniform samples are nonnegative");
    let mut rng = base.child(H_INIT_TAG).rng();
    let h = BinaryMatrix::new(k, n, (0..k * n).map(|_| u8::from(rng.random::<bool>())).collect())
        .expect("bernoulli samples are binary");
    (w, h)
}

fn converged(prev: f64, cur: f64, rel_tol: f64) -> bool {
    rel_tol > 0.0 && (prev - cur).abs() <= rel_tol * prev.abs().max(f64::MIN_POSITIVE)
}

pub(crate) fn w_step<H: crate::model::DenseView>(
    v: &NonnegMatrix,
    h: &H,
    start: &NonnegMatrix,
    config: &PgdConfig,
) -> Result<(NonnegMatrix, usize)> {
    let problem = LeastSquaresProblem::w_step(v, h)?;
    let out = pgd_solve(&problem, start.as_matrix(), config)?;
    Ok((NonnegMatrix::try_from(out.point)?, out.iterations))
}

/// Replaces columns of `w` whose feature row in `h` is all zero.
fn revive_dead_features(w: &NonnegMatrix, h: &BinaryMatrix, rng: RngSpec) -> NonnegMatrix {
    let dead: Vec<usize> = (0..h.rows()).filter(|&i| h.row_is_zero(i)).collect();
    if dead.is_empty() {
        return w.clone();
    }
    let mut rng = rng.rng();
    let mut m = w.as_matrix().clone();
    for &p in &dead {
        for i in 0..m.rows() {
            m.set(i, p, rng.random::<f64>());
        }
    }
    NonnegMatrix::try_from(m).expect("uniform samples are nonnegative")
}

/// Binary H-step: every column solved independently by `config.solver`.
pub fn binary_h_step(
    v: &NonnegMatrix,
    w: &NonnegMatrix,
    previous: &BinaryMatrix,
    config: &AlsConfig,
    iteration: usize,
) -> Result<(BinaryMatrix, Vec<SolveReport>)> {
    let solver_cfg = config.solver_config();
    let iter_seed = RngSpec::new(config.seed, 0).child(COLUMN_TAG ^ ((iteration as u64) << 16));
    let reports: Vec<SolveReport> = (0..v.cols())
        .into_par_iter()
        .map(|j| {
            let vj = column(v, j)?;
            let prev = previous.column(j)?;
            let prev = config.solver.uses_previous().then_some(&prev);
            solve_column(config.solver, w, &vj, prev, &solver_cfg, iter_seed.with_stream(j as u64))
        })
        .collect::<Result<_>>()?;
    let cols: Vec<_> = reports.iter().map(|r| r.best_state.clone()).collect();
    Ok((BinaryMatrix::from_columns(w.cols(), &cols)?, reports))
}

/// ALS with binary `H`, starting from [`initial_factors`].
pub fn als_nbmf(v: &NonnegMatrix, config: &AlsConfig) -> Result<Vec<NbmfState>> {
    let (m, n) = (v.rows(), v.cols());
    config.validate(m, n)?;
    let (w0, h0) = initial_factors(m, n, config.rank, config.seed);
    als_nbmf_from(v, config, w0, h0)
}

/// ALS with binary `H` from explicit initial factors.
pub fn als_nbmf_from(
    v: &NonnegMatrix,
    config: &AlsConfig,
    w0: NonnegMatrix,
    h0: BinaryMatrix,
) -> Result<Vec<NbmfState>> {
    let (m, n) = (v.rows(), v.cols());
    config.validate(m, n)?;
    if w0.rows() != m || w0.cols() != config.rank || h0.rows() != config.rank || h0.cols() != n {
        return Err(NbmfError::dims(
            "als_nbmf",
            format!(
                "V is {m}x{n}, rank {}, W0 is {}x{}, H0 is {}x{}",
                config.rank,
                w0.rows(),
                w0.cols(),
                h0.rows(),
                h0.cols()
            ),
        ));
    }
    let error = frobenius_error(v, &w0, &h0)?;
    let mut states = vec![FactorizationState {
        iteration: 0,
        w: w0,
        h: h0,
        error,
        error_after_w: None,
        w_seconds: 0.0,
        h_seconds: 0.0,
        w_pgd_iterations: 0,
        column_reports: Vec::new(),
    }];

    for t in 1..=config.max_iterations {
        let prev = states.last().expect("initial state present");
        let started = Instant::now();
        let start = revive_dead_features(
            &prev.w,
            &prev.h,
            RngSpec::new(config.seed, t as u64).child(DEAD_FEATURE_TAG),
        );
        let (w, w_iters) = w_step(v, &prev.h, &start, &config.w_pgd)?;
        let w_seconds = started.elapsed().as_secs_f64();
        let error_after_w = frobenius_error(v, &w, &prev.h)?;

        let started = Instant::now();
        let (h, reports) = binary_h_step(v, &w, &prev.h, config, t)?;
        let h_seconds = started.elapsed().as_secs_f64();
        let error = frobenius_error(v, &w, &h)?;
        let prev_error = prev.error;
        states.push(FactorizationState {
            iteration: t,
            w,
            h,
            error,
            error_after_w: Some(error_after_w),
            w_seconds,
            h_seconds,
            w_pgd_iterations: w_iters,
            column_reports: reports,
        });
        if converged(prev_error, error, config.rel_tol) {
            break;
        }
    }
    Ok(states)
}

/// ALS with nonnegative real `H`; both steps by PGD.
pub fn als_nmf(v: &NonnegMatrix, config: &AlsConfig) -> Result<Vec<NmfState>> {
    let (m, n) = (v.rows(), v.cols());
    config.validate(m, n)?;
    let k = config.rank;
    let (w0, _) = initial_factors(m, n, k, config.seed);
    let mut rng = RngSpec::new(config.seed, 0).child(H_INIT_TAG).rng();
    let h0 = NonnegMatrix::new(k, n, (0..k * n).map(|_| rng.random::<f64>()).collect())?;
    let error = frobenius_error(v, &w0, &h0)?;
    let mut states = vec![FactorizationState {
        iteration: 0,
        w: w0,
        h: h0,
        error,
        error_after_w: None,
        w_seconds: 0.0,
        h_seconds: 0.0,
        w_pgd_iterations: 0,
        column_reports: Vec::new(),
    }];
    for t in 1..=config.max_iterations {
        let prev = states.last().expect("initial state present");
        let started = Instant::now();
        let (w, w_iters) = w_step(v, &prev.h, &prev.w, &config.w_pgd)?;
        let w_seconds = started.elapsed().as_secs_f64();
        let error_after_w = frobenius_error(v, &w, &prev.h)?;

        let started = Instant::now();
        let problem = LeastSquaresProblem::h_step(v, &w, f64::INFINITY)?;
        let out = pgd_solve(&problem, prev.h.as_matrix(), &config.h_pgd)?;
        let h = NonnegMatrix::try_from(out.point)?;
        let h_seconds = started.elapsed().as_secs_f64();
        let error = frobenius_error(v, &w, &h)?;
        let prev_error = prev.error;
        states.push(FactorizationState {
            iteration: t,
            w,
            h,
            error,
            error_after_w: Some(error_after_w),
            w_seconds,
            h_seconds,
            w_pgd_iterations: w_iters,
            column_reports: Vec::new(),
        });
        if converged(prev_error, error, config.rel_tol) {
            break;
        }
    }
    Ok(states)
}

/// `outer(w, h)` helper for rank-one fixtures.
pub fn outer(w: &[f64], h: &[f64]) -> Matrix {
    Matrix::from_fn(w.len(), h.len(), |i, j| w[i] * h[j])
}

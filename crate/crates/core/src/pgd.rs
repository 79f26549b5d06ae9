//! Box-constrained projected gradient descent.
//!
//! Each iteration takes `x(α) = P[x - α∇f(x)]` where `P` clamps onto the box,
//! and picks `α` by an Armijo search along the projection arc: starting from
//! the previously accepted step, `α` grows by `1/beta` while the sufficient
//! decrease test keeps holding, or shrinks by `beta` until it holds.

use serde::{Deserialize, Serialize};

use crate::error::{NbmfError, Result};
use crate::model::{DenseView, Matrix};

const MAX_LINE_SEARCH_STEPS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgdConfig {
    pub max_iters: usize,
    /// Stop once the infinity norm of the projected gradient is at most this.
    pub tol: f64,
    pub beta: f64,
    pub sigma: f64,
    pub alpha_init: f64,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            tol: 1e-6,
            beta: 0.1,
            sigma: 0.01,
            alpha_init: 1.0,
        }
    }
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(NbmfError::Parameter("pgd max_iters must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(NbmfError::Parameter(format!("pgd tol must be > 0, got {}", self.tol)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(NbmfError::Parameter(format!("pgd beta must lie in (0,1), got {}", self.beta)));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(NbmfError::Parameter(format!(
                "pgd sigma must lie in (0,1), got {}",
                self.sigma
            )));
        }
        if !(self.alpha_init > 0.0 && self.alpha_init.is_finite()) {
            return Err(NbmfError::Parameter(format!(
                "pgd alpha_init must be positive, got {}",
                self.alpha_init
            )));
        }
        Ok(())
    }
}

/// Smooth objective over a flat variable vector.
pub trait BoxObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);

    /// `f(x + d) - f(x)` where `grad = ∇f(x)`.
    fn change(&self, x: &[f64], grad: &[f64], d: &[f64]) -> f64 {
        let _ = grad;
        let moved: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + b).collect();
        self.value(&moved) - self.value(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdOutcome {
    pub point: Vec<f64>,
    pub iterations: usize,
    pub final_pg_norm: f64,
    pub converged: bool,
    /// Objective at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
}

/// Clamps `x` elementwise onto `[lower, upper]`.
pub fn project(x: &[f64], lower: &[f64], upper: &[f64]) -> Result<Vec<f64>> {
    if lower.len() != x.len() || upper.len() != x.len() {
        return Err(NbmfError::dims(
            "project",
            format!("x has {} entries, bounds have {} / {}", x.len(), lower.len(), upper.len()),
        ));
    }
    Ok(x.iter()
        .zip(lower.iter().zip(upper))
        .map(|(&xi, (&l, &u))| l.max(u.min(xi)))
        .collect())
}

/// Infinity norm of the projected gradient.
pub fn projected_gradient_norm(x: &[f64], grad: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut norm: f64 = 0.0;
    for i in 0..x.len() {
        let g = grad[i];
        let pg = if x[i] <= lower[i] {
            g.min(0.0)
        } else if x[i] >= upper[i] {
            g.max(0.0)
        } else {
            g
        };
        norm = norm.max(pg.abs());
    }
    norm
}

struct Trial {
    point: Vec<f64>,
    delta: f64,
    sufficient: bool,
}

fn trial<F: BoxObjective + ?Sized>(
    f: &F,
    x: &[f64],
    grad: &[f64],
    lower: &[f64],
    upper: &[f64],
    alpha: f64,
    sigma: f64,
) -> Trial {
    let point: Vec<f64> = (0..x.len())
        .map(|i| lower[i].max(upper[i].min(x[i] - alpha * grad[i])))
        .collect();
    let d: Vec<f64> = point.iter().zip(x).map(|(a, b)| a - b).collect();
    let slope: f64 = grad.iter().zip(&d).map(|(g, di)| g * di).sum();
    let delta = f.change(x, grad, &d);
    Trial {
        point,
        delta,
        sufficient: delta <= sigma * slope,
    }
}

/// Minimizes `f` over the box starting from a feasible `start`.
pub fn pgd_minimize<F: BoxObjective + ?Sized>(
    f: &F,
    start: &[f64],
    lower: &[f64],
    upper: &[f64],
    config: &PgdConfig,
) -> Result<PgdOutcome> {
    config.validate()?;
    let n = f.dim();
    if start.len() != n || lower.len() != n || upper.len() != n {
        return Err(NbmfError::dims(
            "pgd",
            format!(
                "objective has {n} variables, start {} / lower {} / upper {}",
                start.len(),
                lower.len(),
                upper.len()
            ),
        ));
    }
    for i in 0..n {
        if !(lower[i] <= start[i] && start[i] <= upper[i]) {
            return Err(NbmfError::Infeasible(format!(
                "coordinate {i} = {} outside [{}, {}]",
                start[i], lower[i], upper[i]
            )));
        }
    }

    let mut x = start.to_vec();
    let mut fx = f.value(&x);
    if !fx.is_finite() {
        return Err(NbmfError::Numeric(format!("objective at start is {fx}")));
    }
    let mut trace = vec![fx];
    let mut grad = vec![0.0; n];
    let mut alpha = config.alpha_init;

    for iter in 0..config.max_iters {
        f.gradient(&x, &mut grad);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(NbmfError::Numeric(format!("non-finite gradient at iteration {iter}")));
        }
        let pg = projected_gradient_norm(&x, &grad, lower, upper);
        if pg <= config.tol {
            return Ok(PgdOutcome {
                point: x,
                iterations: iter,
                final_pg_norm: pg,
                converged: true,
                objective_trace: trace,
            });
        }

        let first = trial(f, &x, &grad, lower, upper, alpha, config.sigma);
        let accepted = if first.sufficient {
            let mut best = first;
            for _ in 0..MAX_LINE_SEARCH_STEPS {
                let bigger = alpha / config.beta;
                if !bigger.is_finite() {
                    break;
                }
                let t = trial(f, &x, &grad, lower, upper, bigger, config.sigma);
                if !t.sufficient || t.point == best.point {
                    break;
                }
                alpha = bigger;
                best = t;
            }
            Some(best)
        } else {
            let mut found = None;
            for _ in 0..MAX_LINE_SEARCH_STEPS {
                alpha *= config.beta;
                let t = trial(f, &x, &grad, lower, upper, alpha, config.sigma);
                if t.sufficient {
                    found = Some(t);
                    break;
                }
            }
            found
        };

        let Some(step) = accepted else {
            // Step size underflowed without sufficient decrease; x is stationary to working precision.
            return Ok(PgdOutcome {
                point: x,
                iterations: iter,
                final_pg_norm: pg,
                converged: false,
                objective_trace: trace,
            });
        };
        if !step.delta.is_finite() {
            return Err(NbmfError::Numeric(format!("non-finite objective at iteration {iter}")));
        }
        x = step.point;
        fx = f.value(&x);
        if !fx.is_finite() {
            return Err(NbmfError::Numeric(format!("objective is {fx} at iteration {iter}")));
        }
        trace.push(fx);
    }

    f.gradient(&x, &mut grad);
    let pg = projected_gradient_norm(&x, &grad, lower, upper);
    Ok(PgdOutcome {
        point: x,
        iterations: config.max_iters,
        final_pg_norm: pg,
        converged: pg <= config.tol,
        objective_trace: trace,
    })
}

/// Which factor a [`LeastSquaresProblem`] optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepMode {
    /// Minimize over `W` (m x k) with `H` fixed.
    W,
    /// Minimize over `H` (k x n) with `W` fixed.
    H,
}

/// `min ||V - WH||_F²` over one factor, the other held fixed, inside a uniform box.
///
/// The objective is kept in Gram form so evaluations cost `O(size * k)`
/// instead of a full reconstruction.
#[derive(Debug, Clone)]
pub struct LeastSquaresProblem {
    mode: StepMode,
    var_rows: usize,
    var_cols: usize,
    lower: f64,
    upper: f64,
    /// `HHᵀ` for the W-step, `WᵀW` for the H-step (k x k).
    gram: Matrix,
    /// `VHᵀ` for the W-step, `WᵀV` for the H-step.
    cross: Matrix,
    data_norm: f64,
}

impl LeastSquaresProblem {
    /// W-step with `W >= 0`.
    pub fn w_step<V: DenseView + ?Sized, H: DenseView + ?Sized>(v: &V, h: &H) -> Result<Self> {
        let (m, n) = v.shape();
        let (k, hn) = h.shape();
        if hn != n {
            return Err(NbmfError::dims(
                "W-step",
                format!("V is {m}x{n} but H is {k}x{hn}"),
            ));
        }
        let vm = dense(v);
        let hm = dense(h);
        Ok(Self {
            mode: StepMode::W,
            var_rows: m,
            var_cols: k,
            lower: 0.0,
            upper: f64::INFINITY,
            gram: hm.matmul_t(&hm)?,
            cross: vm.matmul_t(&hm)?,
            data_norm: vm.squared_norm(),
        })
    }

    /// H-step with `0 <= H <= upper` (`+inf` for NMF, `1` for the binary relaxation).
    pub fn h_step<V: DenseView + ?Sized, W: DenseView + ?Sized>(
        v: &V,
        w: &W,
        upper: f64,
    ) -> Result<Self> {
        let (m, n) = v.shape();
        let (wm, k) = w.shape();
        if wm != m {
            return Err(NbmfError::dims(
                "H-step",
                format!("V is {m}x{n} but W is {wm}x{k}"),
            ));
        }
        if !(upper > 0.0) {
            return Err(NbmfError::Parameter(format!("H-step upper bound must be positive, got {upper}")));
        }
        let vm = dense(v);
        let wmat = dense(w);
        Ok(Self {
            mode: StepMode::H,
            var_rows: k,
            var_cols: n,
            lower: 0.0,
            upper,
            gram: wmat.t_matmul(&wmat)?,
            cross: wmat.t_matmul(&vm)?,
            data_norm: vm.squared_norm(),
        })
    }

    /// Relaxed binary subproblem for one data column: `min ||v - Wh||²`, `h ∈ [0,1]^k`.
    pub fn relaxed_column(w: &Matrix, v: &[f64]) -> Result<Self> {
        let vm = Matrix::new(v.len(), 1, v.to_vec())?;
        Self::h_step(&vm, w, 1.0)
    }

    pub fn mode(&self) -> StepMode {
        self.mode
    }

    /// Shape of the variable matrix.
    pub fn shape(&self) -> (usize, usize) {
        (self.var_rows, self.var_cols)
    }

    pub fn lower_bounds(&self) -> Vec<f64> {
        vec![self.lower; self.var_rows * self.var_cols]
    }

    pub fn upper_bounds(&self) -> Vec<f64> {
        vec![self.upper; self.var_rows * self.var_cols]
    }

    /// `<D, D·G>` (W-step) or `<D, G·D>` (H-step).
    fn quad(&self, d: &[f64]) -> f64 {
        let k = self.gram.rows();
        let g = self.gram.data();
        match self.mode {
            StepMode::W => {
                let mut total = 0.0;
                for row in d.chunks_exact(k) {
                    for a in 0..k {
                        if row[a] == 0.0 {
                            continue;
                        }
                        let mut s = 0.0;
                        for b in 0..k {
                            s += g[a * k + b] * row[b];
                        }
                        total += row[a] * s;
                    }
                }
                total
            }
            StepMode::H => {
                let n = self.var_cols;
                let mut total = 0.0;
                for j in 0..n {
                    for a in 0..k {
                        let da = d[a * n + j];
                        if da == 0.0 {
                            continue;
                        }
                        let mut s = 0.0;
                        for b in 0..k {
                            s += g[a * k + b] * d[b * n + j];
                        }
                        total += da * s;
                    }
                }
                total
            }
        }
    }
}

fn dense<M: DenseView + ?Sized>(m: &M) -> Matrix {
    let (r, c) = m.shape();
    Matrix::from_fn(r, c, |i, j| m.at(i, j))
}

impl BoxObjective for LeastSquaresProblem {
    fn dim(&self) -> usize {
        self.var_rows * self.var_cols
    }

    fn value(&self, x: &[f64]) -> f64 {
        let linear: f64 = x.iter().zip(self.cross.data()).map(|(a, b)| a * b).sum();
        self.data_norm - 2.0 * linear + self.quad(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let k = self.gram.rows();
        let g = self.gram.data();
        let cross = self.cross.data();
        match self.mode {
            StepMode::W => {
                for (r, (xr, or)) in x.chunks_exact(k).zip(out.chunks_exact_mut(k)).enumerate() {
                    for a in 0..k {
                        let mut s = 0.0;
                        for b in 0..k {
                            s += xr[b] * g[b * k + a];
                        }
                        or[a] = 2.0 * (s - cross[r * k + a]);
                    }
                }
            }
            StepMode::H => {
                let n = self.var_cols;
                for a in 0..k {
                    for j in 0..n {
                        let mut s = 0.0;
                        for b in 0..k {
                            s += g[a * k + b] * x[b * n + j];
                        }
                        out[a * n + j] = 2.0 * (s - cross[a * n + j]);
                    }
                }
            }
        }
    }

    fn change(&self, _x: &[f64], grad: &[f64], d: &[f64]) -> f64 {
        let slope: f64 = grad.iter().zip(d).map(|(g, di)| g * di).sum();
        slope + self.quad(d)
    }
}

/// Gradient of the least-squares objective at `point`:
/// `2(WH - V)Hᵀ` for the W-step, `2Wᵀ(WH - V)` for the H-step.
pub fn gradient(problem: &LeastSquaresProblem, point: &Matrix) -> Result<Matrix> {
    let (r, c) = problem.shape();
    if point.rows() != r || point.cols() != c {
        return Err(NbmfError::dims(
            "gradient",
            format!("point is {}x{}, problem variable is {r}x{c}", point.rows(), point.cols()),
        ));
    }
    let mut out = vec![0.0; r * c];
    problem.gradient(point.data(), &mut out);
    Matrix::new(r, c, out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdSolution {
    pub point: Matrix,
    pub iterations: usize,
    pub final_pg_norm: f64,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

pub fn pgd_solve(
    problem: &LeastSquaresProblem,
    start: &Matrix,
    config: &PgdConfig,
) -> Result<PgdSolution> {
    let (r, c) = problem.shape();
    if start.rows() != r || start.cols() != c {
        return Err(NbmfError::dims(
            "pgd_solve",
            format!("start is {}x{}, problem variable is {r}x{c}", start.rows(), start.cols()),
        ));
    }
    let out = pgd_minimize(
        problem,
        start.data(),
        &problem.lower_bounds(),
        &problem.upper_bounds(),
        config,
    )?;
    Ok(PgdSolution {
        point: Matrix::new(r, c, out.point)?,
        iterations: out.iterations,
        final_pg_norm: out.final_pg_norm,
        converged: out.converged,
        objective_trace: out.objective_trace,
    })
}

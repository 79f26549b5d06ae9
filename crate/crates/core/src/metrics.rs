//! Per-column comparison against the exact optimum and summary statistics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::anneal::SolveReport;
use crate::error::{NbmfError, Result};
use crate::model::{column, column_error, BinaryMatrix, BinaryVector, NonnegMatrix};

/// Optimal objectives at or below this fraction of `||v||²` count as zero.
pub const ZERO_OBJECTIVE_RTOL: f64 = 1e-12;

pub fn hamming(x: &BinaryVector, y: &BinaryVector) -> Result<usize> {
    if x.len() != y.len() {
        return Err(NbmfError::dims(
            "hamming",
            format!("lengths {} and {}", x.len(), y.len()),
        ));
    }
    Ok(x.bits().iter().zip(y.bits()).filter(|(a, b)| a != b).count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnEval {
    pub column: usize,
    pub objective_method: f64,
    pub objective_opt: f64,
    pub hamming: usize,
    /// `objective_method / objective_opt`; `None` when the optimum is zero.
    pub approx_ratio: Option<f64>,
    pub optimal_flag: bool,
    /// Whether the exact solver saw several optima; `None` above the exhaustive cap.
    pub degenerate: Option<bool>,
}

/// Compares each column of `h_method` with the exact solution of that column.
pub fn evaluate_columns(
    v: &NonnegMatrix,
    w: &NonnegMatrix,
    h_method: &BinaryMatrix,
    exact_reports: &[SolveReport],
) -> Result<Vec<ColumnEval>> {
    if h_method.cols() != v.cols() || h_method.rows() != w.cols() || w.rows() != v.rows() {
        return Err(NbmfError::dims(
            "evaluate_columns",
            format!(
                "V is {}x{}, W is {}x{}, H is {}x{}",
                v.rows(),
                v.cols(),
                w.rows(),
                w.cols(),
                h_method.rows(),
                h_method.cols()
            ),
        ));
    }
    if exact_reports.len() < v.cols() {
        return Err(NbmfError::Evaluation(format!(
            "exact reports cover {} of {} columns",
            exact_reports.len(),
            v.cols()
        )));
    }
    (0..v.cols())
        .map(|j| {
            let vj = column(v, j)?;
            let hj = h_method.column(j)?;
            let exact = &exact_reports[j];
            if exact.best_state.len() != hj.len() {
                return Err(NbmfError::Evaluation(format!(
                    "exact report for column {j} has {} variables, expected {}",
                    exact.best_state.len(),
                    hj.len()
                )));
            }
            let objective_method = column_error(w.as_matrix(), &vj, &hj.to_f64())?;
            let objective_opt = column_error(w.as_matrix(), &vj, &exact.best_state.to_f64())?;
            let scale = vj.iter().map(|x| x * x).sum::<f64>().max(1.0);
            let approx_ratio =
                (objective_opt > ZERO_OBJECTIVE_RTOL * scale).then(|| objective_method / objective_opt);
            Ok(ColumnEval {
                column: j,
                objective_method,
                objective_opt,
                hamming: hamming(&hj, &exact.best_state)?,
                approx_ratio,
                optimal_flag: exact.optimal.unwrap_or(false),
                degenerate: exact.degenerate,
            })
        })
        .collect()
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std_error: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    let count = values.len();
    if count == 0 {
        return Summary {
            count,
            mean: f64::NAN,
            std_error: f64::NAN,
        };
    }
    let n = count as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std_error = if count > 1 {
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Summary {
        count,
        mean,
        std_error,
    }
}

/// Aggregates over a batch of column evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub hamming: Summary,
    /// Over columns with a defined ratio only.
    pub approx_ratio: Summary,
    pub zero_optimum_columns: usize,
    pub unproven_columns: usize,
}

pub fn summarize_evals(evals: &[ColumnEval]) -> EvalSummary {
    let hamming: Vec<f64> = evals.iter().map(|e| e.hamming as f64).collect();
    let ratios: Vec<f64> = evals.iter().filter_map(|e| e.approx_ratio).collect();
    EvalSummary {
        hamming: summarize(&hamming),
        approx_ratio: summarize(&ratios),
        zero_optimum_columns: evals.iter().filter(|e| e.approx_ratio.is_none()).count(),
        unproven_columns: evals.iter().filter(|e| !e.optimal_flag).count(),
    }
}

/// Equal-width bins on `[0,1]`; the last bin is closed on the right.
pub fn histogram(values: &[f64], bins: usize) -> Result<Vec<usize>> {
    if bins == 0 {
        return Err(NbmfError::Parameter("bins must be at least 1".into()));
    }
    let mut counts = vec![0; bins];
    for &v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(NbmfError::Range { value: v });
        }
        let b = ((v * bins as f64).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(counts)
}

pub const METRICS_HEADER: &str =
    "iteration,column,objective_method,objective_opt,hamming,approx_ratio,optimal_flag";

/// Metric table rows as CSV text with [`METRICS_HEADER`]. An undefined ratio is an empty field.
pub fn metrics_csv<'a>(rows: impl IntoIterator<Item = (usize, &'a ColumnEval)>) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for (iteration, e) in rows {
        let ratio = e.approx_ratio.map(|r| r.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{iteration},{},{},{},{},{ratio},{}",
            e.column, e.objective_method, e.objective_opt, e.hamming, e.optimal_flag
        )
        .expect("writing to a String");
    }
    out
}

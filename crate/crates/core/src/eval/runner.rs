use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::als::{als_nbmf_from, initial_factors, overfit_warning, w_step, NbmfState};
use crate::anneal::{
    reverse_reads, round_relaxed, solve_exact, solve_fa, solve_pgd_round, solve_ra, AnnealSchedule,
    ExactConfig, SolveReport, SolverKind,
};
use crate::datagen::{generate_dataset, load_images, SyntheticSpec};
use crate::error::{NbmfError, Result};
use crate::io::{format_matrix, read_nonneg_matrix};
use crate::metrics::{evaluate_columns, histogram, metrics_csv, summarize, summarize_evals, ColumnEval};
use crate::model::{column, BinaryMatrix, BinaryVector, NonnegMatrix, RngSpec};
use crate::pgd::PgdConfig;
use crate::qubo::{build_qubo, QuboInstance};

use super::config::{als_config, synthetic_spec, DatasetSource, RunConfig, Settings};

pub const TRAJECTORY_HEADER: &str = "iteration,method,error,error_after_w";
pub const CALIBRATION_HEADER: &str = "distance,escape_rate,improve_rate,mean_energy";
pub const ACCURACY_HEADER: &str =
    "rho,k,m,columns,mean_hamming,se_hamming,mean_approx_ratio,se_approx_ratio,zero_optimum_columns,unproven_columns";
pub const ACCURACY_COLUMNS_HEADER: &str =
    "rho,k,replicate,column,objective_method,objective_opt,hamming,approx_ratio,optimal_flag";

const THREADS_ENV: &str = "NBMF_THREADS";
const CALIBRATE_TAG: u64 = 0xca1;

/// Process exit status for an error: 2 for configuration and input format
/// problems, 3 for dataset problems, 1 otherwise.
pub fn exit_code(e: &NbmfError) -> i32 {
    match e {
        NbmfError::Config(_) | NbmfError::Parameter(_) | NbmfError::Parse { .. } => 2,
        NbmfError::Ingestion { .. } => 3,
        _ => 1,
    }
}

/// Runs `f` on a rayon pool sized by `threads`, else by `NBMF_THREADS`, else the default.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let threads = match threads {
        Some(t) => Some(t),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|e| NbmfError::Config(format!("{THREADS_ENV}='{v}': {e}")))?,
            ),
            Err(_) => None,
        },
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| NbmfError::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Writes every file under `dir` through a temporary name, then renames them
/// into place, so a failed run leaves no partial report.
pub fn write_atomically(dir: &Path, files: &[(PathBuf, String)]) -> Result<()> {
    let mut staged = Vec::with_capacity(files.len());
    let result = (|| {
        for (rel, contents) in files {
            let target = dir.join(rel);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            let name = target.file_name().and_then(|n| n.to_str()).unwrap_or("out");
            let tmp = target.with_file_name(format!(".{name}.tmp"));
            fs::write(&tmp, contents)?;
            staged.push((tmp, target));
        }
        for (tmp, target) in &staged {
            fs::rename(tmp, target)?;
        }
        Ok(())
    })();
    if result.is_err() {
        for (tmp, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
    }
    result
}

fn ingestion(path: &Path, e: NbmfError) -> NbmfError {
    match e {
        NbmfError::Ingestion { .. } => e,
        other => NbmfError::Ingestion {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

/// Loads the data matrix. Every failure is reported as an ingestion error.
pub fn load_dataset(source: &DatasetSource) -> Result<NonnegMatrix> {
    match source {
        DatasetSource::Csv(path) => read_nonneg_matrix(path).map_err(|e| ingestion(path, e)),
        DatasetSource::Images { dir, side } => load_images(dir, *side).map_err(|e| ingestion(dir, e)),
        DatasetSource::Synthetic(spec) => Ok(generate_dataset(spec)?.v),
    }
}

pub fn method_slug(kind: SolverKind) -> &'static str {
    match kind {
        SolverKind::Exact => "exact",
        SolverKind::PgdRound => "pgd",
        SolverKind::Fa => "fa",
        SolverKind::Ra => "ra",
        SolverKind::RaFa => "ra_fa",
        SolverKind::RaPgd => "ra_pgd",
    }
}

/// Exact solutions of every column subproblem for a fixed `W`.
pub fn exact_columns(v: &NonnegMatrix, w: &NonnegMatrix, config: &ExactConfig) -> Result<Vec<SolveReport>> {
    (0..v.cols())
        .into_par_iter()
        .map(|j| solve_exact(&build_qubo(w, &column(v, j)?)?, config))
        .collect()
}

/// Per-method result of [`factorize`].
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: SolverKind,
    pub states: Vec<NbmfState>,
    /// `(iteration, evaluation)` pairs; empty unless Hamming metrics were requested.
    pub evals: Vec<(usize, ColumnEval)>,
}

#[derive(Debug, Clone)]
pub struct FactorizeRun {
    pub v: NonnegMatrix,
    pub runs: Vec<MethodRun>,
    pub warnings: Vec<String>,
}

/// Runs every configured method from the same initial factors.
pub fn factorize(config: &RunConfig) -> Result<FactorizeRun> {
    let v = load_dataset(&config.dataset)?;
    let (m, n, k) = (v.rows(), v.cols(), config.als.rank);
    if k == 0 || k >= m.min(n) {
        return Err(NbmfError::Config(format!(
            "rank {k} must satisfy 0 < k < min(m, n) = {}",
            m.min(n)
        )));
    }
    let warnings: Vec<String> = overfit_warning(m, n, k).into_iter().collect();
    let (w0, h0) = initial_factors(m, n, k, config.als.seed);
    let mut runs = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let mut als = config.als;
        als.solver = method;
        let states = als_nbmf_from(&v, &als, w0.clone(), h0.clone())?;
        let mut evals = Vec::new();
        if config.emit.hamming {
            for s in states.iter().skip(1) {
                let exact = if method == SolverKind::Exact {
                    s.column_reports.clone()
                } else {
                    exact_columns(&v, &s.w, &config.als.exact)?
                };
                for e in evaluate_columns(&v, &s.w, &s.h, &exact)? {
                    evals.push((s.iteration, e));
                }
            }
        }
        runs.push(MethodRun { method, states, evals });
    }
    Ok(FactorizeRun { v, runs, warnings })
}

fn trajectory_csv(runs: &[MethodRun], timing: bool) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    if timing {
        out.push_str(",elapsed_seconds");
    }
    out.push('\n');
    for run in runs {
        let mut elapsed = 0.0;
        for s in &run.states {
            elapsed += s.w_seconds + s.h_seconds;
            let after_w = s.error_after_w.map(|e| e.to_string()).unwrap_or_default();
            write!(out, "{},{},{},{after_w}", s.iteration, run.method, s.error).expect("String write");
            if timing {
                write!(out, ",{elapsed}").expect("String write");
            }
            out.push('\n');
        }
    }
    out
}

fn histogram_csv(states: &[NbmfState], bins: usize) -> Result<Option<String>> {
    let mut out = String::from("iteration,bin,lower,upper,count\n");
    let mut any = false;
    for s in states {
        let values: Vec<f64> = s
            .column_reports
            .iter()
            .filter_map(|r| r.relaxed.as_deref())
            .flatten()
            .copied()
            .collect();
        if values.is_empty() {
            continue;
        }
        any = true;
        for (b, count) in histogram(&values, bins)?.into_iter().enumerate() {
            let lower = b as f64 / bins as f64;
            let upper = (b + 1) as f64 / bins as f64;
            writeln!(out, "{},{b},{lower},{upper},{count}", s.iteration).expect("String write");
        }
    }
    Ok(any.then_some(out))
}

fn settings_json(s: &Settings) -> Value {
    Value::Object(s.iter().map(|(k, v)| (k.to_string(), Value::String(v.to_string()))).collect())
}

fn summary_json(config: &RunConfig, run: &FactorizeRun) -> Value {
    let methods: Vec<Value> = run
        .runs
        .iter()
        .map(|r| {
            let last = r.states.last().expect("at least the initial state");
            let final_evals: Vec<ColumnEval> = r
                .evals
                .iter()
                .filter(|(t, _)| *t == last.iteration)
                .map(|(_, e)| e.clone())
                .collect();
            let eval = (!final_evals.is_empty()).then(|| summarize_evals(&final_evals));
            json!({
                "method": r.method.label(),
                "iterations": last.iteration,
                "initial_error": r.states[0].error,
                "final_error": last.error,
                "w_step_seconds": r.states.iter().map(|s| s.w_seconds).sum::<f64>(),
                "h_step_seconds": r.states.iter().map(|s| s.h_seconds).sum::<f64>(),
                "samples_evaluated": r.states.iter().flat_map(|s| &s.column_reports).map(|c| c.samples_evaluated).sum::<u64>(),
                "final_iteration_metrics": eval,
            })
        })
        .collect();
    let synthetic_seed = match &config.dataset {
        DatasetSource::Synthetic(spec) => Some(spec.seed),
        _ => None,
    };
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": settings_json(&config.settings),
        "seeds": { "als": config.als.seed, "synthetic": synthetic_seed },
        "data": { "rows": run.v.rows(), "cols": run.v.cols(), "rank": config.als.rank },
        "warnings": run.warnings,
        "methods": methods,
    })
}

/// Runs [`factorize`] and writes the report files into `config.output_dir`.
pub fn cmd_factorize(config: &RunConfig) -> Result<FactorizeRun> {
    let run = with_threads(config.threads, || factorize(config))??;
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    if config.emit.trajectory {
        files.push(("trajectory.csv".into(), trajectory_csv(&run.runs, config.emit.timing)));
    }
    for r in &run.runs {
        let slug = method_slug(r.method);
        if config.emit.hamming {
            files.push((
                format!("metrics_{slug}.csv").into(),
                metrics_csv(r.evals.iter().map(|(t, e)| (*t, e))),
            ));
        }
        if config.emit.histograms {
            if let Some(csv) = histogram_csv(&r.states, config.emit.histogram_bins)? {
                files.push((format!("histogram_{slug}.csv").into(), csv));
            }
        }
        if config.emit.qubo_dumps {
            // The instances of iteration t are built from the W produced in that iteration's W-step.
            for s in r.states.iter().skip(1) {
                for j in 0..run.v.cols() {
                    let q = build_qubo(&s.w, &column(&run.v, j)?)?;
                    files.push((
                        PathBuf::from("qubo")
                            .join(slug)
                            .join(format!("iter{:03}_col{j:04}.qubo", s.iteration)),
                        q.to_text(),
                    ));
                }
            }
        }
    }
    files.push((
        "summary.json".into(),
        serde_json::to_string_pretty(&summary_json(config, &run)).expect("json serialization") + "\n",
    ));
    write_atomically(&config.output_dir, &files)?;
    Ok(run)
}

/// Manifest text that regenerates the same dataset through `gen-synth --config`.
pub fn synthetic_manifest(spec: &SyntheticSpec) -> String {
    format!(
        "dataset.kind = synthetic\nsynth.n = {}\nsynth.k = {}\nsynth.rho = {}\nsynth.theta = {}\nsynth.seed = {}\n",
        spec.n, spec.k, spec.rho, spec.theta, spec.seed
    )
}

/// Writes `V.csv`, `W.csv`, `H.csv` and `manifest.txt` for a synthetic dataset.
pub fn cmd_gen_synth(settings: &Settings, out: &Path) -> Result<SyntheticSpec> {
    let spec = synthetic_spec(settings)?;
    let d = generate_dataset(&spec)?;
    let files = vec![
        (PathBuf::from("V.csv"), format_matrix(&d.v)),
        (PathBuf::from("W.csv"), format_matrix(&d.w_true)),
        (PathBuf::from("H.csv"), format_matrix(&d.h_true)),
        (PathBuf::from("manifest.txt"), synthetic_manifest(&spec)),
    ];
    write_atomically(out, &files)?;
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRow {
    pub distance: f64,
    pub escape_rate: f64,
    pub improve_rate: f64,
    pub mean_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub rows: Vec<CalibrationRow>,
    /// Distance with the highest improvement rate (first one on ties).
    pub recommended: f64,
}

/// Column subproblems and RA initial states as seen by the next ALS iteration.
pub struct CalibrationBatch {
    pub instances: Vec<QuboInstance>,
    pub initial: Vec<BinaryVector>,
}

/// Builds the batch after `warmup` ALS iterations of `method`.
pub fn calibration_batch(
    v: &NonnegMatrix,
    config: &RunConfig,
    method: SolverKind,
    warmup: usize,
) -> Result<CalibrationBatch> {
    let (m, n, k) = (v.rows(), v.cols(), config.als.rank);
    let (w0, h0) = initial_factors(m, n, k, config.als.seed);
    let (w_prev, h) = if warmup == 0 {
        (w0, h0)
    } else {
        let mut als = config.als;
        als.solver = method;
        als.max_iterations = warmup;
        als.rel_tol = 0.0;
        let last = als_nbmf_from(v, &als, w0, h0)?.pop().expect("states");
        (last.w, last.h)
    };
    let (w, _) = w_step(v, &h, &w_prev, &config.als.w_pgd)?;
    let mut instances = Vec::with_capacity(n);
    let mut initial = Vec::with_capacity(n);
    for j in 0..n {
        let vj = column(v, j)?;
        let prev = h.column(j)?;
        let init = if method == SolverKind::RaPgd {
            let start = prev.to_f64();
            let (_, relaxed) = solve_pgd_round(&w, &vj, Some(&start), &config.als.h_pgd)?;
            round_relaxed(&relaxed)
        } else {
            prev
        };
        instances.push(build_qubo(&w, &vj)?);
        initial.push(init);
    }
    Ok(CalibrationBatch { instances, initial })
}

/// Escape and improvement rates of single RA reads at each distance.
pub fn calibrate(batch: &CalibrationBatch, base: &AnnealSchedule, distances: &[f64], seed: u64) -> Result<Calibration> {
    if distances.is_empty() {
        return Err(NbmfError::Config("calibration needs at least one distance".into()));
    }
    let mut rows = Vec::with_capacity(distances.len());
    for &d in distances {
        let schedule = AnnealSchedule {
            reversal_distance: d,
            ..*base
        };
        schedule.validate().map_err(|e| NbmfError::Config(e.to_string()))?;
        let seeds = RngSpec::new(seed, 0).child(CALIBRATE_TAG);
        let per_column: Vec<(usize, usize, f64, usize)> = batch
            .instances
            .par_iter()
            .zip(&batch.initial)
            .enumerate()
            .map(|(j, (q, init))| {
                let e0 = q.energy(init)?;
                let reads = reverse_reads(q, init, &schedule, seeds.with_stream(j as u64))?;
                let escaped = reads.iter().filter(|r| r.final_state != init.bits()).count();
                let improved = reads.iter().filter(|r| r.final_energy < e0).count();
                let energy: f64 = reads.iter().map(|r| r.final_energy).sum();
                Ok((escaped, improved, energy, reads.len()))
            })
            .collect::<Result<_>>()?;
        let total: usize = per_column.iter().map(|c| c.3).sum();
        let t = total.max(1) as f64;
        rows.push(CalibrationRow {
            distance: d,
            escape_rate: per_column.iter().map(|c| c.0).sum::<usize>() as f64 / t,
            improve_rate: per_column.iter().map(|c| c.1).sum::<usize>() as f64 / t,
            mean_energy: per_column.iter().map(|c| c.2).sum::<f64>() / t,
        });
    }
    let recommended = rows
        .iter()
        .fold(None::<&CalibrationRow>, |best, r| match best {
            Some(b) if b.improve_rate >= r.improve_rate => Some(b),
            _ => Some(r),
        })
        .expect("non-empty")
        .distance;
    Ok(Calibration { rows, recommended })
}

pub fn calibration_csv(c: &Calibration) -> String {
    let mut out = format!("{CALIBRATION_HEADER}\n");
    for r in &c.rows {
        writeln!(out, "{},{},{},{}", r.distance, r.escape_rate, r.improve_rate, r.mean_energy).expect("String write");
    }
    out
}

/// Reversal-distance sweep; writes `calibration.csv` into the output directory.
pub fn cmd_calibrate(config: &RunConfig, distances: &[f64]) -> Result<Calibration> {
    if distances.is_empty() {
        return Err(NbmfError::Config("calibration needs at least one distance".into()));
    }
    if let Some(d) = distances.iter().find(|d| !(0.0..=1.0).contains(*d)) {
        return Err(NbmfError::Config(format!("distance {d} lies outside [0, 1]")));
    }
    let method: SolverKind = config.settings.parsed_or("calibrate.method", SolverKind::Ra)?;
    if !matches!(method, SolverKind::Ra | SolverKind::RaPgd) {
        return Err(NbmfError::Config(format!("calibrate.method must be RA or RA+PGD, got {method}")));
    }
    let warmup: usize = config.settings.parsed_or("calibrate.warmup_iterations", 1)?;
    let v = load_dataset(&config.dataset)?;
    let result = with_threads(config.threads, || -> Result<Calibration> {
        let batch = calibration_batch(&v, config, method, warmup)?;
        calibrate(&batch, &config.als.ra, distances, config.als.seed)
    })??;
    write_atomically(
        &config.output_dir,
        &[(PathBuf::from("calibration.csv"), calibration_csv(&result))],
    )?;
    Ok(result)
}

/// Rounded-relaxation quality against the exact optimum on one synthetic dataset,
/// with `W` fixed to the generating basis.
pub fn accuracy_cell(spec: &SyntheticSpec, exact: &ExactConfig, pgd: &PgdConfig) -> Result<Vec<ColumnEval>> {
    let d = generate_dataset(spec)?;
    let reports: Vec<(SolveReport, SolveReport)> = (0..d.v.cols())
        .into_par_iter()
        .map(|j| {
            let vj = column(&d.v, j)?;
            let (pgd_report, _) = solve_pgd_round(&d.w_true, &vj, None, pgd)?;
            let exact_report = solve_exact(&build_qubo(&d.w_true, &vj)?, exact)?;
            Ok((pgd_report, exact_report))
        })
        .collect::<Result<_>>()?;
    let (method, exact): (Vec<SolveReport>, Vec<SolveReport>) = reports.into_iter().unzip();
    let states: Vec<BinaryVector> = method.into_iter().map(|r| r.best_state).collect();
    let h = BinaryMatrix::from_columns(spec.k, &states)?;
    evaluate_columns(&d.v, &d.w_true, &h, &exact)
}

/// Sweep over `sweep.rho` x `sweep.k`; writes `accuracy.csv` and `accuracy_columns.csv`.
pub fn cmd_accuracy(settings: &Settings, out: &Path, threads: Option<usize>) -> Result<String> {
    let n: usize = settings.parsed_or("sweep.n", 110)?;
    let ks: Vec<usize> = settings.list("sweep.k")?.unwrap_or_else(|| vec![10, 20]);
    let rhos: Vec<f64> = settings.list("sweep.rho")?.unwrap_or_else(|| vec![0.5, 10.0]);
    let replicates: u64 = settings.parsed_or("sweep.seeds", 1)?;
    if ks.is_empty() || rhos.is_empty() || replicates == 0 {
        return Err(NbmfError::Config("sweep.k, sweep.rho and sweep.seeds must be non-empty".into()));
    }
    let base_seed: u64 = settings.parsed_or("seed", 0)?;
    let als = als_config(settings, 1)?;
    let mut summary = format!("{ACCURACY_HEADER}\n");
    let mut per_column = format!("{ACCURACY_COLUMNS_HEADER}\n");
    with_threads(threads, || -> Result<()> {
        for &rho in &rhos {
            for &k in &ks {
                let mut all = Vec::new();
                let mut m = 0;
                for rep in 0..replicates {
                    let spec = SyntheticSpec::new(n, k, rho, base_seed.wrapping_add(rep));
                    spec.validate().map_err(|e| NbmfError::Config(e.to_string()))?;
                    m = spec.m()?;
                    for e in accuracy_cell(&spec, &als.exact, &als.h_pgd)? {
                        let ratio = e.approx_ratio.map(|r| r.to_string()).unwrap_or_default();
                        writeln!(
                            per_column,
                            "{rho},{k},{rep},{},{},{},{},{ratio},{}",
                            e.column, e.objective_method, e.objective_opt, e.hamming, e.optimal_flag
                        )
                        .expect("String write");
                        all.push(e);
                    }
                }
                let s = summarize_evals(&all);
                writeln!(
                    summary,
                    "{rho},{k},{m},{},{},{},{},{},{},{}",
                    all.len(),
                    s.hamming.mean,
                    s.hamming.std_error,
                    s.approx_ratio.mean,
                    s.approx_ratio.std_error,
                    s.zero_optimum_columns,
                    s.unproven_columns
                )
                .expect("String write");
            }
        }
        Ok(())
    })??;
    write_atomically(
        out,
        &[
            (PathBuf::from("accuracy.csv"), summary.clone()),
            (PathBuf::from("accuracy_columns.csv"), per_column),
        ],
    )?;
    Ok(summary)
}

/// Solves a QUBO text file and returns the JSON report.
pub fn cmd_solve_qubo(
    path: &Path,
    kind: SolverKind,
    settings: &Settings,
    initial: Option<&str>,
) -> Result<Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| NbmfError::Config(format!("cannot read {}: {e}", path.display())))?;
    let q = QuboInstance::parse_text(&text)?;
    let als = als_config(settings, 1)?;
    let seed = RngSpec::new(settings.parsed_or("seed", 0)?, 0);
    let initial = initial
        .map(|s| {
            let b = BinaryVector::parse(s).map_err(|e| NbmfError::Config(e.to_string()))?;
            if b.len() != q.size() {
                return Err(NbmfError::Config(format!(
                    "initial state has {} bits, instance has {} variables",
                    b.len(),
                    q.size()
                )));
            }
            Ok(b)
        })
        .transpose()?;
    let report = match kind {
        SolverKind::Exact => solve_exact(&q, &als.exact)?,
        SolverKind::Fa => solve_fa(&q, &als.fa, seed)?,
        SolverKind::Ra => {
            let init = initial.ok_or_else(|| NbmfError::Config("RA needs --initial".into()))?;
            solve_ra(&q, &init, &als.ra, seed)?
        }
        SolverKind::RaFa => {
            let fa = solve_fa(&q, &als.fa, seed.child(1))?;
            let mut r = solve_ra(&q, &fa.best_state, &als.ra, seed.child(2))?;
            r.solver = SolverKind::RaFa;
            r.samples_evaluated += fa.samples_evaluated;
            r.wall_time += fa.wall_time;
            r
        }
        SolverKind::PgdRound | SolverKind::RaPgd => {
            return Err(NbmfError::Config(format!(
                "{kind} needs the basis matrix and data column, not a bare QUBO"
            )))
        }
    };
    Ok(json!({
        "solver": report.solver.label(),
        "assignment": report.best_state.to_bit_string(),
        "energy": report.best_energy,
        "objective": report.best_objective,
        "wall_time": report.wall_time,
        "samples_evaluated": report.samples_evaluated,
        "optimal": report.optimal,
    }))
}

/// Mean and standard error of the final errors of each method, across runs.
pub fn final_error_summary(runs: &[FactorizeRun]) -> Vec<(SolverKind, crate::metrics::Summary)> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    first
        .runs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let finals: Vec<f64> = runs
                .iter()
                .map(|run| run.runs[i].states.last().expect("states").error)
                .collect();
            (r.method, summarize(&finals))
        })
        .collect()
}

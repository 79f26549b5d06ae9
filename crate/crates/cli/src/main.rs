use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nbmf_core::anneal::SolverKind;
use nbmf_core::eval::{
    calibration_csv, cmd_accuracy, cmd_calibrate, cmd_factorize, cmd_gen_synth, cmd_solve_qubo, exit_code,
    final_error_summary, is_known_key, RunConfig, Settings,
};
use nbmf_core::NbmfError;

const DEFAULT_DISTANCES: &str = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1";

/// Nonnegative/binary matrix factorization experiments.
///
/// Any configuration key can also be given as a flag, e.g. `--als.max_iterations 30`.
#[derive(Parser, Debug)]
#[command(name = "nbmf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: NBMF_THREADS or all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run ALS for every configured method and write reports.
    Factorize(Common),
    /// Generate a synthetic dataset (V, W, H and a manifest).
    GenSynth(Common),
    /// Measure RA escape and improvement rates over reversal distances.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated distances in [0, 1].
        #[arg(long)]
        distances: Option<String>,
    },
    /// Solve a QUBO text file and print a JSON report.
    SolveQubo {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
        /// exact, fa, ra or ra+fa.
        #[arg(long, default_value = "exact")]
        kind: String,
        /// Initial bit string for reverse annealing, e.g. 0110.
        #[arg(long)]
        initial: Option<String>,
    },
    /// Rounded-relaxation accuracy against the exact optimum on synthetic data.
    Accuracy(Common),
}

/// Pulls `--section.key value` and `--section.key=value` overrides out of the argument list.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Settings), NbmfError> {
    let reserved = ["seed", "threads", "config", "out"];
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Settings::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (key, inline) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if reserved.contains(&key.as_str()) || !is_known_key(&key) {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .ok_or_else(|| NbmfError::Config(format!("--{key} needs a value")))?,
        };
        overrides.set(&key, &value)?;
    }
    Ok((rest, overrides))
}

fn settings(common: &Common, overrides: &Settings) -> Result<Settings, NbmfError> {
    let mut s = match &common.config {
        Some(path) => Settings::read(path)?,
        None => Settings::new(),
    };
    s.merge(overrides)?;
    if let Some(seed) = common.seed {
        s.set("seed", &seed.to_string())?;
    }
    if let Some(out) = &common.out {
        s.set("output_dir", &out.to_string_lossy())?;
    }
    if let Some(t) = common.threads {
        s.set("threads", &t.to_string())?;
    }
    Ok(s)
}

fn run(cli: Cli, overrides: Settings) -> Result<(), NbmfError> {
    match cli.command {
        Command::Factorize(common) => {
            let config = RunConfig::from_settings(&settings(&common, &overrides)?)?;
            let run = cmd_factorize(&config)?;
            for w in &run.warnings {
                eprintln!("warning: {w}");
            }
            for (method, s) in final_error_summary(std::slice::from_ref(&run)) {
                println!("{method}: final error {}", s.mean);
            }
            println!("reports written to {}", config.output_dir.display());
        }
        Command::GenSynth(common) => {
            let s = settings(&common, &overrides)?;
            let out = PathBuf::from(s.get("output_dir").unwrap_or("synthetic"));
            let spec = cmd_gen_synth(&s, &out)?;
            println!("V is {}x{}; files written to {}", spec.m()?, spec.n, out.display());
        }
        Command::Calibrate { common, distances } => {
            let s = settings(&common, &overrides)?;
            let list = distances
                .or_else(|| s.get("calibrate.distances").map(str::to_string))
                .unwrap_or_else(|| DEFAULT_DISTANCES.to_string());
            let mut parsed = Settings::new();
            parsed.set("calibrate.distances", &list)?;
            let distances: Vec<f64> = parsed.list("calibrate.distances")?.unwrap_or_default();
            let config = RunConfig::from_settings(&s)?;
            let result = cmd_calibrate(&config, &distances)?;
            print!("{}", calibration_csv(&result));
            println!("recommended reversal distance: {}", result.recommended);
        }
        Command::SolveQubo {
            file,
            common,
            kind,
            initial,
        } => {
            let s = settings(&common, &overrides)?;
            let kind: SolverKind = kind.parse()?;
            let report = cmd_solve_qubo(&file, kind, &s, initial.as_deref())?;
            println!("{report}");
        }
        Command::Accuracy(common) => {
            let s = settings(&common, &overrides)?;
            let out = PathBuf::from(s.get("output_dir").unwrap_or("accuracy"));
            let threads = s.parsed("threads")?;
            print!("{}", cmd_accuracy(&s, &out, threads)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let (rest, overrides) = match split_overrides(args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(rest);
    match run(cli, overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

//! Flat `key = value` run configuration.
//!
//! Lines are `section.key = value`; blank lines and `#` comments are ignored.
//! Later assignments override earlier ones, so a preset can be refined by a
//! file and then by command-line overrides of the same key names.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::als::AlsConfig;
use crate::anneal::SolverKind;
use crate::datagen::SyntheticSpec;
use crate::error::{NbmfError, Result};

/// Ordered key/value settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

const KEYS: &[&str] = &[
    "preset",
    "seed",
    "threads",
    "output_dir",
    "methods",
    "dataset.kind",
    "dataset.path",
    "dataset.side",
    "synth.n",
    "synth.k",
    "synth.rho",
    "synth.theta",
    "synth.seed",
    "als.rank",
    "als.max_iterations",
    "als.rel_tol",
    "als.seed",
    "w_pgd.max_iters",
    "w_pgd.tol",
    "w_pgd.beta",
    "w_pgd.sigma",
    "h_pgd.max_iters",
    "h_pgd.tol",
    "h_pgd.beta",
    "h_pgd.sigma",
    "exact.time_limit",
    "exact.exhaustive_max",
    "exact.max_size",
    "fa.sweeps",
    "fa.reads",
    "fa.temp_max",
    "fa.temp_min",
    "ra.sweeps",
    "ra.reads",
    "ra.distance",
    "ra.pause_fraction",
    "ra.temp_max",
    "ra.temp_min",
    "emit.trajectory",
    "emit.hamming",
    "emit.histograms",
    "emit.histogram_bins",
    "emit.qubo_dumps",
    "emit.timing",
    "calibrate.distances",
    "calibrate.method",
    "calibrate.warmup_iterations",
    "sweep.n",
    "sweep.k",
    "sweep.rho",
    "sweep.seeds",
];

pub fn is_known_key(key: &str) -> bool {
    KEYS.contains(&key)
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| NbmfError::Parse {
                line: idx + 1,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            s.set(key.trim(), value.trim()).map_err(|e| NbmfError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        }
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NbmfError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets a key; `preset` expands immediately underneath the current values.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !is_known_key(key) {
            return Err(NbmfError::Config(format!("unknown configuration key '{key}'")));
        }
        if key == "preset" {
            let mut base = preset(value)?;
            base.0.extend(std::mem::take(&mut self.0));
            self.0 = base.0;
        }
        self.0.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn merge(&mut self, other: &Settings) -> Result<()> {
        if let Some(p) = other.get("preset") {
            self.set("preset", p)?;
        }
        for (k, v) in &other.0 {
            if k != "preset" {
                self.0.insert(k.clone(), v.clone());
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| NbmfError::Config(format!("bad value '{v}' for {key}: {e}")))
            })
            .transpose()
    }

    pub fn parsed_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<T>()
                            .map_err(|e| NbmfError::Config(format!("bad entry '{s}' in {key}: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Canonical text form, one `key = value` per line in key order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.0 {
            writeln!(out, "{k} = {v}").expect("writing to a String");
        }
        out
    }
}

/// Built-in experiment presets.
pub fn preset(name: &str) -> Result<Settings> {
    let pairs: &[(&str, &str)] = match name {
        "paper-faces" => &[
            ("dataset.kind", "images"),
            ("dataset.side", "19"),
            ("als.rank", "35"),
            ("als.max_iterations", "20"),
            ("methods", "Exact,PGD,FA,RA,RA+FA,RA+PGD"),
        ],
        "paper-synthetic" => &[
            ("dataset.kind", "synthetic"),
            ("synth.n", "110"),
            ("sweep.n", "110"),
            ("sweep.k", "10,20,30,40"),
            ("sweep.rho", "0.5,1,2,10"),
            ("exact.time_limit", "60"),
        ],
        other => return Err(NbmfError::Config(format!("unknown preset '{other}'"))),
    };
    Ok(Settings(
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Csv(PathBuf),
    Images { dir: PathBuf, side: usize },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmitFlags {
    pub trajectory: bool,
    pub hamming: bool,
    pub histograms: bool,
    pub histogram_bins: usize,
    pub qubo_dumps: bool,
    /// Adds a wall-clock column to the trajectory; breaks byte-for-byte reruns.
    pub timing: bool,
}

/// Fully resolved configuration of a factorization run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub als: AlsConfig,
    pub methods: Vec<SolverKind>,
    pub output_dir: PathBuf,
    pub emit: EmitFlags,
    pub threads: Option<usize>,
    pub settings: Settings,
}

fn seed_of(s: &Settings, key: &str) -> Result<u64> {
    match s.parsed::<u64>(key)? {
        Some(v) => Ok(v),
        None => s.parsed_or("seed", 0),
    }
}

pub(crate) fn synthetic_spec(s: &Settings) -> Result<SyntheticSpec> {
    let n = s
        .parsed::<usize>("synth.n")?
        .ok_or_else(|| NbmfError::Config("synth.n is required".into()))?;
    let k = s
        .parsed::<usize>("synth.k")?
        .ok_or_else(|| NbmfError::Config("synth.k is required".into()))?;
    let spec = SyntheticSpec {
        n,
        k,
        rho: s.parsed_or("synth.rho", 1.0)?,
        theta: s.parsed_or("synth.theta", 1.0)?,
        seed: seed_of(s, "synth.seed")?,
    };
    spec.validate()?;
    Ok(spec)
}

fn dataset(s: &Settings) -> Result<DatasetSource> {
    let path = || {
        s.get("dataset.path")
            .map(PathBuf::from)
            .ok_or_else(|| NbmfError::Config("dataset.path is required".into()))
    };
    match s.get("dataset.kind").unwrap_or("synthetic") {
        "csv" => Ok(DatasetSource::Csv(path()?)),
        "images" => Ok(DatasetSource::Images {
            dir: path()?,
            side: s.parsed_or("dataset.side", 19)?,
        }),
        "synthetic" => Ok(DatasetSource::Synthetic(synthetic_spec(s)?)),
        other => Err(NbmfError::Config(format!("unknown dataset.kind '{other}'"))),
    }
}

pub(crate) fn als_config(s: &Settings, rank: usize) -> Result<AlsConfig> {
    let mut c = AlsConfig::new(rank, SolverKind::Exact);
    c.max_iterations = s.parsed_or("als.max_iterations", c.max_iterations)?;
    c.rel_tol = s.parsed_or("als.rel_tol", c.rel_tol)?;
    c.seed = seed_of(s, "als.seed")?;
    for (prefix, pgd) in [("w_pgd", &mut c.w_pgd), ("h_pgd", &mut c.h_pgd)] {
        pgd.max_iters = s.parsed_or(&format!("{prefix}.max_iters"), pgd.max_iters)?;
        pgd.tol = s.parsed_or(&format!("{prefix}.tol"), pgd.tol)?;
        pgd.beta = s.parsed_or(&format!("{prefix}.beta"), pgd.beta)?;
        pgd.sigma = s.parsed_or(&format!("{prefix}.sigma"), pgd.sigma)?;
    }
    c.exact.time_limit = s.parsed_or("exact.time_limit", c.exact.time_limit)?;
    c.exact.exhaustive_max = s.parsed_or("exact.exhaustive_max", c.exact.exhaustive_max)?;
    c.exact.max_size = s.parsed_or("exact.max_size", c.exact.max_size)?;
    for (prefix, sched) in [("fa", &mut c.fa), ("ra", &mut c.ra)] {
        sched.sweeps_total = s.parsed_or(&format!("{prefix}.sweeps"), sched.sweeps_total)?;
        sched.reads = s.parsed_or(&format!("{prefix}.reads"), sched.reads)?;
        if let Some(t) = s.parsed(&format!("{prefix}.temp_max"))? {
            sched.temp_max = Some(t);
        }
        if let Some(t) = s.parsed(&format!("{prefix}.temp_min"))? {
            sched.temp_min = Some(t);
        }
    }
    c.ra.reversal_distance = s.parsed_or("ra.distance", c.ra.reversal_distance)?;
    c.ra.pause_fraction = s.parsed_or("ra.pause_fraction", c.ra.pause_fraction)?;
    c.w_pgd.validate().map_err(as_config)?;
    c.h_pgd.validate().map_err(as_config)?;
    c.fa.validate().map_err(as_config)?;
    c.ra.validate().map_err(as_config)?;
    if !(c.exact.time_limit >= 0.0) {
        return Err(NbmfError::Config("exact.time_limit must be >= 0".into()));
    }
    Ok(c)
}

fn as_config(e: NbmfError) -> NbmfError {
    match e {
        NbmfError::Parameter(m) => NbmfError::Config(m),
        other => other,
    }
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let dataset = dataset(s)?;
        let rank = match (s.parsed::<usize>("als.rank")?, &dataset) {
            (Some(k), _) => k,
            (None, DatasetSource::Synthetic(spec)) => spec.k,
            (None, _) => return Err(NbmfError::Config("als.rank is required".into())),
        };
        let methods: Vec<SolverKind> = s
            .list("methods")?
            .unwrap_or_else(|| vec![SolverKind::Exact, SolverKind::PgdRound]);
        if methods.is_empty() {
            return Err(NbmfError::Config("at least one method is required".into()));
        }
        let emit = EmitFlags {
            trajectory: s.parsed_or("emit.trajectory", true)?,
            hamming: s.parsed_or("emit.hamming", false)?,
            histograms: s.parsed_or("emit.histograms", false)?,
            histogram_bins: s.parsed_or("emit.histogram_bins", 20)?,
            qubo_dumps: s.parsed_or("emit.qubo_dumps", false)?,
            timing: s.parsed_or("emit.timing", false)?,
        };
        if emit.histogram_bins == 0 {
            return Err(NbmfError::Config("emit.histogram_bins must be positive".into()));
        }
        Ok(Self {
            dataset,
            als: als_config(s, rank)?,
            methods,
            output_dir: PathBuf::from(s.get("output_dir").unwrap_or("nbmf-out")),
            emit,
            threads: s.parsed("threads")?,
            settings: s.clone(),
        })
    }
}

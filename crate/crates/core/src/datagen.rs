//! Synthetic NBMF datasets with a controllable relaxed-solution contrast,
//! and ingestion of grayscale image directories.

use std::fs;
use std::path::{Path, PathBuf};

use image::DynamicImage;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{NbmfError, Result};
use crate::model::{Matrix, NonnegMatrix, RngSpec};

const A_TAG: u64 = 0xa;
const PLACE_TAG: u64 = 0xb;
const W_TAG: u64 = 0xc;

/// Parameters of a synthetic dataset. `m` is derived from `n` and `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub k: usize,
    pub rho: f64,
    pub theta: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n: usize, k: usize, rho: f64, seed: u64) -> Self {
        Self {
            n,
            k,
            rho,
            theta: 1.0,
            seed,
        }
    }

    /// `round(2nk / (n - 2k))`.
    pub fn m(&self) -> Result<usize> {
        if self.k == 0 || self.n <= 2 * self.k {
            return Err(NbmfError::Config(format!(
                "synthetic sizing needs n > 2k > 0, got n = {}, k = {}",
                self.n, self.k
            )));
        }
        let m = (2 * self.n * self.k) as f64 / (self.n - 2 * self.k) as f64;
        Ok(m.round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m()?;
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(NbmfError::Parameter(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(NbmfError::Parameter(format!("theta must be positive, got {}", self.theta)));
        }
        assert!(
            self.k * (self.n + m) < self.n * m,
            "sizing rule violated the overfit guard for n = {}, k = {}",
            self.n,
            self.k
        );
        Ok(())
    }
}

/// `count` i.i.d. draws from Gamma(shape `rho`, scale `theta`).
pub fn sample_gamma(rho: f64, theta: f64, count: usize, rng: RngSpec) -> Result<Vec<f64>> {
    if !(rho > 0.0 && rho.is_finite() && theta > 0.0 && theta.is_finite()) {
        return Err(NbmfError::Parameter(format!(
            "gamma parameters must be positive, got shape {rho}, scale {theta}"
        )));
    }
    let dist = Gamma::new(rho, theta).map_err(|e| NbmfError::Parameter(e.to_string()))?;
    let mut rng = rng.rng();
    Ok((0..count).map(|_| dist.sample(&mut rng)).collect())
}

/// Relaxed coefficient matrix plus, per cell (row-major), whether its value
/// came from the flipped pool `1 - A[..nk/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticH {
    pub h: NonnegMatrix,
    pub from_flipped: Vec<bool>,
}

/// Draws `nk` gamma values, normalizes by the maximum, flips the first half
/// to `1 - a` and scatters the combined pool over a random permutation of cells.
pub fn generate_h(spec: &SyntheticSpec) -> Result<SyntheticH> {
    spec.validate()?;
    let base = RngSpec::new(spec.seed, 0);
    let nk = spec.n * spec.k;
    let mut a = sample_gamma(spec.rho, spec.theta, nk, base.child(A_TAG))?;
    let max = a.iter().copied().fold(0.0_f64, f64::max);
    if !(max > 0.0) {
        return Err(NbmfError::Numeric("all gamma samples are zero".into()));
    }
    for x in &mut a {
        *x /= max;
    }
    let half = nk / 2;
    let mut pool: Vec<(f64, bool)> = a
        .iter()
        .enumerate()
        .map(|(i, &x)| if i < half { (1.0 - x, true) } else { (x, false) })
        .collect();
    pool.shuffle(&mut base.child(PLACE_TAG).rng());
    let (values, from_flipped): (Vec<f64>, Vec<bool>) = pool.into_iter().unzip();
    Ok(SyntheticH {
        h: NonnegMatrix::new(spec.k, spec.n, values)?,
        from_flipped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub v: NonnegMatrix,
    pub w_true: NonnegMatrix,
    pub h_true: NonnegMatrix,
}

/// `V = W_true H_true` with `W_true ~ Gamma(1, 1)` of size `m x k`.
pub fn generate_dataset(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    let m = spec.m()?;
    let h_true = generate_h(spec)?.h;
    let w = sample_gamma(1.0, 1.0, m * spec.k, RngSpec::new(spec.seed, 0).child(W_TAG))?;
    let w_true = NonnegMatrix::new(m, spec.k, w)?;
    let v = NonnegMatrix::try_from(w_true.as_matrix().matmul(h_true.as_matrix())?)?;
    Ok(SyntheticDataset { v, w_true, h_true })
}

fn ingestion(path: &Path, message: impl Into<String>) -> NbmfError {
    NbmfError::Ingestion {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn pgm_pixels(path: &Path) -> Result<(u32, u32, Vec<f64>)> {
    let img = image::ImageReader::open(path)
        .map_err(|e| ingestion(path, e.to_string()))?
        .with_guessed_format()
        .map_err(|e| ingestion(path, e.to_string()))?
        .decode()
        .map_err(|e| ingestion(path, e.to_string()))?;
    let (w, h) = (img.width(), img.height());
    let pixels = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(|p| f64::from(p) / 255.0).collect(),
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(|p| f64::from(p) / 65535.0).collect(),
        other => return Err(ingestion(path, format!("not a grayscale image ({:?})", other.color()))),
    };
    Ok((w, h, pixels))
}

/// Loads every `.pgm` file in `dir` (lexicographic order) as one column.
pub fn load_images(dir: &Path, side: usize) -> Result<NonnegMatrix> {
    let entries = fs::read_dir(dir).map_err(|e| ingestion(dir, e.to_string()))?;
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| ingestion(dir, e.to_string()))?.path();
        let is_pgm = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
        if path.is_file() && is_pgm {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(ingestion(dir, "no .pgm images found"));
    }
    let rows = side * side;
    let mut columns = Vec::with_capacity(files.len());
    for path in &files {
        let (w, h, pixels) = pgm_pixels(path)?;
        if w as usize != side || h as usize != side {
            return Err(ingestion(path, format!("image is {w}x{h}, expected {side}x{side}")));
        }
        columns.push(pixels);
    }
    let m = Matrix::from_fn(rows, columns.len(), |i, j| columns[j][i]);
    NonnegMatrix::try_from(m)
}

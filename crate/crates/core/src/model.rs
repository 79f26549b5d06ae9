//! Dense matrix types, binary coefficient containers and seeded RNG streams.
//!
//! Everything is stored row-major in `f64`. Validated wrappers
//! ([`NonnegMatrix`], [`BinaryMatrix`], [`BinaryVector`], [`BoxVector`])
//! enforce their element invariants at construction and are immutable
//! afterwards; mutation happens by building a replacement.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NbmfError, Result};

/// Read access shared by every dense matrix-like container.
pub trait DenseView {
    fn shape(&self) -> (usize, usize);
    fn at(&self, row: usize, col: usize) -> f64;
}

/// Unconstrained dense real matrix (gradients, products, intermediate results).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(NbmfError::dims(
                "matrix construction",
                format!("{rows}x{cols} needs {} values, got {}", rows * cols, data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(NbmfError::dims(
                    "matrix construction",
                    format!("row {i} has {} entries, expected {c}", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Self::new(r, c, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(NbmfError::dims(
                "matmul",
                format!("{}x{} * {}x{}", self.rows, self.cols, other.rows, other.cols),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for p in 0..self.cols {
                let a = self.data[i * self.cols + p];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[p * other.cols..(p + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ * other`.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(NbmfError::dims(
                "transposed matmul",
                format!("({}x{})ᵀ * {}x{}", self.rows, self.cols, other.rows, other.cols),
            ));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for p in 0..self.rows {
            let a_row = self.row(p);
            let b_row = other.row(p);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * otherᵀ`.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(NbmfError::dims(
                "matmul with transpose",
                format!("{}x{} * ({}x{})ᵀ", self.rows, self.cols, other.rows, other.cols),
            ));
        }
        Ok(Matrix::from_fn(self.rows, other.rows, |i, j| dot(self.row(i), other.row(j))))
    }

    /// `self * x` for a vector `x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(NbmfError::dims(
                "matrix-vector product",
                format!("{}x{} * vector of length {}", self.rows, self.cols, x.len()),
            ));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `selfᵀ * x` for a vector `x`.
    pub fn t_mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(NbmfError::dims(
                "transposed matrix-vector product",
                format!("({}x{})ᵀ * vector of length {}", self.rows, self.cols, x.len()),
            ));
        }
        let mut out = vec![0.0; self.cols];
        for (p, &xp) in x.iter().enumerate() {
            if xp == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(p)) {
                *o += a * xp;
            }
        }
        Ok(out)
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl DenseView for Matrix {
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn at(&self, row: usize, col: usize) -> f64 {
        self.get(row, col)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense matrix whose entries are all finite and nonnegative (data `V`, basis `W`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct NonnegMatrix(Matrix);

impl NonnegMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::try_from(Matrix::new(rows, cols, data)?)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::try_from(Matrix::from_rows(rows)?)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(Matrix::zeros(rows, cols))
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.rows
    }

    pub fn cols(&self) -> usize {
        self.0.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0.get(row, col)
    }

    pub fn data(&self) -> &[f64] {
        &self.0.data
    }
}

impl TryFrom<Matrix> for NonnegMatrix {
    type Error = NbmfError;

    fn try_from(m: Matrix) -> Result<Self> {
        if let Some((idx, v)) = m
            .data
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(NbmfError::InvalidValue(format!(
                "entry ({}, {}) = {v} is not a finite nonnegative number",
                idx / m.cols.max(1),
                idx % m.cols.max(1)
            )));
        }
        Ok(Self(m))
    }
}

impl From<NonnegMatrix> for Matrix {
    fn from(m: NonnegMatrix) -> Self {
        m.0
    }
}

impl DenseView for NonnegMatrix {
    fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    fn at(&self, row: usize, col: usize) -> f64 {
        self.0.get(row, col)
    }
}

/// `{0,1}`-valued vector; one column of the coefficient matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryVector(Vec<u8>);

impl BinaryVector {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|b| **b > 1) {
            return Err(NbmfError::InvalidValue(format!("binary entry {b} is not 0 or 1")));
        }
        Ok(Self(bits))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        Self(bits.into_iter().map(u8::from).collect())
    }

    /// Parses a string of `0`/`1` characters, e.g. `"101"`.
    pub fn parse(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(NbmfError::InvalidValue(format!(
                    "'{other}' is not a binary digit"
                ))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(Self)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| f64::from(b)).collect()
    }

    pub fn complement(&self) -> Self {
        Self(self.0.iter().map(|b| 1 - b).collect())
    }

    /// Bit string with `h_0` first.
    pub fn to_bit_string(&self) -> String {
        self.0.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect()
    }
}

/// `{0,1}`-valued `k x n` coefficient matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl BinaryMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(NbmfError::dims(
                "binary matrix construction",
                format!("{rows}x{cols} needs {} values, got {}", rows * cols, data.len()),
            ));
        }
        if let Some(b) = data.iter().find(|b| **b > 1) {
            return Err(NbmfError::InvalidValue(format!("binary entry {b} is not 0 or 1")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    /// Assembles a matrix from its columns.
    pub fn from_columns(rows: usize, columns: &[BinaryVector]) -> Result<Self> {
        let mut out = Self::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(NbmfError::dims(
                    "binary matrix from columns",
                    format!("column {j} has length {}, expected {rows}", col.len()),
                ));
            }
            for (i, &b) in col.bits().iter().enumerate() {
                out.data[i * out.cols + j] = b;
            }
        }
        Ok(out)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.cols + col]
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Result<BinaryVector> {
        if j >= self.cols {
            return Err(NbmfError::Index {
                index: j,
                len: self.cols,
            });
        }
        Ok(BinaryVector((0..self.rows).map(|i| self.get(i, j)).collect()))
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&b| f64::from(b)).collect(),
        }
    }

    /// True when row `i` (one feature across all data points) is entirely zero.
    pub fn row_is_zero(&self, i: usize) -> bool {
        self.data[i * self.cols..(i + 1) * self.cols].iter().all(|&b| b == 0)
    }
}

impl DenseView for BinaryMatrix {
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn at(&self, row: usize, col: usize) -> f64 {
        f64::from(self.get(row, col))
    }
}

/// Real vector constrained to the box `lower <= x <= upper` (upper may be `+inf`).
#[derive(Debug, Clone, PartialEq)]
pub struct BoxVector {
    data: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxVector {
    pub fn new(data: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if data.len() != lower.len() || data.len() != upper.len() {
            return Err(NbmfError::dims(
                "box vector",
                format!(
                    "data {} / lower {} / upper {}",
                    data.len(),
                    lower.len(),
                    upper.len()
                ),
            ));
        }
        for i in 0..data.len() {
            if !(lower[i] <= upper[i]) {
                return Err(NbmfError::InvalidValue(format!(
                    "bound {i}: lower {} exceeds upper {}",
                    lower[i], upper[i]
                )));
            }
            if !(lower[i] <= data[i] && data[i] <= upper[i]) {
                return Err(NbmfError::Infeasible(format!(
                    "coordinate {i} = {} outside [{}, {}]",
                    data[i], lower[i], upper[i]
                )));
            }
        }
        Ok(Self { data, lower, upper })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// Identifies one reproducible random stream.
///
/// Streams are ChaCha8 keyed by `master_seed` with `stream_id` selecting the
/// independent keystream, so a column solved on any worker thread draws the
/// same numbers as it would sequentially.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Same stream id, master seed mixed with `tag`.
    pub fn child(&self, tag: u64) -> Self {
        Self {
            master_seed: splitmix64(self.master_seed ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d))),
            stream_id: self.stream_id,
        }
    }

    pub fn with_stream(&self, stream_id: u64) -> Self {
        Self {
            master_seed: self.master_seed,
            stream_id,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Squared Frobenius reconstruction error `||V - WH||_F²`.
pub fn frobenius_error<V, W, H>(v: &V, w: &W, h: &H) -> Result<f64>
where
    V: DenseView + ?Sized,
    W: DenseView + ?Sized,
    H: DenseView + ?Sized,
{
    let (m, n) = v.shape();
    let (wm, k) = w.shape();
    let (hk, hn) = h.shape();
    if wm != m || hk != k || hn != n {
        return Err(NbmfError::dims(
            "frobenius_error",
            format!("V is {m}x{n}, W is {wm}x{k}, H is {hk}x{hn}"),
        ));
    }
    let mut total = 0.0;
    let mut wh_row = vec![0.0; n];
    for i in 0..m {
        wh_row.iter_mut().for_each(|x| *x = 0.0);
        for p in 0..k {
            let wip = w.at(i, p);
            if wip == 0.0 {
                continue;
            }
            for (j, acc) in wh_row.iter_mut().enumerate() {
                *acc += wip * h.at(p, j);
            }
        }
        for (j, wh) in wh_row.iter().enumerate() {
            let r = v.at(i, j) - wh;
            total += r * r;
        }
    }
    Ok(total)
}

/// Copy of column `j`.
pub fn column<M: DenseView + ?Sized>(m: &M, j: usize) -> Result<Vec<f64>> {
    let (rows, cols) = m.shape();
    if j >= cols {
        return Err(NbmfError::Index { index: j, len: cols });
    }
    Ok((0..rows).map(|i| m.at(i, j)).collect())
}

/// `||v - W h||²` for one column.
pub fn column_error(w: &Matrix, v: &[f64], h: &[f64]) -> Result<f64> {
    if v.len() != w.rows() {
        return Err(NbmfError::dims(
            "column_error",
            format!("W has {} rows, v has length {}", w.rows(), v.len()),
        ));
    }
    let wh = w.mul_vec(h)?;
    Ok(v.iter().zip(&wh).map(|(a, b)| (a - b) * (a - b)).sum())
}

//! QUBO encodings of the binary least-squares column subproblem.
//!
//! For a fixed basis `W` and data column `v`,
//! `||v - Wh||² = hᵀ(WᵀW)h - 2(Wᵀv)ᵀh + vᵀv`, and since `h_i² = h_i` on
//! binary vectors the linear term folds onto the diagonal:
//! `Q = WᵀW - 2·diag(Wᵀv)`, with `vᵀv` kept as an explicit offset.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{NbmfError, Result};
use crate::model::{dot, BinaryVector, Matrix, NonnegMatrix};

/// Symmetric QUBO matrix plus the constant that turns energies into objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboInstance {
    q: Matrix,
    offset: f64,
}

impl QuboInstance {
    /// Wraps a full symmetric matrix.
    pub fn new(q: Matrix, offset: f64) -> Result<Self> {
        let n = q.rows();
        if q.cols() != n || n == 0 {
            return Err(NbmfError::dims(
                "QUBO matrix",
                format!("expected a non-empty square matrix, got {}x{}", q.rows(), q.cols()),
            ));
        }
        if !q.is_finite() || !offset.is_finite() {
            return Err(NbmfError::Numeric("QUBO coefficients must be finite".into()));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if q.get(i, j) != q.get(j, i) {
                    return Err(NbmfError::InvalidValue(format!(
                        "QUBO matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { q, offset })
    }

    /// Builds the symmetric form from upper-triangular polynomial coefficients:
    /// `terms` holds `(i, j, c)` meaning `c·x_i·x_j` (`i == j` is linear).
    pub fn from_terms(size: usize, terms: &[(usize, usize, f64)], offset: f64) -> Result<Self> {
        let mut q = Matrix::zeros(size, size);
        for &(i, j, c) in terms {
            if i >= size || j >= size {
                return Err(NbmfError::Index {
                    index: i.max(j),
                    len: size,
                });
            }
            if i == j {
                q.set(i, i, q.get(i, i) + c);
            } else {
                let half = 0.5 * c;
                q.set(i, j, q.get(i, j) + half);
                q.set(j, i, q.get(j, i) + half);
            }
        }
        Self::new(q, offset)
    }

    pub fn size(&self) -> usize {
        self.q.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.q
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `hᵀQh`, offset excluded.
    pub fn energy(&self, h: &BinaryVector) -> Result<f64> {
        if h.len() != self.size() {
            return Err(NbmfError::dims(
                "QUBO energy",
                format!("instance has {} variables, assignment has {}", self.size(), h.len()),
            ));
        }
        Ok(self.energy_bits(h.bits()))
    }

    pub(crate) fn energy_bits(&self, bits: &[u8]) -> f64 {
        let n = self.size();
        let mut total = 0.0;
        for i in 0..n {
            if bits[i] == 0 {
                continue;
            }
            let row = self.q.row(i);
            total += row[i];
            for j in (i + 1)..n {
                if bits[j] == 1 {
                    total += 2.0 * row[j];
                }
            }
        }
        total
    }

    /// Energy plus offset; the squared column error when built by [`build_qubo`].
    pub fn objective(&self, h: &BinaryVector) -> Result<f64> {
        Ok(self.energy(h)? + self.offset)
    }

    /// Largest absolute row sum of `Q`.
    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.size())
            .map(|i| self.q.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Plain-text export: header `N offset`, then `i j value` for each nonzero
    /// upper-triangular polynomial coefficient (off-diagonal values are `2·q_ij`).
    pub fn to_text(&self) -> String {
        let n = self.size();
        let mut out = format!("{} {}\n", n, self.offset);
        for i in 0..n {
            for j in i..n {
                let c = if i == j { self.q.get(i, i) } else { 2.0 * self.q.get(i, j) };
                if c != 0.0 {
                    let _ = writeln!(out, "{i} {j} {c}");
                }
            }
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output. Lower-triangular lines are
    /// accepted and folded; blank lines and `#` comments are skipped.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(NbmfError::Parse {
            line: 1,
            message: "missing header 'N offset'".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let bad_header = || NbmfError::Parse {
            line: hline,
            message: format!("header must be 'N offset', got '{header}'"),
        };
        if fields.len() != 2 {
            return Err(bad_header());
        }
        let size: usize = fields[0].parse().map_err(|_| bad_header())?;
        let offset: f64 = fields[1].parse().map_err(|_| bad_header())?;
        if size == 0 || !offset.is_finite() {
            return Err(bad_header());
        }
        let mut terms = Vec::new();
        for (line, body) in lines {
            let parts: Vec<&str> = body.split_whitespace().collect();
            let bad = |message: String| NbmfError::Parse { line, message };
            if parts.len() != 3 {
                return Err(bad(format!("expected 'i j value', got '{body}'")));
            }
            let i: usize = parts[0].parse().map_err(|_| bad(format!("bad index '{}'", parts[0])))?;
            let j: usize = parts[1].parse().map_err(|_| bad(format!("bad index '{}'", parts[1])))?;
            let c: f64 = parts[2].parse().map_err(|_| bad(format!("bad value '{}'", parts[2])))?;
            if i >= size || j >= size {
                return Err(bad(format!("index out of range for N = {size}")));
            }
            if !c.is_finite() {
                return Err(bad(format!("non-finite value '{}'", parts[2])));
            }
            terms.push((i.min(j), i.max(j), c));
        }
        Self::from_terms(size, &terms, offset)
    }
}

/// QUBO for `min_h ||v - W h||²` over `h ∈ {0,1}^k`.
pub fn build_qubo(w: &NonnegMatrix, v: &[f64]) -> Result<QuboInstance> {
    let wm = w.as_matrix();
    if v.len() != wm.rows() {
        return Err(NbmfError::dims(
            "build_qubo",
            format!("W is {}x{}, v has length {}", wm.rows(), wm.cols(), v.len()),
        ));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(NbmfError::InvalidValue(format!(
            "data column entry {x} is not finite and nonnegative"
        )));
    }
    let mut q = wm.t_matmul(wm)?;
    let wtv = wm.t_mul_vec(v)?;
    for (i, c) in wtv.iter().enumerate() {
        q.set(i, i, q.get(i, i) - 2.0 * c);
    }
    QuboInstance::new(q, dot(v, v))
}

/// Ising form `E(σ) = -Σ_{i≠j} J_ij σ_i σ_j - Σ_i b_i σ_i + constant`, the
/// pair sum running over ordered pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingInstance {
    pub couplings: Matrix,
    pub ising_bias: Vec<f64>,
    pub constant: f64,
}

impl IsingInstance {
    pub fn size(&self) -> usize {
        self.ising_bias.len()
    }

    pub fn energy(&self, spins: &[i8]) -> Result<f64> {
        let n = self.size();
        if spins.len() != n {
            return Err(NbmfError::dims(
                "Ising energy",
                format!("instance has {n} spins, assignment has {}", spins.len()),
            ));
        }
        let mut e = self.constant;
        for i in 0..n {
            let si = f64::from(spins[i]);
            e -= self.ising_bias[i] * si;
            for j in 0..n {
                if i != j {
                    e -= self.couplings.get(i, j) * si * f64::from(spins[j]);
                }
            }
        }
        Ok(e)
    }
}

/// Spin for a binary value under `x = (1 + σ)/2`.
pub fn spin_of(bit: u8) -> i8 {
    if bit == 1 {
        1
    } else {
        -1
    }
}

/// Converts via `x_i = (1 + σ_i)/2`; energies agree exactly (offset excluded).
pub fn qubo_to_ising(q: &QuboInstance) -> IsingInstance {
    let n = q.size();
    let m = q.matrix();
    let mut couplings = Matrix::zeros(n, n);
    let mut bias = vec![0.0; n];
    let mut constant = 0.0;
    for i in 0..n {
        let qii = m.get(i, i);
        constant += 0.5 * qii;
        let mut b = 0.5 * qii;
        for j in 0..n {
            if j == i {
                continue;
            }
            let qij = m.get(i, j);
            couplings.set(i, j, -0.25 * qij);
            b += 0.5 * qij;
            constant += 0.25 * qij;
        }
        bias[i] = -b;
    }
    IsingInstance {
        couplings,
        ising_bias: bias,
        constant,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{column_error, RngSpec};
    use rand::Rng;

    fn assignments(k: usize) -> impl Iterator<Item = BinaryVector> {
        (0u32..(1 << k)).map(move |mask| BinaryVector::from_bools((0..k).map(|i| mask >> i & 1 == 1)))
    }

    fn random_nonneg(rng: &mut impl Rng, r: usize, c: usize) -> NonnegMatrix {
        NonnegMatrix::new(r, c, (0..r * c).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn identity_example() {
        let w = NonnegMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let q = build_qubo(&w, &[1.0, 0.0]).unwrap();
        assert_eq!(q.matrix().data(), &[-1.0, 0.0, 0.0, 1.0]);
        assert_eq!(q.offset(), 1.0);
        let h = BinaryVector::parse("10").unwrap();
        assert_eq!(q.energy(&h).unwrap(), -1.0);
        assert_eq!(q.objective(&h).unwrap(), 0.0);
    }

    #[test]
    fn zero_target_gives_gram() {
        let mut rng = RngSpec::new(1, 0).rng();
        let w = random_nonneg(&mut rng, 4, 3);
        let q = build_qubo(&w, &[0.0; 4]).unwrap();
        assert_eq!(q.matrix(), &w.as_matrix().t_matmul(w.as_matrix()).unwrap());
        assert_eq!(q.offset(), 0.0);
        assert_eq!(q.energy(&BinaryVector::zeros(3)).unwrap(), 0.0);
        // Gram matrix of nonnegative columns is entrywise >= 0, so h = 0 is a minimizer.
        assert!(assignments(3).all(|h| q.energy(&h).unwrap() >= 0.0));
    }

    #[test]
    fn objective_identity_exhaustive() {
        let mut rng = RngSpec::new(2, 0).rng();
        let w = random_nonneg(&mut rng, 4, 3);
        let v: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let q = build_qubo(&w, &v).unwrap();
        for h in assignments(3) {
            let direct = column_error(w.as_matrix(), &v, &h.to_f64()).unwrap();
            let via = q.objective(&h).unwrap();
            assert!((direct - via).abs() <= 1e-9 * direct.max(1e-12), "{direct} vs {via}");
        }
    }

    #[test]
    fn energy_matches_naive_loop() {
        let mut rng = RngSpec::new(3, 0).rng();
        let w = random_nonneg(&mut rng, 5, 6);
        let v: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
        let q = build_qubo(&w, &v).unwrap();
        for h in assignments(6) {
            let mut naive = 0.0;
            for i in 0..6 {
                for j in 0..6 {
                    naive += q.matrix().get(i, j) * f64::from(h.get(i)) * f64::from(h.get(j));
                }
            }
            assert!((naive - q.energy(&h).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_rejects_length_mismatch() {
        let q = QuboInstance::new(Matrix::identity(2), 0.0).unwrap();
        assert!(q.energy(&BinaryVector::zeros(3)).is_err());
    }

    #[test]
    fn build_rejects_bad_dimensions() {
        let w = NonnegMatrix::zeros(3, 2);
        assert!(build_qubo(&w, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn single_variable_ising() {
        let q = QuboInstance::new(Matrix::new(1, 1, vec![3.0]).unwrap(), 0.0).unwrap();
        let is = qubo_to_ising(&q);
        assert_eq!(is.ising_bias, vec![-1.5]);
        assert_eq!(is.constant, 1.5);
    }

    #[test]
    fn zero_matrix_ising() {
        let q = QuboInstance::new(Matrix::zeros(3, 3), 0.0).unwrap();
        let is = qubo_to_ising(&q);
        assert!(is.couplings.data().iter().all(|&x| x == 0.0));
        assert!(is.ising_bias.iter().all(|&x| x == 0.0));
        assert_eq!(is.constant, 0.0);
    }

    #[test]
    fn ising_energies_agree_three_vars() {
        let q = QuboInstance::from_terms(
            3,
            &[(0, 0, 1.5), (1, 1, -2.0), (2, 2, 0.25), (0, 1, 3.0), (1, 2, -1.0), (0, 2, 0.5)],
            0.0,
        )
        .unwrap();
        let is = qubo_to_ising(&q);
        for h in assignments(3) {
            let spins: Vec<i8> = h.bits().iter().map(|&b| spin_of(b)).collect();
            let a = q.energy(&h).unwrap();
            let b = is.energy(&spins).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        for i in 0..3 {
            assert_eq!(is.couplings.get(i, i), 0.0);
        }
    }

    #[test]
    fn text_round_trip() {
        let mut rng = RngSpec::new(4, 0).rng();
        let w = random_nonneg(&mut rng, 5, 4);
        let v: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
        let q = build_qubo(&w, &v).unwrap();
        let back = QuboInstance::parse_text(&q.to_text()).unwrap();
        for h in assignments(4) {
            let a = q.energy(&h).unwrap();
            let b = back.energy(&h).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        assert_eq!(back.offset(), q.offset());
    }

    #[test]
    fn text_header_errors_cite_line_one() {
        match QuboInstance::parse_text("two 0\n0 0 1\n") {
            Err(NbmfError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        match QuboInstance::parse_text("2 0\n0 5 1\n") {
            Err(NbmfError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(QuboInstance::new(m, 0.0).is_err());
    }
}

//! Graded symmetric-tensor polynomials.
//!
//! A polynomial `p: R^n -> R` of maximum degree `D` is stored as one
//! [`HomogeneousPart`] per degree `d = 0..=D`. Each part keeps one
//! coefficient `P_l` per *sorted* exponent `l` (a multi-index of
//! per-coordinate powers), so `p(x) = sum_l P_l x^l`. The fully symmetric
//! per-index-sequence coefficient `p_i = P_l / N_l` (with `N_l` the
//! multinomial weight) is only materialized transiently, inside rotation
//! and contraction evaluation.
//!
//! Exponents are ordered graded-lexicographically: by total degree first,
//! then descending lexicographic within a degree, e.g. for `n = 2, d = 2`:
//! `(2,0), (1,1), (0,2)`. Every flat coefficient layout in this crate
//! (vectorization, design-matrix columns, JSON output) uses this order.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest allowed `|O^T O - I|` entry for a matrix to count as orthogonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Checked binomial coefficient in wide integers.
pub(crate) fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)?;
        acc /= (i + 1) as u128;
    }
    Some(acc)
}

/// Number of exponents of degree `d` in dimension `n`: `C(n+d-1, d)`.
pub fn exponent_count(n: usize, d: usize) -> usize {
    binomial((n + d - 1) as u64, d as u64).expect("exponent count overflow") as usize
}

/// A multi-index of per-coordinate powers with its total degree cached.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Exponent {
    powers: Vec<u32>,
    degree: usize,
}

impl Exponent {
    pub fn new(powers: Vec<u32>) -> Self {
        let degree = powers.iter().map(|&p| p as usize).sum();
        Self { powers, degree }
    }

    pub fn dimension(&self) -> usize {
        self.powers.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn powers(&self) -> &[u32] {
        &self.powers
    }

    /// Monomial value `x^l = prod_i x_i^(l_i)`.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.powers
            .iter()
            .zip(x)
            .map(|(&p, &xi)| xi.powi(p as i32))
            .product()
    }

    /// Position of this exponent within `enumerate_exponents(n, degree)`.
    pub(crate) fn rank(&self) -> usize {
        let mut rank = 0usize;
        let mut remaining = self.degree;
        let n = self.powers.len();
        for (pos, &p) in self.powers.iter().enumerate() {
            let tail_dims = n - pos - 1;
            // Exponents whose entry at `pos` is larger than `p` come first.
            for k in (p as usize + 1)..=remaining {
                if tail_dims == 0 {
                    break;
                }
                rank += exponent_count(tail_dims, remaining - k);
            }
            remaining -= p as usize;
        }
        rank
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Exponent {
    /// Graded-lexicographic: lower degree first, then descending lex.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree
            .cmp(&other.degree)
            .then_with(|| other.powers.cmp(&self.powers))
    }
}

/// All exponents with `|l| = d` in dimension `n`, in graded-lex order.
pub fn enumerate_exponents(n: usize, d: usize) -> Vec<Exponent> {
    assert!(n >= 1, "dimension must be at least 1");
    let mut out = Vec::with_capacity(exponent_count(n, d));
    let mut current = vec![0u32; n];
    fill_exponents(&mut current, 0, d, &mut out);
    out
}

fn fill_exponents(current: &mut Vec<u32>, pos: usize, remaining: usize, out: &mut Vec<Exponent>) {
    if pos == current.len() - 1 {
        current[pos] = remaining as u32;
        out.push(Exponent::new(current.clone()));
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k as u32;
        fill_exponents(current, pos + 1, remaining - k, out);
    }
    current[pos] = 0;
}

/// Multinomial weight `N_l = |l|! / (l_1! ... l_n!)`, the number of index
/// sequences that sort to `l`. Errors when the value overflows `u128`.
pub fn multinomial_weight(exponent: &Exponent) -> Result<u128> {
    let mut acc: u128 = 1;
    let mut seen: u64 = 0;
    for &p in exponent.powers() {
        seen += p as u64;
        let factor = binomial(seen, p as u64).ok_or(Error::WeightOverflow {
            degree: exponent.degree(),
        })?;
        acc = acc.checked_mul(factor).ok_or(Error::WeightOverflow {
            degree: exponent.degree(),
        })?;
    }
    Ok(acc)
}

pub(crate) fn multinomial_weight_f64(exponent: &Exponent) -> f64 {
    multinomial_weight(exponent).expect("multinomial weight overflow") as f64
}

/// One homogeneous degree-`d` slice of a polynomial: the complete vector of
/// `P_l` coefficients over all exponents with `|l| = d`, in graded-lex order.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousPart {
    dimension: usize,
    degree: usize,
    coeffs: Vec<f64>,
}

impl HomogeneousPart {
    pub fn zero(dimension: usize, degree: usize) -> Self {
        Self {
            dimension,
            degree,
            coeffs: vec![0.0; exponent_count(dimension, degree)],
        }
    }

    /// Build from coefficients aligned with `enumerate_exponents(dimension, degree)`.
    pub fn from_coeffs(dimension: usize, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        let expected = exponent_count(dimension, degree);
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Self {
            dimension,
            degree,
            coeffs,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Coefficients in graded-lex exponent order.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, exponent: &Exponent) -> f64 {
        assert_eq!(exponent.dimension(), self.dimension, "exponent dimension");
        assert_eq!(exponent.degree(), self.degree, "exponent degree");
        self.coeffs[exponent.rank()]
    }

    pub fn set_coeff(&mut self, exponent: &Exponent, value: f64) {
        assert_eq!(exponent.dimension(), self.dimension, "exponent dimension");
        assert_eq!(exponent.degree(), self.degree, "exponent degree");
        self.coeffs[exponent.rank()] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (Exponent, f64)> + '_ {
        enumerate_exponents(self.dimension, self.degree)
            .into_iter()
            .zip(self.coeffs.iter().copied())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.iter().map(|(e, c)| c * e.monomial(x)).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Expand to the dense fully symmetric tensor `p_i = P_l / N_l`,
    /// flattened row-major over `degree` indices in `0..dimension`.
    pub(crate) fn dense(&self) -> Vec<f64> {
        let n = self.dimension;
        let d = self.degree;
        let size = n.pow(d as u32);
        let exponents = enumerate_exponents(n, d);
        let sym: Vec<f64> = exponents
            .iter()
            .zip(&self.coeffs)
            .map(|(e, &c)| c / multinomial_weight_f64(e))
            .collect();
        let mut out = vec![0.0; size];
        let mut powers = vec![0u32; n];
        for (flat, slot) in out.iter_mut().enumerate() {
            tuple_powers(flat, n, d, &mut powers);
            let rank = Exponent::new(powers.clone()).rank();
            *slot = sym[rank];
        }
        out
    }

    /// Collect a dense order-`d` tensor back into `P_l` form by summing all
    /// index sequences that sort to each exponent.
    pub(crate) fn from_dense(dimension: usize, degree: usize, dense: &[f64]) -> Self {
        let mut part = Self::zero(dimension, degree);
        let mut powers = vec![0u32; dimension];
        for (flat, &value) in dense.iter().enumerate() {
            tuple_powers(flat, dimension, degree, &mut powers);
            let rank = Exponent::new(powers.clone()).rank();
            part.coeffs[rank] += value;
        }
        part
    }
}

/// Decode a flat row-major index into per-coordinate occurrence counts.
fn tuple_powers(flat: usize, n: usize, d: usize, powers: &mut [u32]) {
    powers.iter_mut().for_each(|p| *p = 0);
    let mut rest = flat;
    for _ in 0..d {
        powers[rest % n] += 1;
        rest /= n;
    }
}

/// A real polynomial on `R^n` of maximum degree `D`, stored per degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "PolynomialDto", try_from = "PolynomialDto")]
pub struct Polynomial {
    dimension: usize,
    max_degree: usize,
    parts: Vec<HomogeneousPart>,
}

impl Polynomial {
    pub fn zero(dimension: usize, max_degree: usize) -> Self {
        assert!(dimension >= 1, "dimension must be at least 1");
        let parts = (0..=max_degree)
            .map(|d| HomogeneousPart::zero(dimension, d))
            .collect();
        Self {
            dimension,
            max_degree,
            parts,
        }
    }

    pub fn constant(dimension: usize, value: f64) -> Self {
        let mut p = Self::zero(dimension, 0);
        p.parts[0].coeffs[0] = value;
        p
    }

    /// Assemble from homogeneous parts; missing degrees stay zero.
    pub fn from_parts(dimension: usize, max_degree: usize, parts: Vec<HomogeneousPart>) -> Result<Self> {
        let mut poly = Self::zero(dimension, max_degree);
        for part in parts {
            if part.dimension() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    got: part.dimension(),
                });
            }
            if part.degree() > max_degree {
                return Err(Error::DegreeMismatch {
                    expected: max_degree,
                    got: part.degree(),
                });
            }
            let d = part.degree();
            poly.parts[d] = part;
        }
        Ok(poly)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn part(&self, degree: usize) -> Option<&HomogeneousPart> {
        self.parts.get(degree)
    }

    pub fn parts(&self) -> &[HomogeneousPart] {
        &self.parts
    }

    pub fn coeff(&self, exponent: &Exponent) -> f64 {
        match self.parts.get(exponent.degree()) {
            Some(part) => part.coeff(exponent),
            None => 0.0,
        }
    }

    pub fn set_coeff(&mut self, exponent: &Exponent, value: f64) -> Result<()> {
        if exponent.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: exponent.dimension(),
            });
        }
        let d = exponent.degree();
        if d > self.max_degree {
            return Err(Error::DegreeMismatch {
                expected: self.max_degree,
                got: d,
            });
        }
        self.parts[d].set_coeff(exponent, value);
        Ok(())
    }

    /// Every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Polynomial {
        let mut out = self.clone();
        for part in &mut out.parts {
            for c in &mut part.coeffs {
                *c *= factor;
            }
        }
        out
    }

    /// Standard-normal coefficients on every exponent up to `max_degree`.
    pub fn random<R: Rng + ?Sized>(dimension: usize, max_degree: usize, rng: &mut R) -> Self {
        let mut p = Self::zero(dimension, max_degree);
        for part in &mut p.parts {
            for c in &mut part.coeffs {
                *c = rng.sample(StandardNormal);
            }
        }
        p
    }

    /// `sum_l P_l x^l` over all parts.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        Ok(self.parts.iter().map(|part| part.evaluate(x)).sum())
    }

    /// The polynomial `p'` with `p'(x) = p(Ox)` for all `x`.
    ///
    /// Each homogeneous part is expanded to its dense symmetric tensor and
    /// contracted mode-by-mode with `O`, then re-collected into `P_l` form.
    pub fn apply_rotation(&self, o: &OrthogonalMatrix) -> Result<Polynomial> {
        if o.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: o.dimension(),
            });
        }
        let n = self.dimension;
        let parts = self
            .parts
            .iter()
            .map(|part| {
                let d = part.degree();
                if d == 0 || part.is_zero() {
                    return part.clone();
                }
                let mut dense = part.dense();
                for mode in 0..d {
                    dense = rotate_mode(&dense, n, d, mode, o.matrix());
                }
                HomogeneousPart::from_dense(n, d, &dense)
            })
            .collect();
        Ok(Polynomial {
            dimension: n,
            max_degree: self.max_degree,
            parts,
        })
    }

    /// The symmetric matrix `[p]` of the degree-2 part: `[p]_ii = P_(..2_i..)`,
    /// `[p]_ij = P_l / 2` off the diagonal. Zero when the part is absent.
    pub fn quadratic_matrix(&self) -> DMatrix<f64> {
        let n = self.dimension;
        let mut m = DMatrix::zeros(n, n);
        let Some(part) = self.parts.get(2) else {
            return m;
        };
        for (exponent, coeff) in part.iter() {
            let nonzero: Vec<usize> = exponent
                .powers()
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0)
                .map(|(i, _)| i)
                .collect();
            match nonzero.as_slice() {
                [i] => m[(*i, *i)] = coeff,
                [i, j] => {
                    m[(*i, *j)] = coeff / 2.0;
                    m[(*j, *i)] = coeff / 2.0;
                }
                _ => unreachable!("degree-2 exponent touches at most two coordinates"),
            }
        }
        m
    }

    /// Flat vector `(P_l / sqrt(N_l))` over all `|l| <= D` in graded-lex
    /// order, so the plain dot product of two vectorizations equals the
    /// rotation-invariant inner product.
    pub fn vectorize(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for part in &self.parts {
            for (exponent, coeff) in part.iter() {
                out.push(coeff / multinomial_weight_f64(&exponent).sqrt());
            }
        }
        out
    }

    /// `vectorize(self) . vectorize(other)`; requires identical `n` and `D`.
    pub fn frobenius_dot(&self, other: &Polynomial) -> Result<f64> {
        if other.dimension != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: other.dimension,
            });
        }
        if other.max_degree != self.max_degree {
            return Err(Error::DegreeMismatch {
                expected: self.max_degree,
                got: other.max_degree,
            });
        }
        Ok(self
            .vectorize()
            .iter()
            .zip(other.vectorize())
            .map(|(a, b)| a * b)
            .sum())
    }
}

/// Contract one mode of a dense order-`d` tensor with `O`:
/// `new[.., j, ..] = sum_a old[.., a, ..] O[a][j]`.
fn rotate_mode(data: &[f64], n: usize, d: usize, mode: usize, o: &DMatrix<f64>) -> Vec<f64> {
    let inner: usize = n.pow((d - 1 - mode) as u32);
    let outer: usize = n.pow(mode as u32);
    let mut out = vec![0.0; data.len()];
    for outer_idx in 0..outer {
        for inner_idx in 0..inner {
            let base = outer_idx * n * inner;
            for j in 0..n {
                let mut acc = 0.0;
                for a in 0..n {
                    acc += data[base + a * inner + inner_idx] * o[(a, j)];
                }
                out[base + j * inner + inner_idx] = acc;
            }
        }
    }
    out
}

/// An `n x n` real matrix verified to satisfy `|O^T O - I|_max <= 1e-10`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMatrix {
    matrix: DMatrix<f64>,
}

impl OrthogonalMatrix {
    /// Validates orthogonality; failing matrices are rejected, not repaired.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let gram = matrix.transpose() * &matrix;
        let deviation = (gram - DMatrix::identity(matrix.nrows(), matrix.ncols()))
            .iter()
            .fold(0.0f64, |m, &v| m.max(v.abs()));
        if deviation > ORTHOGONALITY_TOL {
            return Err(Error::NotOrthogonal {
                deviation,
                limit: ORTHOGONALITY_TOL,
            });
        }
        Ok(Self { matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
        }
    }

    /// Build from row slices; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Entries as row vectors.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dimension())
            .map(|i| (0..self.dimension()).map(|j| self.matrix[(i, j)]).collect())
            .collect()
    }

    /// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
    /// sign of each `R` diagonal entry folded into the corresponding column.
    pub fn random_haar<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let gauss = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = gauss.qr();
        let r = qr.r();
        let mut q = qr.q();
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                for i in 0..n {
                    q[(i, j)] = -q[(i, j)];
                }
            }
        }
        Self { matrix: q }
    }

    /// Haar sample conditioned on the sign of the determinant; flipping one
    /// column switches the connected component without losing orthogonality.
    pub fn random_with_det<R: Rng + ?Sized>(n: usize, rng: &mut R, negative: bool) -> Self {
        let mut o = Self::random_haar(n, rng);
        let det_negative = o.determinant() < 0.0;
        if det_negative != negative {
            for i in 0..n {
                o.matrix[(i, 0)] = -o.matrix[(i, 0)];
            }
        }
        o
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn determinant(&self) -> f64 {
        self.matrix.clone().lu().determinant()
    }

    /// `O x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dimension();
        assert_eq!(x.len(), n, "point dimension");
        (0..n)
            .map(|i| (0..n).map(|j| self.matrix[(i, j)] * x[j]).sum())
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct CoeffDto {
    exponent: Vec<u32>,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct PartDto {
    degree: usize,
    coeffs: Vec<CoeffDto>,
}

/// Wire form: `{"n": .., "D": .., "parts": [{"degree": d, "coeffs": [..]}]}`
/// with zero coefficients omitted on write and assumed zero on read.
#[derive(Serialize, Deserialize)]
struct PolynomialDto {
    n: usize,
    #[serde(rename = "D")]
    max_degree: usize,
    parts: Vec<PartDto>,
}

impl From<Polynomial> for PolynomialDto {
    fn from(p: Polynomial) -> Self {
        let parts = p
            .parts
            .iter()
            .filter(|part| !part.is_zero())
            .map(|part| PartDto {
                degree: part.degree(),
                coeffs: part
                    .iter()
                    .filter(|(_, v)| *v != 0.0)
                    .map(|(e, v)| CoeffDto {
                        exponent: e.powers().to_vec(),
                        value: v,
                    })
                    .collect(),
            })
            .collect();
        PolynomialDto {
            n: p.dimension,
            max_degree: p.max_degree,
            parts,
        }
    }
}

impl TryFrom<PolynomialDto> for Polynomial {
    type Error = Error;

    fn try_from(dto: PolynomialDto) -> Result<Self> {
        if dto.n < 1 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        let mut poly = Polynomial::zero(dto.n, dto.max_degree);
        let mut seen: std::collections::HashSet<Vec<u32>> = std::collections::HashSet::new();
        for part in dto.parts {
            if part.degree > dto.max_degree {
                return Err(Error::DegreeMismatch {
                    expected: dto.max_degree,
                    got: part.degree,
                });
            }
            for coeff in part.coeffs {
                let exponent = Exponent::new(coeff.exponent);
                if exponent.dimension() != dto.n {
                    return Err(Error::DimensionMismatch {
                        expected: dto.n,
                        got: exponent.dimension(),
                    });
                }
                if exponent.degree() != part.degree {
                    return Err(Error::DegreeMismatch {
                        expected: part.degree,
                        got: exponent.degree(),
                    });
                }
                if !seen.insert(exponent.powers().to_vec()) {
                    return Err(Error::InvalidConfig(format!(
                        "duplicate exponent {:?} in polynomial data",
                        exponent.powers()
                    )));
                }
                poly.set_coeff(&exponent, coeff.value)?;
            }
        }
        Ok(poly)
    }
}

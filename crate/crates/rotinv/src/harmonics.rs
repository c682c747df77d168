//! Classical harmonic baselines: cylindrical harmonics on the circle and
//! real spherical harmonics on the sphere, with their one-per-degree
//! `A_l` rotation invariants. The spherical table stops at `l = 3`; the
//! polynomial catalog is the general-purpose tool, this module exists for
//! comparison against it.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::solve_ridge_svd;

/// Highest spherical degree in the built-in table.
pub const MAX_SPHERICAL_L: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HarmonicKind {
    #[serde(rename = "cylindrical")]
    Cylindrical,
    #[serde(rename = "spherical")]
    Spherical,
}

impl HarmonicKind {
    fn name(&self) -> &'static str {
        match self {
            HarmonicKind::Cylindrical => "cylindrical",
            HarmonicKind::Spherical => "spherical",
        }
    }
}

/// Fitted harmonic coefficients, complete for `l <= max_l`.
///
/// Cylindrical coefficients are keyed `(l, +1)` for `cos(l phi)`, `(l, -1)`
/// for `sin(l phi)`, and `(0, 0)` for the constant; spherical coefficients
/// are keyed `(l, m)` with `m` in `-l..=l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ExpansionDto", try_from = "ExpansionDto")]
pub struct HarmonicExpansion {
    kind: HarmonicKind,
    max_l: usize,
    coeffs: Vec<f64>,
}

impl HarmonicExpansion {
    pub fn zero(kind: HarmonicKind, max_l: usize) -> Self {
        let len = match kind {
            HarmonicKind::Cylindrical => 2 * max_l + 1,
            HarmonicKind::Spherical => (max_l + 1) * (max_l + 1),
        };
        Self {
            kind,
            max_l,
            coeffs: vec![0.0; len],
        }
    }

    pub fn kind(&self) -> HarmonicKind {
        self.kind
    }

    pub fn max_l(&self) -> usize {
        self.max_l
    }

    fn index(&self, l: usize, m: i32) -> Option<usize> {
        if l > self.max_l {
            return None;
        }
        match self.kind {
            HarmonicKind::Cylindrical => match (l, m) {
                (0, 0) => Some(0),
                (_, 1) => Some(2 * l - 1),
                (_, -1) => Some(2 * l),
                _ => None,
            },
            HarmonicKind::Spherical => {
                if m.unsigned_abs() as usize > l {
                    None
                } else {
                    Some(l * l + (m + l as i32) as usize)
                }
            }
        }
    }

    pub fn coeff(&self, l: usize, m: i32) -> Option<f64> {
        self.index(l, m).map(|i| self.coeffs[i])
    }

    pub fn set_coeff(&mut self, l: usize, m: i32, value: f64) -> Result<()> {
        match self.index(l, m) {
            Some(i) => {
                self.coeffs[i] = value;
                Ok(())
            }
            None => Err(Error::UnsupportedHarmonic { l, max: self.max_l }),
        }
    }

    /// Cylindrical evaluation `a_0 + sum_l a_{+l} cos(l phi) + a_{-l} sin(l phi)`.
    pub fn evaluate_angle(&self, phi: f64) -> Result<f64> {
        if self.kind != HarmonicKind::Cylindrical {
            return Err(Error::KindMismatch {
                expected: "cylindrical",
                got: self.kind.name(),
            });
        }
        let mut acc = self.coeffs[0];
        for l in 1..=self.max_l {
            acc += self.coeffs[2 * l - 1] * (l as f64 * phi).cos();
            acc += self.coeffs[2 * l] * (l as f64 * phi).sin();
        }
        Ok(acc)
    }

    /// Spherical evaluation `sum_lm a_lm f_lm(direction)`.
    pub fn evaluate_direction(&self, direction: &[f64; 3]) -> Result<f64> {
        if self.kind != HarmonicKind::Spherical {
            return Err(Error::KindMismatch {
                expected: "spherical",
                got: self.kind.name(),
            });
        }
        let mut acc = 0.0;
        for l in 0..=self.max_l {
            for m in -(l as i32)..=(l as i32) {
                acc += self.coeff(l, m).unwrap() * spherical_basis(l, m, direction)?;
            }
        }
        Ok(acc)
    }
}

#[derive(Serialize, Deserialize)]
struct CoeffDto {
    l: usize,
    m: i32,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct ExpansionDto {
    kind: HarmonicKind,
    max_l: usize,
    coeffs: Vec<CoeffDto>,
}

impl From<HarmonicExpansion> for ExpansionDto {
    fn from(h: HarmonicExpansion) -> Self {
        let mut coeffs = Vec::new();
        for l in 0..=h.max_l {
            let ms: Vec<i32> = match h.kind {
                HarmonicKind::Cylindrical => {
                    if l == 0 {
                        vec![0]
                    } else {
                        vec![1, -1]
                    }
                }
                HarmonicKind::Spherical => (-(l as i32)..=(l as i32)).collect(),
            };
            for m in ms {
                coeffs.push(CoeffDto {
                    l,
                    m,
                    value: h.coeff(l, m).unwrap(),
                });
            }
        }
        ExpansionDto {
            kind: h.kind,
            max_l: h.max_l,
            coeffs,
        }
    }
}

impl TryFrom<ExpansionDto> for HarmonicExpansion {
    type Error = Error;

    fn try_from(dto: ExpansionDto) -> Result<Self> {
        let mut h = HarmonicExpansion::zero(dto.kind, dto.max_l);
        for c in dto.coeffs {
            h.set_coeff(c.l, c.m, c.value)?;
        }
        Ok(h)
    }
}

/// Least-squares Fourier fit of `(phi, r)` samples in the unnormalized
/// `cos(l phi)`, `sin(l phi)` basis.
pub fn cylindrical_fit(samples: &[(f64, f64)], max_l: usize) -> Result<HarmonicExpansion> {
    let needed = 2 * max_l + 1;
    if samples.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            got: samples.len(),
        });
    }
    let m = DMatrix::from_fn(samples.len(), needed, |i, j| {
        let phi = samples[i].0;
        if j == 0 {
            1.0
        } else {
            let l = j.div_ceil(2);
            if j % 2 == 1 {
                (l as f64 * phi).cos()
            } else {
                (l as f64 * phi).sin()
            }
        }
    });
    let b = DVector::from_fn(samples.len(), |i, _| samples[i].1);
    let (solution, _) = solve_ridge_svd(&m, &b, 0.0);
    let mut h = HarmonicExpansion::zero(HarmonicKind::Cylindrical, max_l);
    h.coeffs.copy_from_slice(solution.as_slice());
    Ok(h)
}

/// `A_0 = a_0^2`, `A_l = a_{+l}^2 + a_{-l}^2`.
pub fn cylindrical_invariants(h: &HarmonicExpansion) -> Result<Vec<f64>> {
    if h.kind != HarmonicKind::Cylindrical {
        return Err(Error::KindMismatch {
            expected: "cylindrical",
            got: h.kind.name(),
        });
    }
    let mut out = vec![h.coeffs[0] * h.coeffs[0]];
    for l in 1..=h.max_l {
        out.push(h.coeffs[2 * l - 1].powi(2) + h.coeffs[2 * l].powi(2));
    }
    Ok(out)
}

/// Polynomial forms of the real spherical harmonics, proportional only;
/// normalization constants are computed numerically once.
fn sh_polynomial(l: usize, m: i32, d: &[f64; 3]) -> f64 {
    let [x, y, z] = *d;
    match (l, m) {
        (0, 0) => 1.0,
        (1, -1) => y,
        (1, 0) => z,
        (1, 1) => x,
        (2, -2) => x * y,
        (2, -1) => y * z,
        (2, 0) => -x * x - y * y + 2.0 * z * z,
        (2, 1) => z * x,
        (2, 2) => x * x - y * y,
        (3, -3) => (3.0 * x * x - y * y) * y,
        (3, -2) => x * y * z,
        (3, -1) => y * (4.0 * z * z - x * x - y * y),
        (3, 0) => z * (2.0 * z * z - 3.0 * x * x - 3.0 * y * y),
        (3, 1) => x * (4.0 * z * z - x * x - y * y),
        (3, 2) => z * (x * x - y * y),
        (3, 3) => x * (x * x - 3.0 * y * y),
        _ => unreachable!("spherical table covers l <= 3"),
    }
}

fn sh_index(l: usize, m: i32) -> usize {
    l * l + (m + l as i32) as usize
}

/// Legendre polynomial `P_n` and its derivative at `x`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let next = ((2 * k - 1) as f64 * x * p - (k - 1) as f64 * p_prev) / k as f64;
        p_prev = p;
        p = next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, exact for polynomials
/// of degree `2n - 1`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Quadrature over the sphere: Gauss-Legendre in `cos(theta)` by uniform
/// `phi`, exact for the polynomial integrands this module produces.
pub(crate) fn sphere_quadrature(
    n_theta: usize,
    n_phi: usize,
    mut accumulate: impl FnMut(&[f64; 3], f64),
) {
    let (nodes, weights) = gauss_legendre(n_theta);
    let d_phi = 2.0 * PI / n_phi as f64;
    for (u, w) in nodes.iter().zip(&weights) {
        let sin_theta = (1.0 - u * u).sqrt();
        for ip in 0..n_phi {
            let phi = (ip as f64 + 0.5) * d_phi;
            let dir = [sin_theta * phi.cos(), sin_theta * phi.sin(), *u];
            accumulate(&dir, w * d_phi);
        }
    }
}

/// Unit-L2 normalization constants over the sphere, computed once.
fn sh_normalizations() -> &'static [f64; 16] {
    static TABLE: OnceLock<[f64; 16]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut integrals = [0.0f64; 16];
        sphere_quadrature(16, 64, |dir, weight| {
            for l in 0..=MAX_SPHERICAL_L {
                for m in -(l as i32)..=(l as i32) {
                    let v = sh_polynomial(l, m, dir);
                    integrals[sh_index(l, m)] += v * v * weight;
                }
            }
        });
        let mut out = [0.0f64; 16];
        for (slot, integral) in out.iter_mut().zip(integrals) {
            *slot = 1.0 / integral.sqrt();
        }
        out
    })
}

/// The real spherical harmonic `f_lm` at a unit direction, `l <= 3`.
pub fn spherical_basis(l: usize, m: i32, direction: &[f64; 3]) -> Result<f64> {
    if l > MAX_SPHERICAL_L {
        return Err(Error::UnsupportedHarmonic {
            l,
            max: MAX_SPHERICAL_L,
        });
    }
    if m.unsigned_abs() as usize > l {
        return Err(Error::InvalidConfig(format!(
            "order m = {m} is outside -{l}..={l}"
        )));
    }
    Ok(sh_normalizations()[sh_index(l, m)] * sh_polynomial(l, m, direction))
}

/// Least-squares spherical-harmonic fit of `(direction, r)` samples.
pub fn spherical_fit(samples: &[([f64; 3], f64)], max_l: usize) -> Result<HarmonicExpansion> {
    if max_l > MAX_SPHERICAL_L {
        return Err(Error::UnsupportedHarmonic {
            l: max_l,
            max: MAX_SPHERICAL_L,
        });
    }
    let needed = (max_l + 1) * (max_l + 1);
    if samples.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            got: samples.len(),
        });
    }
    let mut columns: Vec<(usize, i32)> = Vec::with_capacity(needed);
    for l in 0..=max_l {
        for m in -(l as i32)..=(l as i32) {
            columns.push((l, m));
        }
    }
    let mut m = DMatrix::zeros(samples.len(), needed);
    for (i, (dir, _)) in samples.iter().enumerate() {
        let len = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        if len == 0.0 {
            return Err(Error::OriginPoint { index: i });
        }
        let unit = [dir[0] / len, dir[1] / len, dir[2] / len];
        for (j, &(l, mm)) in columns.iter().enumerate() {
            m[(i, j)] = spherical_basis(l, mm, &unit)?;
        }
    }
    let b = DVector::from_fn(samples.len(), |i, _| samples[i].1);
    let (solution, _) = solve_ridge_svd(&m, &b, 0.0);
    let mut h = HarmonicExpansion::zero(HarmonicKind::Spherical, max_l);
    h.coeffs.copy_from_slice(solution.as_slice());
    Ok(h)
}

/// `A_l = sum_m a_lm^2`, one invariant per degree.
pub fn spherical_invariants(h: &HarmonicExpansion) -> Result<Vec<f64>> {
    if h.kind != HarmonicKind::Spherical {
        return Err(Error::KindMismatch {
            expected: "spherical",
            got: h.kind.name(),
        });
    }
    Ok((0..=h.max_l)
        .map(|l| {
            (-(l as i32)..=(l as i32))
                .map(|m| h.coeff(l, m).unwrap().powi(2))
                .sum()
        })
        .collect())
}

/// Near-uniform unit directions from the golden-angle spiral.
pub fn fibonacci_sphere(count: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5.0f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_poly::OrthogonalMatrix;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_angles(count: usize) -> Vec<f64> {
        (0..count)
            .map(|k| 2.0 * PI * k as f64 / count as f64)
            .collect()
    }

    #[test]
    fn cylindrical_fit_recovers_cosine() {
        let samples: Vec<(f64, f64)> = uniform_angles(64)
            .into_iter()
            .map(|phi| (phi, 2.0 + (3.0 * phi).cos()))
            .collect();
        let h = cylindrical_fit(&samples, 4).unwrap();
        assert!((h.coeff(0, 0).unwrap() - 2.0).abs() < 1e-10);
        assert!((h.coeff(3, 1).unwrap() - 1.0).abs() < 1e-10);
        for l in 1..=4usize {
            for m in [1, -1] {
                if (l, m) == (3, 1) {
                    continue;
                }
                assert!(h.coeff(l, m).unwrap().abs() < 1e-10, "l={l} m={m}");
            }
        }
    }

    #[test]
    fn cylindrical_fit_constant() {
        let samples: Vec<(f64, f64)> = uniform_angles(16).into_iter().map(|p| (p, 5.0)).collect();
        let h = cylindrical_fit(&samples, 3).unwrap();
        assert!((h.coeff(0, 0).unwrap() - 5.0).abs() < 1e-12);
        for l in 1..=3usize {
            assert!(h.coeff(l, 1).unwrap().abs() < 1e-12);
            assert!(h.coeff(l, -1).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn cylindrical_fit_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let mut target = HarmonicExpansion::zero(HarmonicKind::Cylindrical, 4);
        for c in &mut target.coeffs {
            *c = rng.gen_range(-1.0..1.0);
        }
        let samples: Vec<(f64, f64)> = uniform_angles(40)
            .into_iter()
            .map(|phi| (phi, target.evaluate_angle(phi).unwrap()))
            .collect();
        let fitted = cylindrical_fit(&samples, 4).unwrap();
        for (a, b) in target.coeffs.iter().zip(&fitted.coeffs) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn cylindrical_fit_needs_enough_samples() {
        let samples = vec![(0.0, 1.0), (1.0, 1.0)];
        assert!(matches!(
            cylindrical_fit(&samples, 2),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn cylindrical_invariants_basics() {
        let mut h = HarmonicExpansion::zero(HarmonicKind::Cylindrical, 4);
        h.set_coeff(3, 1, 1.0).unwrap();
        let inv = cylindrical_invariants(&h).unwrap();
        assert_eq!(inv[3], 1.0);
        assert!(inv.iter().enumerate().all(|(l, &v)| l == 3 || v == 0.0));

        let zero = HarmonicExpansion::zero(HarmonicKind::Cylindrical, 2);
        assert!(cylindrical_invariants(&zero).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cylindrical_invariants_stable_under_angle_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let mut target = HarmonicExpansion::zero(HarmonicKind::Cylindrical, 4);
        for c in &mut target.coeffs {
            *c = rng.gen_range(-1.0..1.0);
        }
        let base: Vec<f64> = cylindrical_invariants(&cylindrical_fit(
            &uniform_angles(64)
                .into_iter()
                .map(|phi| (phi, target.evaluate_angle(phi).unwrap()))
                .collect::<Vec<_>>(),
            4,
        )
        .unwrap())
        .unwrap();
        for _ in 0..5 {
            let shift = rng.gen_range(0.0..2.0 * PI);
            let rotated: Vec<(f64, f64)> = uniform_angles(64)
                .into_iter()
                .map(|phi| (phi, target.evaluate_angle(phi - shift).unwrap()))
                .collect();
            let inv = cylindrical_invariants(&cylindrical_fit(&rotated, 4).unwrap()).unwrap();
            for (a, b) in base.iter().zip(&inv) {
                assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn kind_mismatch_is_reported() {
        let h = HarmonicExpansion::zero(HarmonicKind::Spherical, 2);
        assert!(matches!(
            cylindrical_invariants(&h),
            Err(Error::KindMismatch { .. })
        ));
    }

    #[test]
    fn term_counts_per_degree() {
        // Two new terms per cylindrical degree, 2l+1 spherical terms.
        let cyl = HarmonicExpansion::zero(HarmonicKind::Cylindrical, 5);
        assert_eq!(cyl.coeffs.len(), 2 * 5 + 1);
        let sph = HarmonicExpansion::zero(HarmonicKind::Spherical, 3);
        for l in 0..=3usize {
            let count = (-(l as i32)..=(l as i32))
                .filter(|&m| sph.coeff(l, m).is_some())
                .count();
            assert_eq!(count, 2 * l + 1);
        }
    }

    #[test]
    fn spherical_basis_constant_is_normalized() {
        let expected = 1.0 / (4.0 * PI).sqrt();
        for dir in fibonacci_sphere(10) {
            let v = spherical_basis(0, 0, &dir).unwrap();
            assert!((v - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn spherical_basis_z_peaks_at_pole() {
        let pole = spherical_basis(1, 0, &[0.0, 0.0, 1.0]).unwrap();
        for dir in fibonacci_sphere(200) {
            assert!(spherical_basis(1, 0, &dir).unwrap() <= pole + 1e-12);
        }
    }

    #[test]
    fn spherical_basis_rejects_high_l() {
        assert!(matches!(
            spherical_basis(4, 0, &[0.0, 0.0, 1.0]),
            Err(Error::UnsupportedHarmonic { .. })
        ));
    }

    #[test]
    fn spherical_gram_matrix_is_identity() {
        let mut gram = vec![vec![0.0f64; 16]; 16];
        sphere_quadrature(50, 100, |dir, w| {
            let values: Vec<f64> = (0..=3usize)
                .flat_map(|l| {
                    (-(l as i32)..=(l as i32))
                        .map(move |m| (l, m))
                        .collect::<Vec<_>>()
                })
                .map(|(l, m)| spherical_basis(l, m, dir).unwrap())
                .collect();
            for (i, row) in gram.iter_mut().enumerate() {
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot += values[i] * values[j] * w;
                }
            }
        });
        for (i, row) in gram.iter().enumerate() {
            for (j, &entry) in row.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (entry - expected).abs() < 1e-3,
                    "gram[{i}][{j}] = {entry}"
                );
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (nodes, weights) = gauss_legendre(5);
        // int_{-1}^{1} x^8 dx = 2/9 needs 5 nodes; x^4 works too.
        let quartic: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| w * x.powi(4))
            .sum();
        assert!((quartic - 0.4).abs() < 1e-14);
        let octic: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| w * x.powi(8))
            .sum();
        assert!((octic - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn spherical_fit_constant_radius() {
        let samples: Vec<([f64; 3], f64)> =
            fibonacci_sphere(100).into_iter().map(|d| (d, 1.0)).collect();
        let h = spherical_fit(&samples, 2).unwrap();
        assert!((h.coeff(0, 0).unwrap() - (4.0 * PI).sqrt()).abs() < 1e-6);
        for l in 1..=2usize {
            for m in -(l as i32)..=(l as i32) {
                assert!(h.coeff(l, m).unwrap().abs() < 1e-6);
            }
        }
    }

    #[test]
    fn spherical_fit_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let mut target = HarmonicExpansion::zero(HarmonicKind::Spherical, 3);
        for c in &mut target.coeffs {
            *c = rng.gen_range(-1.0..1.0);
        }
        let samples: Vec<([f64; 3], f64)> = fibonacci_sphere(500)
            .into_iter()
            .map(|d| (d, target.evaluate_direction(&d).unwrap()))
            .collect();
        let fitted = spherical_fit(&samples, 3).unwrap();
        for (a, b) in target.coeffs.iter().zip(&fitted.coeffs) {
            assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn spherical_fit_orthogonality_isolates_modes() {
        let samples: Vec<([f64; 3], f64)> = fibonacci_sphere(400)
            .into_iter()
            .map(|d| {
                let v = 1.0 + spherical_basis(2, 0, &d).unwrap();
                (d, v)
            })
            .collect();
        let h = spherical_fit(&samples, 3).unwrap();
        for l in 0..=3usize {
            for m in -(l as i32)..=(l as i32) {
                let c = h.coeff(l, m).unwrap();
                match (l, m) {
                    (0, 0) => assert!((c - (4.0 * PI).sqrt()).abs() < 1e-6),
                    (2, 0) => assert!((c - 1.0).abs() < 1e-6),
                    _ => assert!(c.abs() < 1e-6, "l={l} m={m} c={c}"),
                }
            }
        }
    }

    #[test]
    fn spherical_invariants_basics() {
        let mut h = HarmonicExpansion::zero(HarmonicKind::Spherical, 3);
        h.set_coeff(2, 1, 2.0).unwrap();
        let inv = spherical_invariants(&h).unwrap();
        assert_eq!(inv[2], 4.0);
        let zero = HarmonicExpansion::zero(HarmonicKind::Spherical, 2);
        assert!(spherical_invariants(&zero).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spherical_invariants_stable_under_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let mut target = HarmonicExpansion::zero(HarmonicKind::Spherical, 3);
        for c in &mut target.coeffs {
            *c = rng.gen_range(-1.0..1.0);
        }
        let dirs = fibonacci_sphere(500);
        let base_samples: Vec<([f64; 3], f64)> = dirs
            .iter()
            .map(|d| (*d, target.evaluate_direction(d).unwrap()))
            .collect();
        let base = spherical_invariants(&spherical_fit(&base_samples, 3).unwrap()).unwrap();
        for _ in 0..5 {
            let o = OrthogonalMatrix::random_haar(3, &mut rng);
            let rotated: Vec<([f64; 3], f64)> = base_samples
                .iter()
                .map(|(d, v)| {
                    let r = o.apply(d);
                    ([r[0], r[1], r[2]], *v)
                })
                .collect();
            let inv = spherical_invariants(&spherical_fit(&rotated, 3).unwrap()).unwrap();
            for (a, b) in base.iter().zip(&inv) {
                assert!((a - b).abs() <= 1e-5 * (1.0 + a.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn expansion_json_round_trip() {
        let mut h = HarmonicExpansion::zero(HarmonicKind::Spherical, 2);
        h.set_coeff(2, -1, 0.75).unwrap();
        h.set_coeff(0, 0, -1.5).unwrap();
        let text = serde_json::to_string(&h).unwrap();
        let back: HarmonicExpansion = serde_json::from_str(&text).unwrap();
        assert_eq!(back, h);
    }
}

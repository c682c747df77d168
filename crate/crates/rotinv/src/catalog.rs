//! The catalog of named rotation invariants.
//!
//! Assembles deterministic feature vectors from the invariant families the
//! polynomial supports: the constant term, the squared norm of the linear
//! part, trace powers of the quadratic matrix, the two-vertex full
//! contraction per degree, mixed `p1^T [p]^m p1` path invariants, and any
//! extra contraction graphs supplied by configuration. Entry order is fixed
//! so feature vectors from different runs are comparable componentwise.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::contraction::{evaluate_graph, trace_power, ContractionGraph};
use crate::error::{Error, Result};
use crate::fitting::NormalizationRecord;
use crate::tensor_poly::{binomial, Exponent, Polynomial};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Minimum relative eigenvalue gap for degree-2 reconstruction.
pub const DEGENERACY_GAP: f64 = 1e-6;

/// Tolerance below which a recovered squared coefficient counts as
/// inconsistent rather than a rounding artifact.
const NEGATIVE_SQUARE_TOL: f64 = 1e-8;

/// Structural identity of a feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    #[serde(rename = "n")]
    pub dimension: usize,
    #[serde(rename = "D")]
    pub max_degree: usize,
    pub normalization: Option<NormalizationRecord>,
}

/// An ordered list of named invariant values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    meta: FeatureMeta,
    features: Vec<FeatureEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub name: String,
    pub value: f64,
}

impl FeatureVector {
    pub fn new(meta: FeatureMeta, features: Vec<FeatureEntry>) -> Self {
        debug_assert!(
            {
                let mut names: Vec<&str> = features.iter().map(|e| e.name.as_str()).collect();
                names.sort_unstable();
                names.windows(2).all(|w| w[0] != w[1])
            },
            "feature names must be unique"
        );
        Self { meta, features }
    }

    pub fn meta(&self) -> &FeatureMeta {
        &self.meta
    }

    pub fn entries(&self) -> &[FeatureEntry] {
        &self.features
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|e| e.name.as_str())
    }

    pub fn values(&self) -> Vec<f64> {
        self.features.iter().map(|e| e.value).collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.features
            .iter()
            .find(|e| e.name == name)
            .map(|e| e.value)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Attach the normalization record of the fit that produced `p`.
    pub fn with_normalization(mut self, record: NormalizationRecord) -> Self {
        self.meta.normalization = Some(record);
        self
    }
}

/// Which invariants go into a feature vector.
#[derive(Debug, Clone, Default)]
pub struct CatalogConfig {
    /// Highest trace power emitted; `None` means the dimension `n`.
    pub max_trace_power: Option<usize>,
    pub include_mixed: bool,
    /// Powers `m` of the mixed family; empty means `0..n` when mixed
    /// invariants are enabled. Each power must lie in `0..n`.
    pub mixed_powers: Vec<usize>,
    /// Extra contraction graphs, deduplicated and ordered by canonical form.
    pub extra_graphs: Vec<ContractionGraph>,
    /// Replace each value `v` from a `k`-vertex graph by `sign(v) |v|^(1/k)`
    /// so entries stay commensurate in coefficient scale.
    pub normalize_by_order: bool,
}

/// (name, value, vertex count) triples prior to order normalization.
type RawEntry = (String, f64, usize);

fn linear_norm_sq(p: &Polynomial) -> f64 {
    p.part(1).map_or(0.0, |part| {
        part.coeffs().iter().map(|c| c * c).sum()
    })
}

fn base_entries(p: &Polynomial, max_trace_power: usize) -> Result<Vec<RawEntry>> {
    let mut entries: Vec<RawEntry> = Vec::new();
    let p0 = p.part(0).map_or(0.0, |part| part.coeffs()[0]);
    entries.push(("p0".into(), p0, 1));
    entries.push(("dot(p1,p1)".into(), linear_norm_sq(p), 2));
    for m in 1..=max_trace_power {
        entries.push((format!("tr(p2^{m})"), trace_power(p, m), m));
    }
    for d in 3..=p.max_degree() {
        let graph = ContractionGraph::two_vertex(d, 0, 0);
        entries.push((format!("dot(p{d},p{d})"), evaluate_graph(&graph, &[p])?, 2));
    }
    Ok(entries)
}

fn mixed_entries(p: &Polynomial, powers: &[usize]) -> Result<Vec<RawEntry>> {
    let n = p.dimension();
    for &m in powers {
        if m >= n {
            return Err(Error::InvalidMixedPower {
                power: m,
                dimension: n,
            });
        }
    }
    let mut sorted: Vec<usize> = powers.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let quad = p.quadratic_matrix();
    let lin = DVector::from_row_slice(p.part(1).map_or(&vec![0.0; n][..], |part| part.coeffs()));
    let mut entries = Vec::new();
    let mut propagated = lin.clone();
    let mut power = 0;
    for &m in &sorted {
        while power < m {
            propagated = &quad * &propagated;
            power += 1;
        }
        entries.push((format!("mix(p1,p2^{m},p1)"), lin.dot(&propagated), m + 2));
    }
    Ok(entries)
}

fn extra_graph_entries(p: &Polynomial, graphs: &[ContractionGraph]) -> Result<Vec<RawEntry>> {
    let mut canonical: Vec<(crate::contraction::CanonicalForm, ContractionGraph)> = Vec::new();
    for graph in graphs {
        let form = graph.canonicalize()?;
        if !canonical.iter().any(|(f, _)| *f == form) {
            canonical.push((form, graph.clone()));
        }
    }
    canonical.sort_by(|(a, _), (b, _)| a.cmp(b));
    canonical
        .into_iter()
        .map(|(form, graph)| {
            let spec = form.to_graph().to_spec_string();
            let value = evaluate_graph(&graph, &[p])?;
            Ok((format!("graph({spec})"), value, graph.vertices().len()))
        })
        .collect()
}

fn finish(
    p: &Polynomial,
    raw: Vec<RawEntry>,
    normalize_by_order: bool,
) -> FeatureVector {
    let features = raw
        .into_iter()
        .map(|(name, value, k)| {
            let value = if normalize_by_order {
                value.signum() * value.abs().powf(1.0 / k as f64)
            } else {
                value
            };
            FeatureEntry { name, value }
        })
        .collect();
    FeatureVector::new(
        FeatureMeta {
            dimension: p.dimension(),
            max_degree: p.max_degree(),
            normalization: None,
        },
        features,
    )
}

/// The degree-ascending base family: `p0`, the linear norm, trace powers
/// `m = 1..=n`, and the two-vertex full contraction for each degree >= 3.
pub fn base_invariants(p: &Polynomial) -> Result<FeatureVector> {
    let raw = base_entries(p, p.dimension())?;
    Ok(finish(p, raw, false))
}

/// `sum_ab p_a ([p]^m)_ab p_b` for each requested power; `m = 0` is the
/// plain squared norm of the linear part.
pub fn mixed_invariants(p: &Polynomial, powers: &[usize]) -> Result<FeatureVector> {
    let raw = mixed_entries(p, powers)?;
    Ok(finish(p, raw, false))
}

/// Cross contractions between two polynomials: the per-degree two-vertex
/// graphs (one vertex from each) and the global Frobenius-style product.
pub fn relative_invariants(p: &Polynomial, q: &Polynomial) -> Result<FeatureVector> {
    if q.dimension() != p.dimension() {
        return Err(Error::DimensionMismatch {
            expected: p.dimension(),
            got: q.dimension(),
        });
    }
    let shared_degree = p.max_degree().min(q.max_degree());
    let mut raw: Vec<RawEntry> = Vec::new();
    for d in 1..=shared_degree {
        let graph = ContractionGraph::two_vertex(d, 0, 1);
        raw.push((
            format!("dot(p{d},q{d})"),
            evaluate_graph(&graph, &[p, q])?,
            2,
        ));
    }
    let frobenius: f64 = (0..=shared_degree)
        .map(|d| cross_degree_dot(p, q, d))
        .sum();
    raw.push(("frobenius".into(), frobenius, 2));

    let features = raw
        .into_iter()
        .map(|(name, value, _)| FeatureEntry { name, value })
        .collect();
    Ok(FeatureVector::new(
        FeatureMeta {
            dimension: p.dimension(),
            max_degree: shared_degree,
            normalization: None,
        },
        features,
    ))
}

fn cross_degree_dot(p: &Polynomial, q: &Polynomial, d: usize) -> f64 {
    match (p.part(d), q.part(d)) {
        (Some(a), Some(b)) => a
            .iter()
            .zip(b.coeffs())
            .map(|((e, pa), qa)| pa * qa / crate::tensor_poly::multinomial_weight(&e).unwrap() as f64)
            .sum(),
        _ => 0.0,
    }
}

/// Parameter-count upper bound on independent rotation invariants of a
/// degree-`d` homogeneous polynomial: `C(n+d-1, d) - n(n-1)/2`.
pub fn invariant_count_bound(n: usize, d: usize) -> i64 {
    assert!(n >= 2 && d >= 1, "bound defined for n >= 2, d >= 1");
    let terms = binomial((n + d - 1) as u64, d as u64).expect("count overflow") as i64;
    terms - (n * (n - 1) / 2) as i64
}

/// Same bound for the spherical two-degree basis `{D-1, D}`:
/// `C(n+D-1, D) + C(n+D-2, D-1) - n(n-1)/2`.
pub fn spherical_count_bound(n: usize, max_degree: usize) -> i64 {
    assert!(n >= 2 && max_degree >= 2, "bound defined for n >= 2, D >= 2");
    let top = binomial((n + max_degree - 1) as u64, max_degree as u64).expect("count overflow") as i64;
    let below = binomial((n + max_degree - 2) as u64, (max_degree - 1) as u64).expect("count overflow") as i64;
    top + below - (n * (n - 1) / 2) as i64
}

/// The full configured catalog in fixed order: base invariants, mixed
/// invariants by power, then extra graphs by canonical form.
pub fn feature_vector(p: &Polynomial, cfg: &CatalogConfig) -> Result<FeatureVector> {
    let n = p.dimension();
    let max_trace = cfg.max_trace_power.unwrap_or(n);
    let mut raw = base_entries(p, max_trace)?;
    if cfg.include_mixed {
        let default_powers: Vec<usize> = (0..n).collect();
        let powers: &[usize] = if cfg.mixed_powers.is_empty() {
            &default_powers
        } else {
            &cfg.mixed_powers
        };
        raw.extend(mixed_entries(p, powers)?);
    }
    raw.extend(extra_graph_entries(p, &cfg.extra_graphs)?);
    Ok(finish(p, raw, cfg.normalize_by_order))
}

/// Feature vectors for a batch of polynomials; parallel over polynomials
/// when the `parallel` feature is enabled, output in input order.
pub fn batch_feature_vectors(polys: &[Polynomial], cfg: &CatalogConfig) -> Result<Vec<FeatureVector>> {
    #[cfg(feature = "parallel")]
    {
        polys.par_iter().map(|p| feature_vector(p, cfg)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        batch_feature_vectors_seq(polys, cfg)
    }
}

/// Always-sequential batch variant (fallback path and benchmark baseline).
pub fn batch_feature_vectors_seq(
    polys: &[Polynomial],
    cfg: &CatalogConfig,
) -> Result<Vec<FeatureVector>> {
    polys.iter().map(|p| feature_vector(p, cfg)).collect()
}

/// Weighted Euclidean distance between feature vectors sharing a catalog.
/// The normalization record is informational and not compared.
pub fn distance(f: &FeatureVector, g: &FeatureVector, weights: Option<&[f64]>) -> Result<f64> {
    if f.meta.dimension != g.meta.dimension || f.meta.max_degree != g.meta.max_degree {
        return Err(Error::CatalogMismatch(format!(
            "meta (n={}, D={}) vs (n={}, D={})",
            f.meta.dimension, g.meta.dimension, f.meta.max_degree, g.meta.max_degree
        )));
    }
    if f.len() != g.len() {
        return Err(Error::CatalogMismatch(format!(
            "{} entries vs {}",
            f.len(),
            g.len()
        )));
    }
    for (a, b) in f.features.iter().zip(&g.features) {
        if a.name != b.name {
            return Err(Error::CatalogMismatch(format!(
                "entry `{}` vs `{}`",
                a.name, b.name
            )));
        }
    }
    if let Some(w) = weights {
        if w.len() != f.len() {
            return Err(Error::CatalogMismatch(format!(
                "{} weights for {} entries",
                w.len(),
                f.len()
            )));
        }
        if let Some(bad) = w.iter().find(|&&x| x <= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "distance weights must be positive, got {bad}"
            )));
        }
    }
    let sum: f64 = f
        .features
        .iter()
        .zip(&g.features)
        .enumerate()
        .map(|(i, (a, b))| {
            let w = weights.map_or(1.0, |w| w[i]);
            w * (a.value - b.value) * (a.value - b.value)
        })
        .sum();
    Ok(sum.sqrt())
}

// ---------------------------------------------------------------------------
// Newton's identities and the degree-2 canonical form
// ---------------------------------------------------------------------------

/// Elementary symmetric polynomials `e_0..=e_k` from power sums `s_1..=s_k`.
pub fn power_sums_to_elementary(power_sums: &[f64]) -> Vec<f64> {
    let mut e = vec![1.0];
    for k in 1..=power_sums.len() {
        let mut acc = 0.0;
        for i in 1..=k {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * e[k - i] * power_sums[i - 1];
        }
        e.push(acc / k as f64);
    }
    e
}

/// `s_{n+1}` reconstructed from `s_1..=s_n` via Newton's identities, the
/// Cayley-Hamilton dependence of the next trace power on the lower ones.
pub fn next_power_sum(power_sums: &[f64]) -> f64 {
    let n = power_sums.len();
    assert!(n >= 1);
    let e = power_sums_to_elementary(power_sums);
    let mut acc = 0.0;
    for i in 1..=n {
        let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
        let lower = if n + 1 - i == 0 {
            unreachable!("i ranges over 1..=n")
        } else {
            power_sums[n - i]
        };
        acc += sign * e[i] * lower;
    }
    acc
}

/// Real roots of the monic polynomial `x^k + tail[k-1] x^(k-1) + ... + tail[0]`,
/// assuming all roots are real (characteristic polynomials of symmetric
/// matrices). Roots of the derivative bracket the roots recursively and
/// bisection pins them down.
pub fn real_roots_monic(tail: &[f64]) -> Vec<f64> {
    let k = tail.len();
    if k == 0 {
        return Vec::new();
    }
    if k == 1 {
        return vec![-tail[0]];
    }
    let eval = |x: f64| -> f64 {
        let mut acc = 1.0;
        for j in (0..k).rev() {
            acc = acc * x + tail[j];
        }
        acc
    };
    let derivative_tail: Vec<f64> = (1..k).map(|j| tail[j] * j as f64 / k as f64).collect();
    let mut critical = real_roots_monic(&derivative_tail);
    critical.sort_by(f64::total_cmp);

    let bound = 1.0 + tail.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut brackets = Vec::with_capacity(critical.len() + 2);
    brackets.push(-bound);
    brackets.extend(critical);
    brackets.push(bound);

    let mut roots = Vec::new();
    for pair in brackets.windows(2) {
        let (mut lo, mut hi) = (pair[0], pair[1]);
        if lo >= hi {
            continue;
        }
        let (flo, fhi) = (eval(lo), eval(hi));
        if flo == 0.0 {
            push_unique(&mut roots, lo);
            continue;
        }
        if fhi == 0.0 {
            push_unique(&mut roots, hi);
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fmid = eval(mid);
            if fmid == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fmid.signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        push_unique(&mut roots, 0.5 * (lo + hi));
    }
    roots
}

fn push_unique(roots: &mut Vec<f64>, x: f64) {
    if roots.iter().all(|&r| (r - x).abs() > 1e-14 * (1.0 + x.abs())) {
        roots.push(x);
    }
}

/// Rebuild the canonical degree-2 representative from its invariants.
///
/// Needs `p0`, the trace powers `m = 1..=n`, and the mixed invariants
/// `m = 0..n`. Eigenvalues come from Newton's identities plus a real-root
/// solve of the characteristic polynomial; the squared linear coefficients
/// come from the Vandermonde system over `sum_a lambda_a^m p_a^2`; signs are
/// fixed non-negative, so the output represents the rotation+reflection
/// class.
pub fn reconstruct_degree2(features: &FeatureVector, n: usize) -> Result<Polynomial> {
    let fetch = |name: String| -> Result<f64> {
        features.get(&name).ok_or(Error::MissingFeature(name))
    };
    let p0 = fetch("p0".into())?;
    let traces: Vec<f64> = (1..=n)
        .map(|m| fetch(format!("tr(p2^{m})")))
        .collect::<Result<_>>()?;
    let mixed: Vec<f64> = (0..n)
        .map(|m| fetch(format!("mix(p1,p2^{m},p1)")))
        .collect::<Result<_>>()?;

    let elementary = power_sums_to_elementary(&traces);
    let mut tail = vec![0.0; n];
    for k in 1..=n {
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        tail[n - k] = sign * elementary[k];
    }
    let mut eigenvalues = real_roots_monic(&tail);
    eigenvalues.sort_by(f64::total_cmp);
    if eigenvalues.len() != n {
        return Err(Error::DegenerateSpectrum {
            gap: 0.0,
            limit: DEGENERACY_GAP,
        });
    }
    let scale = eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let min_gap = eigenvalues
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    if min_gap <= DEGENERACY_GAP * scale {
        return Err(Error::DegenerateSpectrum {
            gap: min_gap / scale,
            limit: DEGENERACY_GAP,
        });
    }

    let vandermonde = DMatrix::from_fn(n, n, |m, a| eigenvalues[a].powi(m as i32));
    let rhs = DVector::from_vec(mixed);
    let squares = vandermonde
        .lu()
        .solve(&rhs)
        .ok_or(Error::DegenerateSpectrum {
            gap: min_gap / scale,
            limit: DEGENERACY_GAP,
        })?;

    let mut out = Polynomial::zero(n, 2);
    let zero_exp = Exponent::new(vec![0; n]);
    out.set_coeff(&zero_exp, p0)?;
    for a in 0..n {
        let square = squares[a];
        if square < -NEGATIVE_SQUARE_TOL {
            return Err(Error::InconsistentFeatures { value: square });
        }
        let mut lin_powers = vec![0u32; n];
        lin_powers[a] = 1;
        out.set_coeff(&Exponent::new(lin_powers), square.max(0.0).sqrt())?;
        let mut quad_powers = vec![0u32; n];
        quad_powers[a] = 2;
        out.set_coeff(&Exponent::new(quad_powers), eigenvalues[a])?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_poly::OrthogonalMatrix;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    fn exp(powers: &[u32]) -> Exponent {
        Exponent::new(powers.to_vec())
    }

    fn symmetric_poly(n: usize, matrix: &DMatrix<f64>) -> Polynomial {
        let mut p = Polynomial::zero(n, 2);
        for i in 0..n {
            let mut powers = vec![0u32; n];
            powers[i] = 2;
            p.set_coeff(&exp(&powers), matrix[(i, i)]).unwrap();
            for j in (i + 1)..n {
                let mut powers = vec![0u32; n];
                powers[i] = 1;
                powers[j] = 1;
                p.set_coeff(&exp(&powers), 2.0 * matrix[(i, j)]).unwrap();
            }
        }
        p
    }

    #[test]
    fn base_invariants_of_constant() {
        let p = Polynomial::constant(3, 7.0);
        let f = base_invariants(&p).unwrap();
        assert_eq!(f.get("p0"), Some(7.0));
        for entry in &f.entries()[1..] {
            assert_eq!(entry.value, 0.0, "{}", entry.name);
        }
    }

    #[test]
    fn base_invariants_of_linear() {
        let mut p = Polynomial::zero(2, 1);
        p.set_coeff(&exp(&[1, 0]), 3.0).unwrap();
        p.set_coeff(&exp(&[0, 1]), 4.0).unwrap();
        let f = base_invariants(&p).unwrap();
        assert_eq!(f.get("dot(p1,p1)"), Some(25.0));
    }

    #[test]
    fn base_invariants_are_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let p = Polynomial::random(3, 3, &mut rng);
        let f = base_invariants(&p).unwrap();
        for trial in 0..10 {
            let o = OrthogonalMatrix::random_with_det(3, &mut rng, trial % 2 == 0);
            let g = base_invariants(&p.apply_rotation(&o).unwrap()).unwrap();
            for (a, b) in f.entries().iter().zip(g.entries()) {
                assert!(rel_close(a.value, b.value, 1e-9), "{}", a.name);
            }
        }
    }

    #[test]
    fn mixed_invariant_examples() {
        let mut p = Polynomial::zero(2, 2);
        p.set_coeff(&exp(&[1, 0]), 1.0).unwrap();
        p.set_coeff(&exp(&[2, 0]), 2.0).unwrap();
        p.set_coeff(&exp(&[0, 2]), 3.0).unwrap();
        let f = mixed_invariants(&p, &[0, 1]).unwrap();
        assert_eq!(f.get("mix(p1,p2^0,p1)"), Some(1.0));
        assert_eq!(f.get("mix(p1,p2^1,p1)"), Some(2.0));
    }

    #[test]
    fn mixed_zero_power_equals_linear_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let p = Polynomial::random(3, 2, &mut rng);
        let base = base_invariants(&p).unwrap();
        let mixed = mixed_invariants(&p, &[0]).unwrap();
        assert_eq!(base.get("dot(p1,p1)"), mixed.get("mix(p1,p2^0,p1)"));
    }

    #[test]
    fn mixed_invariants_under_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let p = Polynomial::random(3, 2, &mut rng);
        let f = mixed_invariants(&p, &[0, 1, 2]).unwrap();
        for trial in 0..20 {
            let o = OrthogonalMatrix::random_with_det(3, &mut rng, trial % 2 == 1);
            let g = mixed_invariants(&p.apply_rotation(&o).unwrap(), &[0, 1, 2]).unwrap();
            for (a, b) in f.entries().iter().zip(g.entries()) {
                assert!(rel_close(a.value, b.value, 1e-9), "{}", a.name);
            }
        }
    }

    #[test]
    fn mixed_power_out_of_range() {
        let p = Polynomial::zero(2, 2);
        assert!(matches!(
            mixed_invariants(&p, &[2]),
            Err(Error::InvalidMixedPower { .. })
        ));
    }

    #[test]
    fn relative_invariants_examples() {
        let mut p = Polynomial::zero(2, 1);
        p.set_coeff(&exp(&[1, 0]), 1.0).unwrap();
        let mut q = Polynomial::zero(2, 1);
        q.set_coeff(&exp(&[0, 1]), 1.0).unwrap();
        let f = relative_invariants(&p, &q).unwrap();
        assert_eq!(f.get("dot(p1,q1)"), Some(0.0));

        let self_rel = relative_invariants(&p, &p).unwrap();
        assert_eq!(self_rel.get("dot(p1,q1)"), Some(1.0));
    }

    #[test]
    fn relative_invariants_under_joint_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let p = Polynomial::random(3, 3, &mut rng);
        let q = Polynomial::random(3, 3, &mut rng);
        let f = relative_invariants(&p, &q).unwrap();
        for _ in 0..10 {
            let o = OrthogonalMatrix::random_haar(3, &mut rng);
            let g = relative_invariants(
                &p.apply_rotation(&o).unwrap(),
                &q.apply_rotation(&o).unwrap(),
            )
            .unwrap();
            for (a, b) in f.entries().iter().zip(g.entries()) {
                assert!(rel_close(a.value, b.value, 1e-9), "{}", a.name);
            }
        }
    }

    #[test]
    fn count_bounds() {
        assert_eq!(invariant_count_bound(3, 2), 3);
        assert_eq!(invariant_count_bound(2, 3), 3);
        assert_eq!(invariant_count_bound(3, 3), 7);
        assert_eq!(spherical_count_bound(2, 3), 6);
        assert_eq!(spherical_count_bound(3, 2), 6);
        assert_eq!(spherical_count_bound(2, 2), 4);
    }

    #[test]
    fn feature_vector_of_zero_polynomial() {
        let p = Polynomial::zero(3, 4);
        let cfg = CatalogConfig {
            include_mixed: true,
            ..CatalogConfig::default()
        };
        let f = feature_vector(&p, &cfg).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn feature_vector_rotation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let cfg = CatalogConfig {
            include_mixed: true,
            extra_graphs: vec![ContractionGraph::parse("3:p,3:p,2:p ; 0-1,0-1,0-2,1-2").unwrap()],
            ..CatalogConfig::default()
        };
        let p = Polynomial::random(3, 3, &mut rng);
        let f = feature_vector(&p, &cfg).unwrap();
        for trial in 0..10 {
            let o = OrthogonalMatrix::random_with_det(3, &mut rng, trial % 2 == 0);
            let g = feature_vector(&p.apply_rotation(&o).unwrap(), &cfg).unwrap();
            for (a, b) in f.entries().iter().zip(g.entries()) {
                assert!(rel_close(a.value, b.value, 1e-9), "{}", a.name);
            }
        }
    }

    #[test]
    fn order_normalization_scales_linearly() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        // Single homogeneous degree-3 part: every catalog entry comes from a
        // graph whose vertices all reference that part.
        let mut p = Polynomial::zero(3, 3);
        for (e, _) in Polynomial::random(3, 3, &mut rng).part(3).unwrap().iter() {
            p.set_coeff(&e, rng.gen_range(-1.0..1.0)).unwrap();
        }
        let cfg = CatalogConfig {
            normalize_by_order: true,
            ..CatalogConfig::default()
        };
        let s = 2.5;
        let f = feature_vector(&p, &cfg).unwrap();
        let g = feature_vector(&p.scaled(s), &cfg).unwrap();
        let name = "dot(p3,p3)";
        assert!(rel_close(g.get(name).unwrap(), s * f.get(name).unwrap(), 1e-12));
    }

    #[test]
    fn distance_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let cfg = CatalogConfig::default();
        let p = Polynomial::random(3, 3, &mut rng);
        let q = Polynomial::random(3, 3, &mut rng);
        let r = Polynomial::random(3, 3, &mut rng);
        let (fp, fq, fr) = (
            feature_vector(&p, &cfg).unwrap(),
            feature_vector(&q, &cfg).unwrap(),
            feature_vector(&r, &cfg).unwrap(),
        );
        assert_eq!(distance(&fp, &fp, None).unwrap(), 0.0);
        assert_eq!(
            distance(&fp, &fq, None).unwrap(),
            distance(&fq, &fp, None).unwrap()
        );
        let (dpq, dqr, dpr) = (
            distance(&fp, &fq, None).unwrap(),
            distance(&fq, &fr, None).unwrap(),
            distance(&fp, &fr, None).unwrap(),
        );
        assert!(dpr <= dpq + dqr + 1e-12);

        let o = OrthogonalMatrix::random_haar(3, &mut rng);
        let rotated = feature_vector(&p.apply_rotation(&o).unwrap(), &cfg).unwrap();
        assert!(distance(&fp, &rotated, None).unwrap() <= 1e-8);
    }

    #[test]
    fn distance_rejects_mismatched_catalogs() {
        let cfg = CatalogConfig::default();
        let p = Polynomial::zero(3, 3);
        let q = Polynomial::zero(3, 2);
        let fp = feature_vector(&p, &cfg).unwrap();
        let fq = feature_vector(&q, &cfg).unwrap();
        assert!(matches!(
            distance(&fp, &fq, None),
            Err(Error::CatalogMismatch(_))
        ));
    }

    #[test]
    fn degree1_completeness() {
        // Equal norms agree on the degree-1 catalog, unequal norms differ.
        let mut p = Polynomial::zero(3, 1);
        p.set_coeff(&exp(&[1, 0, 0]), 3.0).unwrap();
        p.set_coeff(&exp(&[0, 1, 0]), 4.0).unwrap();
        let mut q = Polynomial::zero(3, 1);
        q.set_coeff(&exp(&[0, 0, 1]), 5.0).unwrap();
        assert_eq!(
            base_invariants(&p).unwrap().get("dot(p1,p1)"),
            base_invariants(&q).unwrap().get("dot(p1,p1)")
        );
        let mut longer = Polynomial::zero(3, 1);
        longer.set_coeff(&exp(&[0, 0, 1]), 5.1).unwrap();
        let a = base_invariants(&p).unwrap().get("dot(p1,p1)").unwrap();
        let b = base_invariants(&longer).unwrap().get("dot(p1,p1)").unwrap();
        assert!((a - b).abs() > 1e-3);
    }

    #[test]
    fn degree2_trace_powers_separate_spectra() {
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        let n = 3;
        let eigen = [0.5, 1.25, -0.75];
        let o1 = OrthogonalMatrix::random_haar(n, &mut rng);
        let o2 = OrthogonalMatrix::random_haar(n, &mut rng);
        let diag = DMatrix::from_diagonal(&DVector::from_row_slice(&eigen));
        let m1 = o1.matrix().transpose() * &diag * o1.matrix();
        let m2 = o2.matrix().transpose() * &diag * o2.matrix();
        let p = symmetric_poly(n, &m1);
        let q = symmetric_poly(n, &m2);
        for m in 1..=n {
            assert!(rel_close(trace_power(&p, m), trace_power(&q, m), 1e-9));
        }
        // Perturbing one eigenvalue moves at least one trace power.
        let eigen_perturbed = [0.5 + 1e-3, 1.25, -0.75];
        let diag_p = DMatrix::from_diagonal(&DVector::from_row_slice(&eigen_perturbed));
        let m3 = o2.matrix().transpose() * &diag_p * o2.matrix();
        let r = symmetric_poly(n, &m3);
        let moved = (1..=n).any(|m| (trace_power(&p, m) - trace_power(&r, m)).abs() > 1e-4);
        assert!(moved);
    }

    #[test]
    fn newton_identities_on_known_spectrum() {
        // Eigenvalues 1, 2, 3: e = (6, 11, 6), s4 = 1 + 16 + 81 = 98.
        let s = [6.0, 14.0, 36.0];
        let e = power_sums_to_elementary(&s);
        assert!(rel_close(e[1], 6.0, 1e-12));
        assert!(rel_close(e[2], 11.0, 1e-12));
        assert!(rel_close(e[3], 6.0, 1e-12));
        assert!(rel_close(next_power_sum(&s), 98.0, 1e-12));
    }

    #[test]
    fn trace_power_reconstruction_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        for n in 2..=4usize {
            for _ in 0..20 {
                let sym = {
                    let raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
                    (&raw + raw.transpose()) * 0.5
                };
                let p = symmetric_poly(n, &sym);
                let traces: Vec<f64> = (1..=n).map(|m| trace_power(&p, m)).collect();
                let direct = trace_power(&p, n + 1);
                assert!(rel_close(next_power_sum(&traces), direct, 1e-8));
            }
        }
    }

    #[test]
    fn root_finder_on_known_cubic() {
        // (x - 1)(x - 2)(x - 3) = x^3 - 6x^2 + 11x - 6.
        let mut roots = real_roots_monic(&[-6.0, 11.0, -6.0]);
        roots.sort_by(f64::total_cmp);
        assert_eq!(roots.len(), 3);
        for (root, expected) in roots.iter().zip([1.0, 2.0, 3.0]) {
            assert!((root - expected).abs() < 1e-9);
        }
    }

    fn reconstruction_config() -> CatalogConfig {
        CatalogConfig {
            include_mixed: true,
            ..CatalogConfig::default()
        }
    }

    #[test]
    fn reconstruct_already_canonical() {
        let mut p = Polynomial::zero(2, 2);
        p.set_coeff(&exp(&[1, 0]), 1.0).unwrap();
        p.set_coeff(&exp(&[0, 1]), 1.0).unwrap();
        p.set_coeff(&exp(&[2, 0]), 1.0).unwrap();
        p.set_coeff(&exp(&[0, 2]), 2.0).unwrap();
        let f = feature_vector(&p, &reconstruction_config()).unwrap();
        let rebuilt = reconstruct_degree2(&f, 2).unwrap();
        for (a, b) in p.vectorize().iter().zip(rebuilt.vectorize()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn reconstruct_is_rotation_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for trial in 0..20 {
            let n = 3;
            let mut p = Polynomial::zero(n, 2);
            for i in 0..n {
                let mut powers = vec![0u32; n];
                powers[i] = 1;
                p.set_coeff(&exp(&powers), rng.gen_range(0.2..1.5)).unwrap();
                let mut quad = vec![0u32; n];
                quad[i] = 2;
                p.set_coeff(&exp(&quad), i as f64 + rng.gen_range(0.0..0.5))
                    .unwrap();
            }
            let o = OrthogonalMatrix::random_with_det(n, &mut rng, trial % 2 == 0);
            let q = p.apply_rotation(&o).unwrap();
            let fp = feature_vector(&p, &reconstruction_config()).unwrap();
            let fq = feature_vector(&q, &reconstruction_config()).unwrap();
            let a = reconstruct_degree2(&fp, n).unwrap();
            let b = reconstruct_degree2(&fq, n).unwrap();
            for (x, y) in a.vectorize().iter().zip(b.vectorize()) {
                assert!((x - y).abs() <= 1e-7 * x.abs().max(y.abs()).max(1.0));
            }
        }
    }

    #[test]
    fn reconstruct_rejects_inconsistent_features() {
        // Trace powers of diag(1, 2) but an impossible negative squared
        // linear norm.
        let features = FeatureVector::new(
            FeatureMeta {
                dimension: 2,
                max_degree: 2,
                normalization: None,
            },
            vec![
                FeatureEntry { name: "p0".into(), value: 0.0 },
                FeatureEntry { name: "tr(p2^1)".into(), value: 3.0 },
                FeatureEntry { name: "tr(p2^2)".into(), value: 5.0 },
                FeatureEntry { name: "mix(p1,p2^0,p1)".into(), value: -1.0 },
                FeatureEntry { name: "mix(p1,p2^1,p1)".into(), value: -1.0 },
            ],
        );
        assert!(matches!(
            reconstruct_degree2(&features, 2),
            Err(Error::InconsistentFeatures { .. })
        ));
    }

    #[test]
    fn reconstruct_requires_mixed_entries() {
        let p = Polynomial::zero(2, 2);
        let base_only = base_invariants(&p).unwrap();
        assert!(matches!(
            reconstruct_degree2(&base_only, 2),
            Err(Error::MissingFeature(_))
        ));
    }

    #[test]
    fn reconstruct_rejects_degenerate_spectrum() {
        let mut p = Polynomial::zero(3, 2);
        for i in 0..3 {
            let mut powers = vec![0u32; 3];
            powers[i] = 2;
            p.set_coeff(&exp(&powers), 1.0).unwrap();
        }
        let f = feature_vector(&p, &reconstruction_config()).unwrap();
        assert!(matches!(
            reconstruct_degree2(&f, 3),
            Err(Error::DegenerateSpectrum { .. })
        ));
    }

    #[test]
    fn feature_vector_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let p = Polynomial::random(2, 3, &mut rng);
        let f = feature_vector(&p, &CatalogConfig::default()).unwrap();
        let text = serde_json::to_string(&f).unwrap();
        let back: FeatureVector = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn batch_matches_sequential() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let polys: Vec<Polynomial> = (0..8).map(|_| Polynomial::random(3, 3, &mut rng)).collect();
        let cfg = CatalogConfig {
            include_mixed: true,
            ..CatalogConfig::default()
        };
        let par = batch_feature_vectors(&polys, &cfg).unwrap();
        let seq = batch_feature_vectors_seq(&polys, &cfg).unwrap();
        assert_eq!(par, seq);
    }
}

//! Weighted least-squares polynomial fitting of point data.
//!
//! Point clouds come from CSV files or XYZ molecule files, get centered
//! (and optionally rescaled to unit mean distance), and are fitted with a
//! monomial basis, either all degrees up to `D` or only degrees `D-1` and
//! `D` evaluated on unit directions for spherical envelopes. The solver is
//! a singular-value pseudo-inverse with an optional ridge term.
//!
//! Internally the system is solved in the `sqrt(N_l)`-scaled coefficient
//! coordinates of [`Polynomial::vectorize`], where rotations act
//! orthogonally. This makes the ridge penalty and the minimal-norm
//! tie-break of the pseudo-inverse rotation-equivariant, so fitting a
//! rotated cloud yields the rotated fit even when the system is
//! underdetermined. For a full-rank system with no ridge the solution is
//! the ordinary least-squares one either way.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_poly::{
    enumerate_exponents, multinomial_weight_f64, Exponent, Polynomial,
};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Relative singular-value cutoff of the pseudo-inverse.
pub const SVD_CUTOFF: f64 = 1e-10;

/// Weighted points with target values.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dimension: usize,
    points: Vec<f64>, // flattened, dimension entries per point
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl PointCloud {
    pub fn new(
        dimension: usize,
        points: Vec<Vec<f64>>,
        values: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidConfig(
                "point clouds need at least one coordinate".into(),
            ));
        }
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if values.len() != points.len() || weights.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: values.len().min(weights.len()),
            });
        }
        let mut flat = Vec::with_capacity(points.len() * dimension);
        for p in &points {
            if p.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    got: p.len(),
                });
            }
            flat.extend_from_slice(p);
        }
        for (index, &w) in weights.iter().enumerate() {
            if w.is_nan() || w <= 0.0 {
                return Err(Error::NonPositiveWeight { index, value: w });
            }
        }
        Ok(Self {
            dimension,
            points: flat,
            values,
            weights,
        })
    }

    /// Unit-weight cloud with target value 1 at every point.
    pub fn from_points(dimension: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        let count = points.len();
        Self::new(dimension, points, vec![1.0; count], vec![1.0; count])
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks(self.dimension)
    }

    /// Apply `O` (or any matrix-as-map) to every point.
    pub fn map_points(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let points: Vec<Vec<f64>> = self.iter_points().map(&f).collect();
        Self::new(
            self.dimension,
            points,
            self.values.clone(),
            self.weights.clone(),
        )
    }
}

/// Whether normalization rescales after centering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleMode {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "unit-mean-distance")]
    UnitMeanDistance,
}

/// Everything needed to undo a normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub centroid: Vec<f64>,
    pub scale: f64,
    pub mode: ScaleMode,
}

/// Subtract the weighted centroid; in unit-mean-distance mode also divide
/// by the weighted mean distance from it.
pub fn normalize(pc: &PointCloud, mode: ScaleMode) -> Result<(PointCloud, NormalizationRecord)> {
    if pc.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let n = pc.dimension();
    let total_weight: f64 = pc.weights().iter().sum();
    let mut centroid = vec![0.0; n];
    for (p, &w) in pc.iter_points().zip(pc.weights()) {
        for (c, &x) in centroid.iter_mut().zip(p) {
            *c += w * x;
        }
    }
    for c in &mut centroid {
        *c /= total_weight;
    }

    let centered: Vec<Vec<f64>> = pc
        .iter_points()
        .map(|p| p.iter().zip(&centroid).map(|(x, c)| x - c).collect())
        .collect();

    let scale = match mode {
        ScaleMode::None => 1.0,
        ScaleMode::UnitMeanDistance => {
            let mean_dist: f64 = centered
                .iter()
                .zip(pc.weights())
                .map(|(p, &w)| w * norm(p))
                .sum::<f64>()
                / total_weight;
            let floor = 1e-12 * (1.0 + norm(&centroid));
            if mean_dist <= floor {
                return Err(Error::ZeroScale);
            }
            mean_dist
        }
    };

    let points: Vec<Vec<f64>> = centered
        .into_iter()
        .map(|p| p.into_iter().map(|x| x / scale).collect())
        .collect();
    let cloud = PointCloud::new(n, points, pc.values().to_vec(), pc.weights().to_vec())?;
    Ok((
        cloud,
        NormalizationRecord {
            centroid,
            scale,
            mode,
        },
    ))
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Radius-dependent factor folded into the fitted function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadialWeight {
    #[serde(rename = "none")]
    None,
    /// `exp(-|x|^2)`
    #[serde(rename = "gauss")]
    Gaussian,
    /// `exp(-|x|)`
    #[serde(rename = "exp")]
    Exponential,
}

impl RadialWeight {
    fn factor(&self, r: f64) -> f64 {
        match self {
            RadialWeight::None => 1.0,
            RadialWeight::Gaussian => (-r * r).exp(),
            RadialWeight::Exponential => (-r).exp(),
        }
    }
}

/// Ridge strength: automatic (`1e-8` times the mean squared column norm of
/// the solve matrix) or an explicit value, with `0` for exact fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    Auto,
    Value(f64),
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub max_degree: usize,
    pub ridge: Ridge,
    pub radial_weight: RadialWeight,
    /// Restrict the basis to degrees `D-1` and `D` evaluated on unit
    /// directions.
    pub spherical: bool,
}

impl FitConfig {
    pub fn new(max_degree: usize) -> Self {
        Self {
            max_degree,
            ridge: Ridge::Auto,
            radial_weight: RadialWeight::None,
            spherical: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_degree < 1 {
            return Err(Error::InvalidConfig("max degree must be at least 1".into()));
        }
        if self.spherical && self.max_degree < 2 {
            return Err(Error::InvalidConfig(
                "spherical fits need max degree at least 2".into(),
            ));
        }
        if let Ridge::Value(c) = self.ridge {
            if c.is_nan() || c < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "ridge must be non-negative, got {c}"
                )));
            }
        }
        Ok(())
    }

    /// Basis exponents in catalog order: all `|l| <= D`, or `|l|` in
    /// `{D-1, D}` for spherical mode.
    pub fn basis_exponents(&self, dimension: usize) -> Vec<Exponent> {
        let degrees: Vec<usize> = if self.spherical {
            vec![self.max_degree - 1, self.max_degree]
        } else {
            (0..=self.max_degree).collect()
        };
        degrees
            .into_iter()
            .flat_map(|d| enumerate_exponents(dimension, d))
            .collect()
    }
}

/// The rectangular system `(M, b)`: one row per point with monomial columns
/// scaled by `sqrt(weight)` and the radial factor, and `b_i = sqrt(w_i) y_i`.
pub fn design_matrix(pc: &PointCloud, cfg: &FitConfig) -> Result<(DMatrix<f64>, DVector<f64>)> {
    cfg.validate()?;
    let exponents = cfg.basis_exponents(pc.dimension());
    let rows = pc.len();

    let build_row = |i: usize| -> Result<Vec<f64>> {
        let raw = pc.point(i);
        let r = norm(raw);
        let projected: Vec<f64>;
        let x: &[f64] = if cfg.spherical {
            if r == 0.0 {
                return Err(Error::OriginPoint { index: i });
            }
            projected = raw.iter().map(|v| v / r).collect();
            &projected
        } else {
            raw
        };
        let row_scale = pc.weights()[i].sqrt() * cfg.radial_weight.factor(r);
        Ok(exponents
            .iter()
            .map(|e| row_scale * e.monomial(x))
            .collect())
    };

    #[cfg(feature = "parallel")]
    let row_data: Vec<Vec<f64>> = (0..rows)
        .into_par_iter()
        .map(build_row)
        .collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let row_data: Vec<Vec<f64>> = (0..rows).map(build_row).collect::<Result<_>>()?;

    let m = DMatrix::from_fn(rows, exponents.len(), |i, j| row_data[i][j]);
    let b = DVector::from_fn(rows, |i, _| pc.weights()[i].sqrt() * pc.values()[i]);
    Ok((m, b))
}

/// Rank, residual norm, and condition number of a solved system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub rank: usize,
    pub residual: f64,
    pub condition: f64,
}

/// Minimize `|Ma - b|^2 + c |a|_V^2` over polynomial coefficients, where
/// `|.|_V` is the rotation-invariant vectorization norm. Rank deficiency is
/// handled by the pseudo-inverse and reported in the diagnostics.
pub fn fit(pc: &PointCloud, cfg: &FitConfig) -> Result<(Polynomial, FitDiagnostics)> {
    cfg.validate()?;
    let (m, b) = design_matrix(pc, cfg)?;
    let exponents = cfg.basis_exponents(pc.dimension());

    // Change to the sqrt(N_l)-scaled coordinates where rotation is
    // orthogonal on coefficients.
    let col_scales: Vec<f64> = exponents
        .iter()
        .map(|e| multinomial_weight_f64(e).sqrt())
        .collect();
    let mut scaled = m.clone();
    for (j, &s) in col_scales.iter().enumerate() {
        scaled.column_mut(j).scale_mut(s);
    }

    let ridge = match cfg.ridge {
        Ridge::Value(c) => c,
        Ridge::Auto => {
            let mean_sq_col: f64 =
                scaled.iter().map(|v| v * v).sum::<f64>() / scaled.ncols() as f64;
            1e-8 * mean_sq_col
        }
    };

    let (solution, mut diagnostics) = solve_ridge_svd(&scaled, &b, ridge);
    let coeffs: Vec<f64> = solution
        .iter()
        .zip(&col_scales)
        .map(|(v, s)| v * s)
        .collect();

    diagnostics.residual = (&m * DVector::from_row_slice(&coeffs) - &b).norm();

    let mut poly = Polynomial::zero(pc.dimension(), cfg.max_degree);
    for (e, c) in exponents.iter().zip(coeffs) {
        poly.set_coeff(e, c)?;
    }
    Ok((poly, diagnostics))
}

/// Pseudo-inverse solve of `min |Ma - b|^2 + ridge |a|^2` with singular
/// values below `SVD_CUTOFF * sigma_max` treated as zero.
pub(crate) fn solve_ridge_svd(
    m: &DMatrix<f64>,
    b: &DVector<f64>,
    ridge: f64,
) -> (DVector<f64>, FitDiagnostics) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd requested u");
    let v_t = svd.v_t.as_ref().expect("svd requested v_t");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().fold(0.0f64, |m, &s| m.max(s));
    let cutoff = SVD_CUTOFF * sigma_max;

    let projected = u.transpose() * b;
    let mut kept = 0usize;
    let mut sigma_min = f64::INFINITY;
    let mut z = DVector::zeros(sigma.len());
    for i in 0..sigma.len() {
        let s = sigma[i];
        if s > cutoff && s > 0.0 {
            kept += 1;
            sigma_min = sigma_min.min(s);
            z[i] = projected[i] * s / (s * s + ridge);
        }
    }
    let solution = v_t.transpose() * z;
    let condition = if kept == 0 { 0.0 } else { sigma_max / sigma_min };
    (
        solution,
        FitDiagnostics {
            rank: kept,
            residual: 0.0,
            condition,
        },
    )
}

/// Fit a spherical envelope: each point is projected to its direction and
/// the target becomes its distance, using only degrees `D-1` and `D`.
pub fn fit_spherical(
    pc: &PointCloud,
    max_degree: usize,
    ridge: Ridge,
) -> Result<(Polynomial, FitDiagnostics)> {
    let mut directions = Vec::with_capacity(pc.len());
    let mut radii = Vec::with_capacity(pc.len());
    for (index, p) in pc.iter_points().enumerate() {
        let r = norm(p);
        if r == 0.0 {
            return Err(Error::OriginPoint { index });
        }
        directions.push(p.iter().map(|v| v / r).collect());
        radii.push(r);
    }
    let projected = PointCloud::new(pc.dimension(), directions, radii, pc.weights().to_vec())?;
    let cfg = FitConfig {
        max_degree,
        ridge,
        radial_weight: RadialWeight::None,
        spherical: true,
    };
    fit(&projected, &cfg)
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Parse point CSV: `x1,...,xn[,value[,weight]]` per row, `#` comments.
///
/// With `dim` given, rows may carry one extra field (value) or two (value
/// then weight). Without it, every field is a coordinate and value and
/// weight default to 1.
pub fn parse_point_csv(text: &str, dim: Option<usize>) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut values = Vec::new();
    let mut weights = Vec::new();
    let mut inferred_dim = dim;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("cannot parse `{}` as a number", f.trim()),
                })
            })
            .collect::<Result<_>>()?;
        let n = match inferred_dim {
            Some(n) => n,
            None => {
                inferred_dim = Some(fields.len());
                fields.len()
            }
        };
        if fields.len() < n || fields.len() > n + 2 {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "expected {n} coordinates plus optional value and weight, got {} fields",
                    fields.len()
                ),
            });
        }
        points.push(fields[..n].to_vec());
        values.push(fields.get(n).copied().unwrap_or(1.0));
        let weight = fields.get(n + 1).copied().unwrap_or(1.0);
        if weight.is_nan() || weight <= 0.0 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("weight must be positive, got {weight}"),
            });
        }
        weights.push(weight);
    }
    let n = inferred_dim.ok_or(Error::EmptyCloud)?;
    PointCloud::new(n, points, values, weights)
}

/// Render a cloud as CSV with explicit value and weight columns.
pub fn write_point_csv(pc: &PointCloud) -> String {
    let mut out = String::new();
    for i in 0..pc.len() {
        let coords: Vec<String> = pc.point(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&coords.join(","));
        out.push_str(&format!(",{},{}\n", pc.values()[i], pc.weights()[i]));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct XyzAtom {
    pub symbol: String,
    pub position: [f64; 3],
}

/// An XYZ molecule file: atom count, comment line, then `El x y z` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct XyzFile {
    pub comment: String,
    pub atoms: Vec<XyzAtom>,
}

impl XyzFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let count_line = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing atom count".into(),
        })?;
        let count: usize = count_line.trim().parse().map_err(|_| Error::Parse {
            line: 1,
            message: format!("cannot parse atom count `{}`", count_line.trim()),
        })?;
        let comment = lines.next().unwrap_or("").to_string();
        let mut atoms = Vec::with_capacity(count);
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 3;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected `El x y z`, got {} fields", fields.len()),
                });
            }
            let mut position = [0.0; 3];
            for (slot, field) in position.iter_mut().zip(&fields[1..]) {
                *slot = field.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("cannot parse coordinate `{field}`"),
                })?;
            }
            atoms.push(XyzAtom {
                symbol: fields[0].to_string(),
                position,
            });
        }
        if atoms.len() != count {
            return Err(Error::Parse {
                line: 1,
                message: format!("header declares {count} atoms, found {}", atoms.len()),
            });
        }
        Ok(Self { comment, atoms })
    }

    pub fn write(&self) -> String {
        let mut out = format!("{}\n{}\n", self.atoms.len(), self.comment);
        for atom in &self.atoms {
            out.push_str(&format!(
                "{} {} {} {}\n",
                atom.symbol, atom.position[0], atom.position[1], atom.position[2]
            ));
        }
        out
    }
}

/// Where point values come from for molecule input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueSource {
    One,
    Mass,
}

/// Standard atomic weights for the supported elements.
pub fn atomic_mass(symbol: &str) -> Option<f64> {
    Some(match symbol {
        "H" => 1.008,
        "C" => 12.011,
        "N" => 14.007,
        "O" => 15.999,
        "S" => 32.06,
        "P" => 30.974,
        "F" => 18.998,
        "Cl" => 35.45,
        "Br" => 79.904,
        "I" => 126.904,
        _ => return None,
    })
}

/// Convert parsed atoms to a weighted cloud, one point per atom.
pub fn xyz_to_cloud(xyz: &XyzFile, source: ValueSource) -> Result<PointCloud> {
    let points: Vec<Vec<f64>> = xyz.atoms.iter().map(|a| a.position.to_vec()).collect();
    let values: Vec<f64> = xyz
        .atoms
        .iter()
        .map(|a| match source {
            ValueSource::One => Ok(1.0),
            ValueSource::Mass => atomic_mass(&a.symbol).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "no atomic mass for element `{}`; use the unit value source",
                    a.symbol
                ))
            }),
        })
        .collect::<Result<_>>()?;
    let count = points.len();
    PointCloud::new(3, points, values, vec![1.0; count])
}

//! The README library example, kept compiling.

use rotinv::catalog::{feature_vector, CatalogConfig};
use rotinv::fitting::{fit, normalize, FitConfig, PointCloud, ScaleMode};

fn shape_features() -> rotinv::Result<usize> {
    let cloud = PointCloud::from_points(
        2,
        vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, 0.0],
            vec![0.0, -1.0],
        ],
    )?;
    let (centered, _) = normalize(&cloud, ScaleMode::UnitMeanDistance)?;
    let (poly, diagnostics) = fit(&centered, &FitConfig::new(2))?;
    let features = feature_vector(&poly, &CatalogConfig::default())?;
    assert!(diagnostics.residual < 1e-8);
    Ok(features.len())
}

#[test]
fn readme_example_runs() {
    assert!(shape_features().unwrap() >= 4);
}

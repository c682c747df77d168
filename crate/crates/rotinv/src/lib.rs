//! Rotation-invariant features of multivariate polynomials.
//!
//! Fits polynomials `p: R^n -> R` to weighted point data and extracts
//! feature vectors that do not change when the data is rotated or
//! reflected. Invariants are built as fully contracted tensor diagrams
//! over the polynomial's symmetric coefficient tensors: every connected
//! contraction graph yields one invariant, giving `O(n^D)` features per
//! polynomial where classical cylindrical or spherical harmonics offer one
//! per degree.
//!
//! Module map:
//! - [`tensor_poly`]: graded coefficient storage, evaluation, rotation,
//!   vectorization.
//! - [`contraction`]: contraction graphs, their evaluation, canonical
//!   forms, and enumeration up to isomorphism.
//! - [`catalog`]: the named invariant families and deterministic feature
//!   vectors, plus the degree-2 canonical reconstruction.
//! - [`fitting`]: point-cloud ingestion, normalization, and ridge
//!   least-squares fitting (dense or spherical-envelope).
//! - [`harmonics`]: cylindrical and spherical harmonic baselines with
//!   their per-degree `A_l` invariants.
//!
//! Batch entry points ([`catalog::batch_feature_vectors`],
//! [`contraction::evaluate_graphs`]) run data-parallel under the `parallel`
//! feature (on by default) and fall back to sequential loops without it;
//! results are identical either way.

pub mod catalog;
pub mod contraction;
pub mod error;
pub mod fitting;
pub mod harmonics;
pub mod tensor_poly;

pub use error::{Error, Result};

pub use catalog::{CatalogConfig, FeatureEntry, FeatureMeta, FeatureVector};
pub use contraction::{CanonicalForm, ContractionGraph, PartRef};
pub use fitting::{FitConfig, FitDiagnostics, NormalizationRecord, PointCloud, Ridge, ScaleMode};
pub use harmonics::{HarmonicExpansion, HarmonicKind};
pub use tensor_poly::{Exponent, HomogeneousPart, OrthogonalMatrix, Polynomial};

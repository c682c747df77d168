//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degree mismatch: expected {expected}, got {got}")]
    DegreeMismatch { expected: usize, got: usize },

    #[error("matrix is not orthogonal: max |O^T O - I| entry is {deviation:.3e}, limit {limit:.1e}")]
    NotOrthogonal { deviation: f64, limit: f64 },

    #[error("multinomial weight overflows for exponent of degree {degree}")]
    WeightOverflow { degree: usize },

    #[error("vertex {vertex} has {endpoints} edge endpoints but references a degree-{degree} part")]
    SlotMismatch {
        vertex: usize,
        endpoints: usize,
        degree: usize,
    },

    #[error("edge ({a}, {b}) references a vertex outside 0..{vertices}")]
    DanglingEdge { a: usize, b: usize, vertices: usize },

    #[error("graph references polynomial slot {slot} but only {available} polynomials were supplied")]
    MissingPolynomial { slot: usize, available: usize },

    #[error("graph has {vertices} vertices, above the brute-force cap of {limit}")]
    TooManyVertices { vertices: usize, limit: usize },

    #[error("graph spec asks for {slots} index slots, above the cap of {limit}")]
    TooManySlots { slots: usize, limit: usize },

    #[error("contraction would materialize a tensor of {elements} elements, above the cap of {limit}")]
    ContractionTooLarge { elements: u128, limit: u128 },

    #[error("empty graph spec")]
    EmptySpec,

    #[error("total slot count {slots} is odd, no full contraction exists")]
    OddSlotCount { slots: usize },

    #[error("invalid graph spec: {0}")]
    GraphSpec(String),

    #[error("mixed power {power} is outside 0..{dimension}")]
    InvalidMixedPower { power: usize, dimension: usize },

    #[error("feature vectors do not share a catalog: {0}")]
    CatalogMismatch(String),

    #[error("feature vector is missing entry `{0}`")]
    MissingFeature(String),

    #[error("degenerate eigenspectrum: relative gap {gap:.3e} below {limit:.1e}, no unique canonical form")]
    DegenerateSpectrum { gap: f64, limit: f64 },

    #[error("inconsistent features: recovered squared coefficient {value:.3e} is negative")]
    InconsistentFeatures { value: f64 },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("weights must be positive, found {value} at point {index}")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("all points coincide with the centroid, cannot normalize to unit mean distance")]
    ZeroScale,

    #[error("point {index} is at the origin and has no direction")]
    OriginPoint { index: usize },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("expected a {expected} expansion, got {got}")]
    KindMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("harmonic degree {l} is unsupported, the basis table stops at l = {max}")]
    UnsupportedHarmonic { l: usize, max: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

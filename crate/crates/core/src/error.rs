//! Error type shared by the geometry, bundle and map layers.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("point {coords:?} lies outside the domain of chart `{chart}`")]
    OutsideDomain { chart: String, coords: Vec<f64> },

    #[error("metric of chart `{chart}` is not symmetric at {coords:?} (|g - g^T| = {defect:.3e})")]
    AsymmetricMetric { chart: String, coords: Vec<f64>, defect: f64 },

    #[error("metric of chart `{chart}` is not positive definite at {coords:?} (min eigenvalue {min_eig:.3e})")]
    NotPositiveDefinite { chart: String, coords: Vec<f64>, min_eig: f64 },

    #[error("metric of chart `{chart}` is singular at {coords:?}")]
    SingularMetric { chart: String, coords: Vec<f64> },

    #[error("chart mismatch: expected `{expected}`, got `{got}`")]
    ChartMismatch { expected: String, got: String },

    #[error("objects are based at different points: {a:?} vs {b:?}")]
    BasePointMismatch { a: Vec<f64>, b: Vec<f64> },

    #[error("frame is rank deficient: vector {index} has residual norm {residual:.3e}")]
    DegenerateFrame { index: usize, residual: f64 },

    #[error("invalid Cheeger-Gromoll parameters: {reason}")]
    InvalidParams { reason: String },

    #[error("map `{map}` is not a submersion at {coords:?} (rank {rank}, need {need})")]
    NotSubmersion { map: String, coords: Vec<f64>, rank: usize, need: usize },

    #[error("map `{map}` is critical at {coords:?}")]
    CriticalPoint { map: String, coords: Vec<f64> },

    #[error("vector is not horizontal at {coords:?} (vertical component {magnitude:.3e})")]
    NotHorizontal { coords: Vec<f64>, magnitude: f64 },

    #[error("no tangent vector maps onto the requested target: {reason}")]
    RankError { reason: String },

    #[error("dilatation unavailable at {coords:?}: {reason}")]
    DilatationUnavailable { coords: Vec<f64>, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;

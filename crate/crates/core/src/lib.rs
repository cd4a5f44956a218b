//! Chart-based numerical differential geometry laboratory.
//!
//! The crate builds up, layer by layer, the machinery needed to study the
//! differential `Phi = phi_*: TM -> TN` of a smooth map between Riemannian
//! manifolds when both tangent bundles carry Cheeger-Gromoll type metrics
//! `h_{p,q,alpha}`:
//!
//! - [`jet`]: forward-mode truncated Taylor arithmetic (derivatives to order 3),
//! - [`geometry`]: single-chart manifolds, metrics, Christoffel symbols,
//!   curvature, brackets and frames,
//! - [`bundle`]: the tangent bundle in induced coordinates, lifts, the
//!   connection map, the `h_{p,q,alpha}` family and its Levi-Civita connection,
//! - [`maps`]: smooth maps with second-order jets, the second fundamental
//!   form, tension, dilatation, integrability tensor and fiber curvature,
//! - [`lift`]: the lifted map `Phi` and the splitting of `T(TM)` it induces,
//! - [`certify`]: pointwise horizontal-conformality verdicts and
//!   harmonic-morphism certification,
//! - [`catalog`] and [`scenario`]: built-in example geometries and the
//!   deterministic, seeded verification suites over them.
//!
//! Everything is plain `f64` over immutable data; all operations are pure
//! functions and safe to call concurrently.

pub mod bundle;
pub mod catalog;
pub mod certify;
pub mod error;
pub mod fd;
pub mod geometry;
pub mod jet;
pub mod lift;
pub mod maps;
pub mod sample;
pub mod scenario;

pub use bundle::{BundlePoint, CGParams, SecondTangent};
pub use error::{GeomError, Result};
pub use geometry::{Chart, Point, Tangent, VectorField};
pub use jet::{Jet, JetSpace};
pub use lift::{LiftedMap, SplitBasis};
pub use maps::{ConformalityVerdict, MapJet, MapPointData};

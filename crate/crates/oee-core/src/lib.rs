//! Observable-enriched entanglement for four-band Bogoliubov-de Gennes models.
//!
//! The library is generic over the real scalar ([`Real`], implemented for `f32`
//! and `f64`); the crate root re-exports `f64` aliases for the common types.

// `!(x > tol)` is deliberate: NaN must land on the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// index loops mirror the matrix formulas they implement
#![allow(clippy::needless_range_loop)]

pub mod bulk;
pub mod entanglement;
pub mod error;
pub mod io;
pub mod linalg;
pub mod models;
pub mod realspace;
pub mod scalar;
pub mod topology;

pub use error::{OeeError, Result};
pub use scalar::Real;

pub type ModelSpec = models::ModelSpec<f64>;
pub type Momentum = models::Momentum<f64>;
pub type SpinTexture = bulk::SpinTexture<f64>;
pub type InvariantResult = topology::InvariantResult<f64>;
pub type PhaseDiagram = topology::PhaseDiagram<f64>;
pub type HoppingSet = realspace::HoppingSet<f64>;
pub type SlabHamiltonian = realspace::SlabHamiltonian<f64>;
pub type SpectrumSeries = realspace::SpectrumSeries<f64>;
pub type LocalizationProfile = realspace::LocalizationProfile<f64>;
pub type EntanglementSpectrum = entanglement::EntanglementSpectrum<f64>;
pub type ChiralModeCount = entanglement::ChiralModeCount<f64>;

pub use bulk::BZGrid;
pub use entanglement::{CutSpec, EdgeTag, Geometry};
pub use realspace::Boundary;

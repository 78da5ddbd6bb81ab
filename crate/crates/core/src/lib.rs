//! Cohomogeneity-one expanding gradient Ricci solitons: the soliton ODEs in
//! arclength and in phase variables, series startup at the singular orbit,
//! RK4 integration, runtime checks of the known a-priori properties and
//! asymptotic fits.

pub mod asymptotics;
pub mod error;
pub mod integrator;
pub mod model;
pub mod monitors;
pub mod phase;
pub mod physical;
pub mod series;

pub use error::{Error, Result};
pub use model::{OrbitKind, OrbitModel, SolitonNormalization, WarpedFactor};

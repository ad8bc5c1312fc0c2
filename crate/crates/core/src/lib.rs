//! Fisher-Rao geometry of the beta manifold and canonical moments of
//! probability measures on a compact interval.

pub mod canonical;
pub mod embedding;
pub mod error;
pub mod frechet;
pub mod geodesy;
pub(crate) mod ode;
pub mod metric;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
pub use metric::{BetaPoint, ChristoffelCoeffs, MetricTensor};

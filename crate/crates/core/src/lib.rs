//! Fourth-order summation-by-parts finite differences for the 3D elastic wave
//! equation on curvilinear two-block grids joined by a non-conforming 1:2
//! mesh-refinement interface.
//!
//! Core types are generic over the scalar; the aliases at the bottom fix the
//! common choices.

pub mod error;
pub mod scalar;
pub mod geometry;
pub mod sbp1d;
pub mod elastic3d;
pub mod interface;
pub mod krylov;
pub mod timestepper;
pub mod diagnostics;
pub mod scenarios;

pub use error::{Error, Result};
pub use scalar::{Real, Scalar};

pub type Rational = num_rational::BigRational;

pub type Sbp1D64 = sbp1d::Sbp1D<f64>;
pub type Sbp1DExact = sbp1d::Sbp1D<Rational>;
pub type Block64 = elastic3d::Block<f64>;
pub type StateField64 = elastic3d::StateField<f64>;
pub type Interface64 = interface::Interface<f64>;
pub type Model64 = timestepper::Model<f64>;

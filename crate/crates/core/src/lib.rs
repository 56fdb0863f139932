//! Deterministic acceptance-rejection sampling on `[0, 1]` driven by
//! low-discrepancy point sets in the unit square.
//!
//! The pipeline is: build a [`density::Density`], generate a
//! [`driver::DriverSet`], accept points with [`sampler::ar_deterministic`],
//! then measure the result with [`discrepancy`], [`criterion`] and
//! [`integration`]. [`experiments`] runs whole convergence sweeps.

pub mod criterion;
pub mod density;
pub mod discrepancy;
pub mod driver;
pub mod error;
pub mod experiments;
pub mod integration;
pub mod io;
pub mod quad;
pub mod sampler;

pub use density::{make_builtin, Density};
pub use driver::{DriverSet, DriverSpec, Family, Point2};
pub use error::{Error, Result};
pub use sampler::SampleSet;

//! Acceptance-rejection with a uniform proposal.
//!
//! A driver point `(x1, x2)` is accepted iff `psi(x1) >= L * x2`, and the
//! accepted points are projected onto their first coordinate.

use serde::Serialize;

use crate::density::Density;
use crate::driver::{self, Point2};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    /// Accepted first coordinates, in driver order.
    pub samples: Vec<f64>,
    pub proposed: usize,
    pub bound: f64,
    pub density: String,
}

impl SampleSet {
    pub fn accepted(&self) -> usize {
        self.samples.len()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted() as f64 / self.proposed as f64
        }
    }
}

/// The accept predicate; ties accept.
#[inline]
pub fn accepts(density: &Density, p: &Point2) -> bool {
    density.eval(p.x1) >= density.bound() * p.x2
}

/// Deterministic acceptance-rejection over the given driver points.
pub fn ar_deterministic(density: &Density, points: &[Point2]) -> SampleSet {
    let samples = points.iter().filter(|p| accepts(density, p)).map(|p| p.x1).collect();
    SampleSet {
        samples,
        proposed: points.len(),
        bound: density.bound(),
        density: density.name().to_string(),
    }
}

/// Classical acceptance-rejection: `X, u ~ U[0,1)`, accept `X` if `u <= psi(X) / L`.
///
/// `u <= psi(X)/L` is the same event as `(X, u)` lying in the acceptance
/// region, so this runs the deterministic sampler on a seeded random driver.
pub fn ar_randomized(density: &Density, m: u64, seed: u64) -> Result<SampleSet> {
    let drv = driver::random_driver(m, seed)?;
    Ok(ar_deterministic(density, &drv.points))
}

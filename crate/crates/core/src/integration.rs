//! Quasi-Monte Carlo integration against `psi / C` and the Koksma-Hlawka bound
//! `|estimate - reference| <= V(f) * D*_{N,psi}` with `V(f) = int_0^1 |f'|`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::density::Density;
use crate::discrepancy::star_discrepancy_1d;
use crate::error::{Error, Result};
use crate::quad::{self, NeumaierSum};
use crate::sampler::SampleSet;

pub const BUILTIN_INTEGRANDS: [&str; 5] = ["1", "x", "x2", "xc2", "sinpi"];

/// Number of cells scanned for sign changes of `f'`.
const SIGN_SCAN: usize = 1000;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Integrand {
    name: String,
    eval: RealFn,
    derivative: Option<RealFn>,
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Integrand")
            .field("name", &self.name)
            .field("has_derivative", &self.derivative.is_some())
            .finish()
    }
}

impl Integrand {
    pub fn new(name: impl Into<String>, eval: RealFn, derivative: Option<RealFn>) -> Self {
        Integrand {
            name: name.into(),
            eval,
            derivative,
        }
    }

    /// Built-ins: `1`, `x`, `x2` (x^2), `xc2` ((x - 1/2)^2), `sinpi` (sin(pi x)).
    pub fn builtin(name: &str) -> Result<Self> {
        let (f, df): (RealFn, RealFn) = match name {
            "1" => (Arc::new(|_| 1.0), Arc::new(|_| 0.0)),
            "x" => (Arc::new(|x| x), Arc::new(|_| 1.0)),
            "x2" => (Arc::new(|x| x * x), Arc::new(|x| 2.0 * x)),
            "xc2" => (Arc::new(|x| (x - 0.5) * (x - 0.5)), Arc::new(|x| 2.0 * x - 1.0)),
            "sinpi" => (Arc::new(|x| (PI * x).sin()), Arc::new(|x| PI * (PI * x).cos())),
            _ => {
                return Err(Error::UnknownName {
                    kind: "integrand",
                    name: name.to_string(),
                    valid: BUILTIN_INTEGRANDS.join(", "),
                })
            }
        };
        Ok(Integrand::new(name, f, Some(df)))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegrationReport {
    pub integrand: String,
    pub density: String,
    pub estimate: f64,
    pub reference: f64,
    pub abs_error: f64,
    pub variation: f64,
    pub dstar: f64,
    /// `variation * dstar`.
    pub bound: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

impl IntegrationReport {
    pub fn within_bound(&self) -> bool {
        self.abs_error <= self.bound * (1.0 + 1e-9) + 1e-15
    }
}

/// `(1/N) sum_j f(y_j)`.
pub fn qmc_estimate(f: &Integrand, set: &SampleSet) -> Result<f64> {
    if set.samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let s: NeumaierSum = set.samples.iter().map(|&y| f.eval(y)).collect();
    Ok(s.total() / set.samples.len() as f64)
}

/// `(1/C) int_0^1 f psi`, integrating each smooth piece of `psi` separately.
pub fn reference_integral(f: &Integrand, density: &Density) -> Result<f64> {
    let v = quad::integrate_checked(|x| f.eval(x) * density.eval(x), &density.pieces_up_to(1.0), quad::DEFAULT_TOL)?;
    Ok(v / density.norm())
}

/// `int_0^1 |f'|`, split at the sign changes of `f'`.
pub fn hk_variation(f: &Integrand) -> Result<f64> {
    let df = f
        .derivative
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter(format!("integrand `{}` has no derivative", f.name)))?;
    let mut breaks = vec![0.0];
    let mut prev = df(0.0);
    for i in 1..=SIGN_SCAN {
        let b = i as f64 / SIGN_SCAN as f64;
        let fb = df(b);
        if prev != 0.0 && fb != 0.0 && (prev < 0.0) != (fb < 0.0) {
            let (mut lo, mut hi) = ((i - 1) as f64 / SIGN_SCAN as f64, b);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if (df(mid) < 0.0) == (prev < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            breaks.push(0.5 * (lo + hi));
        } else if fb == 0.0 && i < SIGN_SCAN {
            breaks.push(b);
        }
        if fb != 0.0 {
            prev = fb;
        }
    }
    breaks.push(1.0);
    breaks.dedup();
    quad::integrate_checked(|x| df(x).abs(), &breaks, quad::DEFAULT_TOL)
}

/// Estimate, reference, variation and discrepancy for one sample set.
pub fn integration_report(f: &Integrand, density: &Density, set: &SampleSet) -> Result<IntegrationReport> {
    let estimate = qmc_estimate(f, set)?;
    let reference = reference_integral(f, density)?;
    let variation = hk_variation(f)?;
    let dstar = star_discrepancy_1d(density, set)?.value;
    Ok(IntegrationReport {
        integrand: f.name.clone(),
        density: density.name().to_string(),
        estimate,
        reference,
        abs_error: (estimate - reference).abs(),
        variation,
        dstar,
        bound: variation * dstar,
        n: set.samples.len(),
    })
}

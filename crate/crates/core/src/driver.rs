//! Driver point sets in the unit square.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest and largest accepted Fibonacci index.
pub const FIBONACCI_K_MIN: u32 = 3;
pub const FIBONACCI_K_MAX: u32 = 87;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x1: f64,
    pub x2: f64,
}

impl Point2 {
    pub fn new(x1: f64, x2: f64) -> Self {
        Point2 { x1, x2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Fibonacci,
    Kronecker,
    Grid,
    Random,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Fibonacci, Family::Kronecker, Family::Grid, Family::Random];

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Fibonacci => "fibonacci",
            Family::Kronecker => "kronecker",
            Family::Grid => "grid",
            Family::Random => "random",
        }
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self, Family::Random)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "driver family",
                name: s.to_string(),
                valid: "fibonacci, kronecker, grid, random".into(),
            })
    }
}

/// Everything needed to regenerate a driver set bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriverSpec {
    pub family: Family,
    /// `k` for the Fibonacci family, `M` otherwise.
    pub parameter: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl DriverSpec {
    pub fn generate(&self) -> Result<DriverSet> {
        match self.family {
            Family::Fibonacci => {
                let k = u32::try_from(self.parameter).map_err(|_| Error::out_of_domain("k", self.parameter, "[3, 87]"))?;
                fibonacci_lattice(k)
            }
            Family::Kronecker => kronecker(self.parameter, &CubicBasis::new()?),
            Family::Grid => regular_grid(self.parameter),
            Family::Random => {
                let seed = self
                    .seed
                    .ok_or_else(|| Error::InvalidParameter("the random family requires a seed".into()))?;
                random_driver(self.parameter, seed)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverSet {
    pub spec: DriverSpec,
    pub points: Vec<Point2>,
}

impl DriverSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn family(&self) -> Family {
        self.spec.family
    }
}

/// `F_1 = F_2 = 1`, `F_k = F_{k-1} + F_{k-2}`.
pub fn fibonacci(k: u32) -> u128 {
    let (mut a, mut b) = (0u128, 1u128);
    for _ in 0..k {
        (a, b) = (b, a + b);
    }
    a
}

/// The lattice `(j / F_k, {j F_{k-1} / F_k})`, `j = 1..F_k`.
///
/// The second coordinate is reduced in integer arithmetic before the single
/// division, so both coordinates are correctly rounded rationals.
pub fn fibonacci_lattice(k: u32) -> Result<DriverSet> {
    if !(FIBONACCI_K_MIN..=FIBONACCI_K_MAX).contains(&k) {
        return Err(Error::out_of_domain("k", k, "[3, 87]"));
    }
    let n = fibonacci(k);
    let g = fibonacci(k - 1);
    let len = usize::try_from(n).map_err(|_| Error::InvalidParameter(format!("F_{k} points do not fit in memory")))?;
    let nf = n as f64;
    let mut points = Vec::with_capacity(len);
    let mut r = 0u128;
    for j in 1..=n {
        r += g;
        if r >= n {
            r -= n;
        }
        points.push(Point2::new(j as f64 / nf, r as f64 / nf));
    }
    Ok(DriverSet {
        spec: DriverSpec {
            family: Family::Fibonacci,
            parameter: k as u64,
            seed: None,
        },
        points,
    })
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Real root `xi` of `x^3 + 2x + 2` by Newton's method from `-0.75`.
pub fn root_of_cubic() -> Result<f64> {
    let mut x: f64 = -0.75;
    for _ in 0..100 {
        let step = (x * x * x + 2.0 * x + 2.0) / (3.0 * x * x + 2.0);
        x -= step;
        if step.abs() <= 4.0 * f64::EPSILON {
            return Ok(x);
        }
    }
    Err(Error::InvalidParameter("Newton iteration for x^3 + 2x + 2 did not converge".into()))
}

/// `(alpha, beta) = (xi, xi^2)` stored as unevaluated double-double sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicBasis {
    pub xi: f64,
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
}

impl CubicBasis {
    pub fn new() -> Result<Self> {
        let xi = root_of_cubic()?;
        // One Newton correction with the residual evaluated in double-double.
        let (sq, sq_e) = two_prod(xi, xi);
        let (cube, cube_e) = two_prod(xi, sq);
        let cube_e = cube_e + xi * sq_e;
        let (s, e1) = two_sum(cube, 2.0 * xi);
        let (s, e2) = two_sum(s, 2.0);
        let residual = s + (e1 + e2 + cube_e);
        let lo = -residual / (3.0 * xi * xi + 2.0);
        let (b_hi, b_lo) = two_sum(sq, sq_e + 2.0 * xi * lo);
        Ok(CubicBasis {
            xi,
            alpha: (xi, lo),
            beta: (b_hi, b_lo),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.0
    }

    pub fn beta(&self) -> f64 {
        self.beta.0
    }
}

/// `{j * (hi + lo)}` with the product error carried through the floor.
#[inline]
fn frac_mul(j: f64, (hi, lo): (f64, f64)) -> f64 {
    let (p, e) = two_prod(j, hi);
    let e = e + j * lo;
    let mut r = (p - p.floor()) + e;
    if r < 0.0 {
        r += 1.0;
    }
    if r >= 1.0 {
        r -= 1.0;
    }
    r
}

/// `({j alpha}, {j beta})`, `j = 1..M`.
pub fn kronecker(m: u64, basis: &CubicBasis) -> Result<DriverSet> {
    if m == 0 {
        return Err(Error::out_of_domain("M", m, "[1, inf)"));
    }
    let points = (1..=m)
        .map(|j| {
            let j = j as f64;
            Point2::new(frac_mul(j, basis.alpha), frac_mul(j, basis.beta))
        })
        .collect();
    Ok(DriverSet {
        spec: DriverSpec {
            family: Family::Kronecker,
            parameter: m,
            seed: None,
        },
        points,
    })
}

/// `(j / n, m / n)` for `j, m = 1..n` with `n = floor(sqrt(M))`, `j` outermost.
pub fn regular_grid(m: u64) -> Result<DriverSet> {
    if m == 0 {
        return Err(Error::out_of_domain("M", m, "[1, inf)"));
    }
    let n = m.isqrt();
    let nf = n as f64;
    let mut points = Vec::with_capacity((n * n) as usize);
    for j in 1..=n {
        for i in 1..=n {
            points.push(Point2::new(j as f64 / nf, i as f64 / nf));
        }
    }
    Ok(DriverSet {
        spec: DriverSpec {
            family: Family::Grid,
            parameter: m,
            seed: None,
        },
        points,
    })
}

/// `M` pairs of independent uniforms in `[0, 1)` from ChaCha20 seeded with `seed`.
pub fn random_driver(m: u64, seed: u64) -> Result<DriverSet> {
    if m == 0 {
        return Err(Error::out_of_domain("M", m, "[1, inf)"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let points = (0..m)
        .map(|_| {
            let x1: f64 = rng.gen();
            let x2: f64 = rng.gen();
            Point2::new(x1, x2)
        })
        .collect();
    Ok(DriverSet {
        spec: DriverSpec {
            family: Family::Random,
            parameter: m,
            seed: Some(seed),
        },
        points,
    })
}

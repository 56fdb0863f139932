//! Unnormalized target densities on `[0, 1]`.
//!
//! A [`Density`] carries everything the sampler and the discrepancy code
//! need: pointwise evaluation, the bound `L` with `psi <= L`, the normalizing
//! constant `C = int_0^1 psi`, and the cumulative integral `G(t)`. `G` is
//! evaluated in closed form when the shape has an antiderivative and by
//! piecewise adaptive Simpson quadrature otherwise.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, NeumaierSum};

pub const BUILTIN_NAMES: [&str; 3] = ["example1", "example2", "uniform"];

/// Number of intervals of the audit grid used by [`default_bound`].
pub const AUDIT_GRID: usize = 100_000;
/// Relative headroom added to the audited maximum.
pub const BOUND_HEADROOM: f64 = 1e-6;
/// Step of the central second difference in [`Density::check_curvature`].
pub const CURVATURE_STEP: f64 = 1e-5;

/// A breakpoint of a piecewise density, kept exact when it is a ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Knot {
    Ratio(i64, i64),
    Float(f64),
}

impl Knot {
    pub fn value(&self) -> f64 {
        match *self {
            Knot::Ratio(p, q) => p as f64 / q as f64,
            Knot::Float(v) => v,
        }
    }

    /// Exact comparison of `x` against the knot.
    pub fn compare(&self, x: f64) -> Ordering {
        match *self {
            Knot::Float(v) => x.partial_cmp(&v).unwrap_or(Ordering::Equal),
            Knot::Ratio(p, q) => {
                // x*q == prod + err exactly; q > 0 and |p|, |q| < 2^53.
                let q = q as f64;
                let p = p as f64;
                let prod = x * q;
                let err = x.mul_add(q, -prod);
                match prod.partial_cmp(&p).unwrap_or(Ordering::Equal) {
                    Ordering::Equal => err.partial_cmp(&0.0).unwrap_or(Ordering::Equal),
                    o => o,
                }
            }
        }
    }

    fn parse(s: &str) -> Result<Knot> {
        let bad = || Error::Parse(format!("breakpoint `{s}` is neither a number nor p/q"));
        if let Some((p, q)) = s.split_once('/') {
            let p: i64 = p.trim().parse().map_err(|_| bad())?;
            let q: i64 = q.trim().parse().map_err(|_| bad())?;
            if q <= 0 || p.unsigned_abs() >= 1 << 53 || q >= 1 << 53 {
                return Err(bad());
            }
            Ok(Knot::Ratio(p, q))
        } else {
            s.trim().parse::<f64>().map(Knot::Float).map_err(|_| bad())
        }
    }
}

/// One polynomial piece `sum_i c_i x^i` on `[lo, hi)` (closed on the right for the last piece).
#[derive(Debug, Clone)]
pub struct Piece {
    pub lo: Knot,
    pub hi: Knot,
    pub coefficients: Vec<f64>,
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0_f64, |acc, &ci| acc.mul_add(x, ci))
}

fn poly_antiderivative(c: &[f64], x: f64) -> f64 {
    c.iter()
        .enumerate()
        .rev()
        .fold(0.0_f64, |acc, (i, &ci)| acc.mul_add(x, ci / (i + 1) as f64))
        * x
}

#[derive(Debug, Clone)]
pub struct PiecewisePolynomial {
    pieces: Vec<Piece>,
    /// Integral of each complete piece, for the closed-form CDF.
    piece_mass: Vec<f64>,
}

impl PiecewisePolynomial {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidParameter("piecewise density needs at least one piece".into()));
        }
        if pieces[0].lo.value() != 0.0 || pieces[pieces.len() - 1].hi.value() != 1.0 {
            return Err(Error::InvalidParameter("pieces must cover [0, 1]".into()));
        }
        for w in pieces.windows(2) {
            if w[0].hi.value() != w[1].lo.value() {
                return Err(Error::InvalidParameter("pieces must be contiguous".into()));
            }
        }
        if let Some(p) = pieces.iter().find(|p| !(p.lo.value() < p.hi.value())) {
            return Err(Error::InvalidParameter(format!(
                "empty piece [{}, {}]",
                p.lo.value(),
                p.hi.value()
            )));
        }
        let piece_mass = pieces
            .iter()
            .map(|p| poly_antiderivative(&p.coefficients, p.hi.value()) - poly_antiderivative(&p.coefficients, p.lo.value()))
            .collect();
        Ok(PiecewisePolynomial { pieces, piece_mass })
    }

    fn locate(&self, x: f64) -> usize {
        let last = self.pieces.len() - 1;
        self.pieces[..last]
            .iter()
            .position(|p| p.hi.compare(x) == Ordering::Less)
            .unwrap_or(last)
    }

    fn eval(&self, x: f64) -> f64 {
        horner(&self.pieces[self.locate(x)].coefficients, x)
    }

    fn antiderivative(&self, t: f64) -> f64 {
        let i = self.locate(t);
        let mut acc: NeumaierSum = self.piece_mass[..i].iter().copied().collect();
        let p = &self.pieces[i];
        acc.add(poly_antiderivative(&p.coefficients, t) - poly_antiderivative(&p.coefficients, p.lo.value()));
        acc.total()
    }

    fn interior_knots(&self) -> Vec<f64> {
        self.pieces[1..].iter().map(|p| p.lo.value()).collect()
    }

    fn scaled(&self, c: f64) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                lo: p.lo,
                hi: p.hi,
                coefficients: p.coefficients.iter().map(|&a| a * c).collect(),
            })
            .collect();
        PiecewisePolynomial::new(pieces).expect("scaling preserves validity")
    }
}

/// `amplitude * sin(frequency * x) + sum_i c_i x^{p_i}` with real exponents `p_i >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinePoly {
    pub amplitude: f64,
    pub frequency: f64,
    pub terms: Vec<(f64, f64)>,
}

impl SinePoly {
    fn eval(&self, x: f64) -> f64 {
        let mut s = self.amplitude * (self.frequency * x).sin();
        for &(c, p) in &self.terms {
            s += c * x.powf(p);
        }
        s
    }

    fn antiderivative(&self, t: f64) -> f64 {
        let mut s = if self.frequency == 0.0 {
            0.0
        } else {
            // 1 - cos(wt) = 2 sin^2(wt/2), which avoids cancellation near 0.
            let h = (0.5 * self.frequency * t).sin();
            self.amplitude / self.frequency * 2.0 * h * h
        };
        for &(c, p) in &self.terms {
            s += c * t.powf(p + 1.0) / (p + 1.0);
        }
        s
    }
}

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Shape {
    SinePoly(SinePoly),
    Piecewise(PiecewisePolynomial),
    /// Arbitrary evaluator; the CDF always goes through quadrature.
    Opaque { eval: DensityFn, breaks: Vec<f64> },
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::SinePoly(s) => f.debug_tuple("SinePoly").field(s).finish(),
            Shape::Piecewise(p) => f.debug_tuple("Piecewise").field(p).finish(),
            Shape::Opaque { breaks, .. } => f.debug_struct("Opaque").field("breaks", breaks).finish_non_exhaustive(),
        }
    }
}

/// An unnormalized density `psi` on `[0, 1]` together with its bound `L` and mass `C`.
#[derive(Debug, Clone)]
pub struct Density {
    name: String,
    shape: Shape,
    bound: f64,
    norm: f64,
}

impl Density {
    fn build(name: String, shape: Shape, bound: Option<f64>) -> Result<Self> {
        let mut d = Density {
            name,
            shape,
            bound: f64::NAN,
            norm: f64::NAN,
        };
        let audited = default_bound(|x| d.eval(x), &d.name)?;
        d.bound = match bound {
            None => audited,
            Some(l) if l.is_finite() && l >= audited / (1.0 + BOUND_HEADROOM) => l,
            Some(l) => {
                return Err(Error::InvalidParameter(format!(
                    "L = {l} is below the audited maximum {} of `{}`",
                    audited / (1.0 + BOUND_HEADROOM),
                    d.name
                )))
            }
        };
        d.norm = match d.antiderivative(1.0) {
            Some(c) => c,
            None => d.cdf_quadrature(1.0)?,
        };
        if !(d.norm > 0.0) || !d.norm.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "density `{}` has non-positive mass C = {}",
                d.name, d.norm
            )));
        }
        Ok(d)
    }

    pub fn sine_poly(name: impl Into<String>, shape: SinePoly, bound: Option<f64>) -> Result<Self> {
        Self::build(name.into(), Shape::SinePoly(shape), bound)
    }

    pub fn piecewise(name: impl Into<String>, shape: PiecewisePolynomial, bound: Option<f64>) -> Result<Self> {
        Self::build(name.into(), Shape::Piecewise(shape), bound)
    }

    /// A density given only by its evaluator. `breaks` lists interior points
    /// where `psi` is not smooth; quadrature never straddles them.
    pub fn from_fn(name: impl Into<String>, eval: DensityFn, breaks: Vec<f64>, bound: Option<f64>) -> Result<Self> {
        Self::build(name.into(), Shape::Opaque { eval, breaks }, bound)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The bound `L` with `psi(x) <= L` on `[0, 1]`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// The normalizing constant `C = int_0^1 psi`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Area of the acceptance region, `C / L`.
    pub fn acceptance_ratio(&self) -> f64 {
        self.norm / self.bound
    }

    pub fn has_antiderivative(&self) -> bool {
        !matches!(self.shape, Shape::Opaque { .. })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::SinePoly(s) => s.eval(x),
            Shape::Piecewise(p) => p.eval(x),
            Shape::Opaque { eval, .. } => eval(x),
        }
    }

    /// Interior points where `psi` switches formula.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            Shape::SinePoly(_) => Vec::new(),
            Shape::Piecewise(p) => p.interior_knots(),
            Shape::Opaque { breaks, .. } => breaks.clone(),
        }
    }

    fn antiderivative(&self, t: f64) -> Option<f64> {
        match &self.shape {
            Shape::SinePoly(s) => Some(s.antiderivative(t)),
            Shape::Piecewise(p) => Some(p.antiderivative(t)),
            Shape::Opaque { .. } => None,
        }
    }

    /// Splits `[0, t]` at the breakpoints below `t`.
    pub(crate) fn pieces_up_to(&self, t: f64) -> Vec<f64> {
        let mut b = vec![0.0];
        b.extend(self.breakpoints().into_iter().filter(|&k| k > 0.0 && k < t));
        b.push(t);
        b
    }

    /// `G(t) = int_0^t psi` by quadrature only, regardless of the shape.
    pub fn cdf_quadrature(&self, t: f64) -> Result<f64> {
        check_unit(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        quad::integrate_checked(|x| self.eval(x), &self.pieces_up_to(t), quad::DEFAULT_TOL)
    }

    /// `G(t) = int_0^t psi`.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        check_unit(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        match self.antiderivative(t) {
            Some(g) => Ok(g),
            None => self.cdf_quadrature(t),
        }
    }

    /// `G(t) / C`, clamped into `[0, 1]`.
    pub fn normalized_cdf(&self, t: f64) -> Result<f64> {
        Ok((self.cdf(t)? / self.norm).clamp(0.0, 1.0))
    }

    /// Same density with a different bound `L`.
    pub fn with_bound(&self, bound: f64) -> Result<Self> {
        Self::build(self.name.clone(), self.shape.clone(), Some(bound))
    }

    /// `c * psi` with bound `c * L`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::out_of_domain("scale", c, "(0, inf)"));
        }
        let shape = match &self.shape {
            Shape::SinePoly(s) => Shape::SinePoly(SinePoly {
                amplitude: s.amplitude * c,
                frequency: s.frequency,
                terms: s.terms.iter().map(|&(a, p)| (a * c, p)).collect(),
            }),
            Shape::Piecewise(p) => Shape::Piecewise(p.scaled(c)),
            Shape::Opaque { eval, breaks } => {
                let eval = Arc::clone(eval);
                Shape::Opaque {
                    eval: Arc::new(move |x| c * eval(x)),
                    breaks: breaks.clone(),
                }
            }
        };
        Self::build(format!("{}*{c}", self.name), shape, Some(self.bound * c))
    }

    /// Classifies the sign of `psi''` from central differences on the
    /// interior points `i / grid`, skipping points within one step of a breakpoint.
    pub fn check_curvature(&self, grid: usize, tol: f64) -> Result<CurvatureReport> {
        if grid < 100 {
            return Err(Error::out_of_domain("grid", grid, "[100, inf)"));
        }
        if !(tol > 0.0) {
            return Err(Error::out_of_domain("tol", tol, "(0, inf)"));
        }
        let h = CURVATURE_STEP;
        let knots = self.breakpoints();
        let mut all_neg = true;
        let mut all_pos = true;
        let mut min_abs_second = f64::INFINITY;
        let mut min_abs_curvature = f64::INFINITY;
        let mut used = 0;
        for i in 1..grid {
            let x = i as f64 / grid as f64;
            if x - h < 0.0 || x + h > 1.0 || knots.iter().any(|&k| (x - k).abs() <= h) {
                continue;
            }
            let (fl, f0, fr) = (self.eval(x - h), self.eval(x), self.eval(x + h));
            let second = (fr - 2.0 * f0 + fl) / (h * h);
            let first = (fr - fl) / (2.0 * h);
            let kappa = second / (1.0 + first * first).powf(1.5);
            all_neg &= second < -tol;
            all_pos &= second > tol;
            min_abs_second = min_abs_second.min(second.abs());
            min_abs_curvature = min_abs_curvature.min(kappa.abs());
            used += 1;
        }
        let classification = match (all_neg, all_pos) {
            (true, _) if used > 0 => Convexity::StrictlyConcave,
            (_, true) if used > 0 => Convexity::StrictlyConvex,
            _ => Convexity::MixedOrVanishing,
        };
        Ok(CurvatureReport {
            classification,
            min_abs_curvature,
            min_abs_second_derivative: min_abs_second,
            grid_points: used,
        })
    }
}

fn check_unit(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::out_of_domain("t", t, "[0, 1]"))
    }
}

/// `(1 + 1e-6)` times the maximum of `psi` over the `10^5 + 1` point grid `i / 10^5`.
pub fn default_bound<F: Fn(f64) -> f64>(psi: F, name: &str) -> Result<f64> {
    let mut max = f64::NEG_INFINITY;
    for i in 0..=AUDIT_GRID {
        let x = i as f64 / AUDIT_GRID as f64;
        let v = psi(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { name: name.to_string(), x });
        }
        max = max.max(v);
    }
    Ok(max * (1.0 + BOUND_HEADROOM))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convexity {
    StrictlyConcave,
    StrictlyConvex,
    MixedOrVanishing,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureReport {
    pub classification: Convexity,
    /// Minimum of `|psi''| / (1 + psi'^2)^{3/2}` over the audit grid.
    pub min_abs_curvature: f64,
    pub min_abs_second_derivative: f64,
    pub grid_points: usize,
}

/// `psi(x) = (3/16)(4 sin(pi x / 2) - x^{5/2} - x^2)`.
fn example1_shape() -> SinePoly {
    SinePoly {
        amplitude: 0.75,
        frequency: PI / 2.0,
        terms: vec![(-0.1875, 2.5), (-0.1875, 2.0)],
    }
}

/// Two quartic branches meeting with matching value, slope and curvature at 1/3.
fn example2_shape() -> PiecewisePolynomial {
    let third = Knot::Ratio(1, 3);
    PiecewisePolynomial::new(vec![
        Piece {
            lo: Knot::Ratio(0, 1),
            hi: third,
            coefficients: vec![107.0 / 108.0, 0.0, -1.0 / 6.0, 0.0, -0.5],
        },
        Piece {
            lo: third,
            hi: Knot::Ratio(1, 1),
            coefficients: vec![1.0, -2.0 / 27.0, 0.0, 0.0, -0.75],
        },
    ])
    .expect("static pieces are valid")
}

fn uniform_shape() -> PiecewisePolynomial {
    PiecewisePolynomial::new(vec![Piece {
        lo: Knot::Ratio(0, 1),
        hi: Knot::Ratio(1, 1),
        coefficients: vec![1.0],
    }])
    .expect("static pieces are valid")
}

/// Looks up a built-in density; `bound` overrides the default `L`.
pub fn make_builtin(name: &str, bound: Option<f64>) -> Result<Density> {
    match name {
        "example1" => Density::sine_poly(name, example1_shape(), bound),
        "example2" => Density::piecewise(name, example2_shape(), bound),
        "uniform" => Density::piecewise(name, uniform_shape(), bound),
        _ => Err(Error::UnknownName {
            kind: "density",
            name: name.to_string(),
            valid: BUILTIN_NAMES.join(", "),
        }),
    }
}

/// Density as written in a JSON config: a built-in name or an inline declaration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum DensitySpec {
    Named(String),
    Inline(InlineDensity),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InlineDensity {
    PiecewisePolynomial {
        #[serde(default)]
        name: Option<String>,
        pieces: Vec<PieceSpec>,
    },
    SinePoly {
        #[serde(default)]
        name: Option<String>,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        terms: Vec<TermSpec>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PieceSpec {
    pub interval: [KnotSpec; 2],
    /// Ascending powers: `c0 + c1 x + c2 x^2 + ...`.
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum KnotSpec {
    Number(f64),
    Text(String),
}

impl KnotSpec {
    fn to_knot(&self) -> Result<Knot> {
        match self {
            KnotSpec::Number(v) => Ok(Knot::Float(*v)),
            KnotSpec::Text(s) => Knot::parse(s),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TermSpec {
    pub coefficient: f64,
    pub exponent: f64,
}

impl DensitySpec {
    pub fn build(&self, bound: Option<f64>) -> Result<Density> {
        match self {
            DensitySpec::Named(n) => make_builtin(n, bound),
            DensitySpec::Inline(InlineDensity::PiecewisePolynomial { name, pieces }) => {
                let pieces = pieces
                    .iter()
                    .map(|p| {
                        Ok(Piece {
                            lo: p.interval[0].to_knot()?,
                            hi: p.interval[1].to_knot()?,
                            coefficients: p.coefficients.clone(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Density::piecewise(
                    name.clone().unwrap_or_else(|| "piecewise-polynomial".into()),
                    PiecewisePolynomial::new(pieces)?,
                    bound,
                )
            }
            DensitySpec::Inline(InlineDensity::SinePoly {
                name,
                amplitude,
                frequency,
                terms,
            }) => {
                if let Some(t) = terms.iter().find(|t| !(t.exponent >= 0.0)) {
                    return Err(Error::InvalidParameter(format!("negative exponent {}", t.exponent)));
                }
                Density::sine_poly(
                    name.clone().unwrap_or_else(|| "sine-poly".into()),
                    SinePoly {
                        amplitude: *amplitude,
                        frequency: *frequency,
                        terms: terms.iter().map(|t| (t.coefficient, t.exponent)).collect(),
                    },
                    bound,
                )
            }
        }
    }
}

//! Adaptive Simpson quadrature and compensated summation.

use crate::error::{Error, Result};

/// Absolute tolerance used for every CDF and reference integral.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Maximum recursion depth of the adaptive Simpson rule.
pub const MAX_DEPTH: u32 = 60;

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of the Richardson error estimates over all accepted panels.
    pub error: f64,
    pub converged: bool,
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn recurse<F: Fn(f64) -> f64>(f: &F, p: Panel, tol: f64, depth: u32, out: &mut Quadrature, acc: &mut NeumaierSum) {
    let m = 0.5 * (p.a + p.b);
    let lm = 0.5 * (p.a + m);
    let rm = 0.5 * (m + p.b);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(p.a, m, p.fa, flm, p.fm);
    let right = simpson(m, p.b, p.fm, frm, p.fb);
    let delta = left + right - p.whole;

    if delta.abs() <= 15.0 * tol || depth >= MAX_DEPTH || !(lm > p.a && rm < p.b) {
        if delta.abs() > 15.0 * tol {
            out.converged = false;
        }
        acc.add(left);
        acc.add(right);
        acc.add(delta / 15.0);
        out.error += delta.abs() / 15.0;
        return;
    }
    let half = 0.5 * tol;
    recurse(
        f,
        Panel { a: p.a, b: m, fa: p.fa, fm: flm, fb: p.fm, whole: left },
        half,
        depth + 1,
        out,
        acc,
    );
    recurse(
        f,
        Panel { a: m, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right },
        half,
        depth + 1,
        out,
        acc,
    );
}

/// Integrates `f` over `[a, b]` with the adaptive Simpson rule.
///
/// The result is returned even when some panel hit the depth cap; check
/// `converged` (or use [`integrate_checked`]).
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Quadrature {
    if a == b {
        return Quadrature { value: 0.0, error: 0.0, converged: true };
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    let mut out = Quadrature { value: 0.0, error: 0.0, converged: true };
    let mut acc = NeumaierSum::default();
    recurse(&f, Panel { a, b, fa, fm, fb, whole }, tol, 0, &mut out, &mut acc);
    out.value = acc.total();
    out
}

/// Integrates over consecutive pieces `[breaks[i], breaks[i+1]]` so that no
/// panel straddles a breakpoint. Fails if any piece does not converge.
pub fn integrate_checked<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> Result<f64> {
    let pieces = breaks.len().saturating_sub(1).max(1);
    let mut acc = NeumaierSum::default();
    let mut err = 0.0;
    let mut ok = true;
    for w in breaks.windows(2) {
        let q = adaptive_simpson(&f, w[0], w[1], tol / pieces as f64);
        acc.add(q.value);
        err += q.error;
        ok &= q.converged && q.value.is_finite();
    }
    if !ok {
        return Err(Error::Quadrature { achieved: err });
    }
    Ok(acc.total())
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

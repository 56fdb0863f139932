//! The driver-quality criterion
//!
//! ```text
//! Q_R(T) = 1/R + sum_{0 < |n| < R} (|n|^{-3/2} + 1/((1+|n1|)(1+|n2|))) * |mean_j exp(2 pi i n.x_j)|
//! ```
//!
//! with `|n| = max(|n1|, |n2|)`. The general path sums over all frequencies
//! with compensated accumulation; the Fibonacci path uses the fact that the
//! exponential sum over the lattice is 1 when `F_k | n1 + n2 F_{k-1}` and 0
//! otherwise.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::driver::{fibonacci, Point2, FIBONACCI_K_MAX, FIBONACCI_K_MIN};
use crate::error::{Error, Result};
use crate::quad::NeumaierSum;

/// Default limit on `(2R)^2 * M` for the general path.
pub const DEFAULT_COST_CAP: u128 = 10_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrequencyVector {
    pub n1: i64,
    pub n2: i64,
}

impl FrequencyVector {
    pub fn new(n1: i64, n2: i64) -> Self {
        FrequencyVector { n1, n2 }
    }

    pub fn sup_norm(&self) -> u64 {
        self.n1.unsigned_abs().max(self.n2.unsigned_abs())
    }

    pub fn is_zero(&self) -> bool {
        self.n1 == 0 && self.n2 == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    General,
    FibonacciFast,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub value: f64,
    #[serde(rename = "R")]
    pub r: u64,
    #[serde(rename = "M")]
    pub m: u64,
    pub method: Method,
}

/// `|n|^{-3/2} + 1 / ((1 + |n1|)(1 + |n2|))`.
pub fn weight(n: FrequencyVector) -> Result<f64> {
    if n.is_zero() {
        return Err(Error::out_of_domain("n", "(0, 0)", "Z^2 \\ {0}"));
    }
    let sup = n.sup_norm() as f64;
    let a = n.n1.unsigned_abs() as f64;
    let b = n.n2.unsigned_abs() as f64;
    Ok(sup.powf(-1.5) + 1.0 / ((1.0 + a) * (1.0 + b)))
}

/// `|mean_j exp(2 pi i (n1 x1 + n2 x2))|`, in `[0, 1]` up to rounding.
pub fn exp_sum(points: &[Point2], n: FrequencyVector) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let (a, b) = (n.n1 as f64, n.n2 as f64);
    let mut re = NeumaierSum::default();
    let mut im = NeumaierSum::default();
    for p in points {
        // Reduce the phase mod 1 before scaling by 2 pi.
        let phase = a.mul_add(p.x1, b * p.x2);
        let phase = phase - phase.round();
        let (s, c) = (TAU * phase).sin_cos();
        re.add(c);
        im.add(s);
    }
    let m = points.len() as f64;
    (re.total() / m).hypot(im.total() / m)
}

/// `Q_R` by direct summation over every `n` with `0 < |n| < R`, `n1` outermost.
pub fn qr_general(points: &[Point2], r: u64, cost_cap: u128) -> Result<CriterionResult> {
    if r < 2 {
        return Err(Error::out_of_domain("R", r, "[2, inf)"));
    }
    let cost = (2 * r as u128).pow(2) * points.len() as u128;
    if cost > cost_cap {
        return Err(Error::CostCap(format!(
            "(2R)^2 * M = {cost} exceeds the cost cap {cost_cap}; use the Fibonacci fast path or a smaller R"
        )));
    }
    let ri = r as i64;
    let mut acc = NeumaierSum::default();
    acc.add(1.0 / r as f64);
    for n1 in (1 - ri)..ri {
        for n2 in (1 - ri)..ri {
            let n = FrequencyVector::new(n1, n2);
            if n.is_zero() {
                continue;
            }
            acc.add(weight(n)? * exp_sum(points, n));
        }
    }
    Ok(CriterionResult {
        value: acc.total(),
        r,
        m: points.len() as u64,
        method: Method::General,
    })
}

/// The frequencies with `0 < |n| < R` annihilated by the Fibonacci lattice `F_k`,
/// ordered by `n2` and then `n1`.
pub fn fibonacci_dual_frequencies(k: u32, r: u64) -> Result<Vec<FrequencyVector>> {
    if !(FIBONACCI_K_MIN..=FIBONACCI_K_MAX).contains(&k) {
        return Err(Error::out_of_domain("k", k, "[3, 87]"));
    }
    let fk = fibonacci(k) as i128;
    let g = fibonacci(k - 1) as i128;
    if r as i128 > fk {
        return Err(Error::InvalidParameter(format!(
            "the Fibonacci fast path needs R <= F_{k} = {fk} (got R = {r})"
        )));
    }
    let r = r as i128;
    let mut out = Vec::new();
    for n2 in (1 - r)..r {
        if n2 == 0 {
            // n1 = 0 (mod F_k) with |n1| < R <= F_k forces n1 = 0.
            continue;
        }
        // n1 = -n2 F_{k-1} (mod F_k); at most two representatives lie in (-R, R).
        let base = (-n2 * g).rem_euclid(fk);
        for n1 in [base - fk, base] {
            if -r < n1 && n1 < r {
                out.push(FrequencyVector::new(n1 as i64, n2 as i64));
            }
        }
    }
    Ok(out)
}

/// `Q_R` of the Fibonacci lattice `F_k` in `O(R)` operations; requires `R <= F_k`.
pub fn qr_fibonacci(k: u32, r: u64) -> Result<CriterionResult> {
    if r < 1 {
        return Err(Error::out_of_domain("R", r, "[1, F_k]"));
    }
    let mut acc = NeumaierSum::default();
    acc.add(1.0 / r as f64);
    for n in fibonacci_dual_frequencies(k, r)? {
        acc.add(weight(n)?);
    }
    Ok(CriterionResult {
        value: acc.total(),
        r,
        m: fibonacci(k) as u64,
        method: Method::FibonacciFast,
    })
}

/// `F_{ceil(2k/3)}`.
pub fn default_r_for_fibonacci(k: u32) -> Result<u64> {
    if k < FIBONACCI_K_MIN {
        return Err(Error::out_of_domain("k", k, "[3, inf)"));
    }
    Ok(fibonacci((2 * k).div_ceil(3)) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::fibonacci_lattice;

    #[test]
    fn weights() {
        assert_eq!(weight(FrequencyVector::new(1, 0)).unwrap(), 1.5);
        assert_eq!(weight(FrequencyVector::new(1, 1)).unwrap(), 1.25);
        assert!((weight(FrequencyVector::new(3, 4)).unwrap() - 0.175).abs() < 1e-15);
        assert!(weight(FrequencyVector::new(0, 0)).is_err());
    }

    #[test]
    fn exp_sum_at_origin() {
        let pts = vec![Point2::new(0.0, 0.0); 17];
        assert_eq!(exp_sum(&pts, FrequencyVector::new(3, -5)), 1.0);
    }

    #[test]
    fn exp_sum_fibonacci_divisibility() {
        let d = fibonacci_lattice(5).unwrap();
        assert!((exp_sum(&d.points, FrequencyVector::new(2, 1)) - 1.0).abs() < 1e-12);
        assert!(exp_sum(&d.points, FrequencyVector::new(1, 1)) <= 1e-12);
    }

    #[test]
    fn single_point_r2() {
        let r = qr_general(&[Point2::new(0.0, 0.0)], 2, DEFAULT_COST_CAP).unwrap();
        assert!((r.value - 11.5).abs() < 1e-14);
    }

    #[test]
    fn default_r() {
        assert_eq!(default_r_for_fibonacci(9).unwrap(), 8);
        assert_eq!(default_r_for_fibonacci(12).unwrap(), 21);
        assert_eq!(default_r_for_fibonacci(10).unwrap(), 13);
    }

    #[test]
    fn fast_path_frequencies_k5() {
        let mut got: Vec<_> = fibonacci_dual_frequencies(5, 5)
            .unwrap()
            .into_iter()
            .map(|n| (n.n1, n.n2))
            .collect();
        got.sort();
        // Brute force over |n| < 5 with 5 | n1 + 3 n2.
        let mut want = Vec::new();
        for n1 in -4i64..=4 {
            for n2 in -4i64..=4 {
                if (n1, n2) != (0, 0) && (n1 + 3 * n2).rem_euclid(5) == 0 {
                    want.push((n1, n2));
                }
            }
        }
        want.sort();
        assert_eq!(got, want);
        assert!(got.contains(&(2, 1)) && got.contains(&(-3, 1)));
    }

    #[test]
    fn fast_path_precondition() {
        assert!(qr_fibonacci(5, 5).is_ok());
        assert!(qr_fibonacci(5, 6).is_err());
        assert!(qr_fibonacci(5, 1).unwrap().value >= 1.0);
    }

    #[test]
    fn cost_cap() {
        let pts = vec![Point2::new(0.1, 0.2); 100];
        assert!(matches!(qr_general(&pts, 100, 1000), Err(Error::CostCap(_))));
        assert!(qr_general(&pts, 1, DEFAULT_COST_CAP).is_err());
    }
}

//! Star-discrepancy over anchored half-open boxes `[0, t)`.
//!
//! Local discrepancy is piecewise continuous in `t`, so the supremum is
//! attained as a one-sided limit at a point coordinate. [`Side::Left`] means
//! the limit from below (points on the edge are outside), [`Side::Right`]
//! the limit from above (points on the edge are inside).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::Density;
use crate::driver::Point2;
use crate::error::{Error, Result};
use crate::sampler::SampleSet;

/// Largest point set accepted by [`star_discrepancy_2d_uniform`].
pub const EXACT_2D_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[serde(rename = "exact-1d")]
    Exact1d,
    #[serde(rename = "exact-2d")]
    Exact2d,
    GridOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Witness {
    Line(f64),
    Square([f64; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyResult {
    pub value: f64,
    pub argmax_t: Witness,
    pub side: Side,
    pub method: Method,
    #[serde(rename = "N")]
    pub n: usize,
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `|#{y in box} / N - G(t)/C|` for the one-sided box at `t`, by direct counting.
pub fn local_discrepancy_1d(density: &Density, samples: &[f64], t: f64, side: Side) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let count = samples
        .iter()
        .filter(|&&y| match side {
            Side::Left => y < t,
            Side::Right => y <= t,
        })
        .count();
    Ok((count as f64 / samples.len() as f64 - density.normalized_cdf(t)?).abs())
}

/// Exact `D*_{N,psi}` of a sample set against `psi / C`.
///
/// With sorted samples `y_(1) <= ... <= y_(N)` and `g_j = G(y_(j)) / C` this is
/// `max_j max(j/N - g_j, g_j - (j-1)/N)`.
pub fn star_discrepancy_1d(density: &Density, set: &SampleSet) -> Result<DiscrepancyResult> {
    star_discrepancy_1d_samples(density, &set.samples)
}

pub fn star_discrepancy_1d_samples(density: &Density, samples: &[f64]) -> Result<DiscrepancyResult> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let ys = sorted(samples);
    let g = ys
        .par_iter()
        .map(|&y| density.normalized_cdf(y))
        .collect::<Result<Vec<_>>>()?;
    let n = ys.len() as f64;
    let mut best = DiscrepancyResult {
        value: 0.0,
        argmax_t: Witness::Line(0.0),
        side: Side::Left,
        method: Method::Exact1d,
        n: ys.len(),
    };
    for (i, (&y, &gj)) in ys.iter().zip(&g).enumerate() {
        let above = (i + 1) as f64 / n - gj;
        let below = gj - i as f64 / n;
        if above > best.value {
            best.value = above;
            best.argmax_t = Witness::Line(y);
            best.side = Side::Right;
        }
        if below > best.value {
            best.value = below;
            best.argmax_t = Witness::Line(y);
            best.side = Side::Left;
        }
    }
    Ok(best)
}

/// Maximum local discrepancy over the grid `t = i / grid`, `i = 0..=grid`.
///
/// Only the grid is searched, so the result is a lower bound for the exact
/// value that trails it by at most `sup(psi) / (C * grid)`.
pub fn grid_oracle_1d(density: &Density, set: &SampleSet, grid: usize) -> Result<DiscrepancyResult> {
    if grid < 1000 {
        return Err(Error::out_of_domain("grid", grid, "[1000, inf)"));
    }
    if set.samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let ys = sorted(&set.samples);
    let n = ys.len() as f64;
    let (value, t) = (0..=grid)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 / grid as f64;
            let below = ys.partition_point(|&y| y < t);
            Ok(((below as f64 / n - density.normalized_cdf(t)?).abs(), t))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0.0, 0.0), |best, cur| if cur.0 > best.0 { cur } else { best });
    Ok(DiscrepancyResult {
        value,
        argmax_t: Witness::Line(t),
        side: Side::Left,
        method: Method::GridOracle,
        n: ys.len(),
    })
}

/// `|#{x in box} / M - t1 t2|` for the one-sided box at `t`, by direct counting.
pub fn local_discrepancy_2d(points: &[Point2], t: [f64; 2], side: Side) -> f64 {
    let count = points
        .iter()
        .filter(|p| match side {
            Side::Left => p.x1 < t[0] && p.x2 < t[1],
            Side::Right => p.x1 <= t[0] && p.x2 <= t[1],
        })
        .count();
    (count as f64 / points.len() as f64 - t[0] * t[1]).abs()
}

fn distinct_with_one(mut v: Vec<f64>) -> Vec<f64> {
    v.push(1.0);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Exact uniform star-discrepancy of a 2-D point set in `O(M^2)` after sorting.
///
/// The count term is constant on the cells cut out by the point coordinates,
/// so the largest excess is a limit from above at a lower-left cell corner
/// (coordinates below 1) and the largest deficit a limit from below at an
/// upper-right corner (coordinates or 1).
pub fn star_discrepancy_2d_uniform(points: &[Point2]) -> Result<DiscrepancyResult> {
    if points.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    if points.len() > EXACT_2D_CAP {
        return Err(Error::CostCap(format!(
            "exact 2-D discrepancy is limited to {EXACT_2D_CAP} points (got {}); use the grid oracle instead",
            points.len()
        )));
    }
    let m = points.len() as f64;
    let xs = distinct_with_one(points.iter().map(|p| p.x1).collect());
    let ys = distinct_with_one(points.iter().map(|p| p.x2).collect());
    let y_index = |y: f64| ys.partition_point(|&v| v < y);

    let mut by_x: Vec<(f64, usize)> = points.iter().map(|p| (p.x1, y_index(p.x2))).collect();
    by_x.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut hist = vec![0u32; ys.len()];
    let mut next = 0;
    let mut best = DiscrepancyResult {
        value: 0.0,
        argmax_t: Witness::Square([0.0, 0.0]),
        side: Side::Left,
        method: Method::Exact2d,
        n: points.len(),
    };
    let consider = |value: f64, t: [f64; 2], side: Side, best: &mut DiscrepancyResult| {
        if value > best.value {
            best.value = value;
            best.argmax_t = Witness::Square(t);
            best.side = side;
        }
    };

    for &t1 in &xs {
        // Points with x1 < t1: strict count below each y candidate.
        let mut below = 0u32;
        for (q, &t2) in ys.iter().enumerate() {
            let v = (below as f64 / m - t1 * t2).abs();
            consider(v, [t1, t2], Side::Left, &mut best);
            below += hist[q];
        }
        while next < by_x.len() && by_x[next].0 == t1 {
            hist[by_x[next].1] += 1;
            next += 1;
        }
        if t1 < 1.0 {
            let mut upto = 0u32;
            for (q, &t2) in ys.iter().enumerate() {
                if t2 >= 1.0 {
                    break;
                }
                upto += hist[q];
                let v = (upto as f64 / m - t1 * t2).abs();
                consider(v, [t1, t2], Side::Right, &mut best);
            }
        }
    }
    Ok(best)
}

/// Lower bound for the uniform 2-D star-discrepancy from the grid
/// `t = (i / grid, j / grid)`, with both one-sided limits at every grid node
/// below 1. Exact whenever every coordinate lies on the grid.
pub fn grid_oracle_2d(points: &[Point2], grid: usize) -> Result<DiscrepancyResult> {
    if grid < 2 {
        return Err(Error::out_of_domain("grid", grid, "[2, inf)"));
    }
    if points.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let ts: Vec<f64> = (0..=grid).map(|i| i as f64 / grid as f64).collect();
    let w = grid + 1;
    // open[i][j]: points with first grid index above x at i, i.e. counted in [0, t_i) x [0, t_j).
    let mut open = vec![0u32; w * w];
    let mut closed = vec![0u32; w * w];
    for p in points {
        let oi = ts.partition_point(|&t| t <= p.x1);
        let oj = ts.partition_point(|&t| t <= p.x2);
        if oi < w && oj < w {
            open[oi * w + oj] += 1;
        }
        let ci = ts.partition_point(|&t| t < p.x1);
        let cj = ts.partition_point(|&t| t < p.x2);
        if ci < w && cj < w {
            closed[ci * w + cj] += 1;
        }
    }
    for table in [&mut open, &mut closed] {
        for i in 0..w {
            for j in 0..w {
                let mut v = table[i * w + j];
                if i > 0 {
                    v += table[(i - 1) * w + j];
                }
                if j > 0 {
                    v += table[i * w + j - 1];
                }
                if i > 0 && j > 0 {
                    v -= table[(i - 1) * w + j - 1];
                }
                table[i * w + j] = v;
            }
        }
    }
    let m = points.len() as f64;
    let mut best = DiscrepancyResult {
        value: 0.0,
        argmax_t: Witness::Square([0.0, 0.0]),
        side: Side::Left,
        method: Method::GridOracle,
        n: points.len(),
    };
    for i in 0..w {
        for j in 0..w {
            let area = ts[i] * ts[j];
            let v = (open[i * w + j] as f64 / m - area).abs();
            if v > best.value {
                best = DiscrepancyResult { value: v, argmax_t: Witness::Square([ts[i], ts[j]]), side: Side::Left, ..best };
            }
            if i < grid && j < grid {
                let v = (closed[i * w + j] as f64 / m - area).abs();
                if v > best.value {
                    best = DiscrepancyResult { value: v, argmax_t: Witness::Square([ts[i], ts[j]]), side: Side::Right, ..best };
                }
            }
        }
    }
    Ok(best)
}

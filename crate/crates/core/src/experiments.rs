//! Convergence sweeps: driver -> sampler -> measures, with log-log slope fits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criterion::{self, DEFAULT_COST_CAP};
use crate::density::{Density, DensitySpec};
use crate::discrepancy::star_discrepancy_1d;
use crate::driver::{DriverSpec, Family};
use crate::error::{Error, Result};
use crate::integration::{self, Integrand};
use crate::io::format_decimal;
use crate::sampler::ar_deterministic;

/// Rows with fewer accepted points are left out of the slope fits.
pub const DEFAULT_FIT_MIN_N: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameters {
    /// Inclusive range of `k` (Fibonacci) or `M`.
    Range([u64; 2]),
    List(Vec<u64>),
    /// `M = 2^e` for `e` in the inclusive range.
    Log2Range([u32; 2]),
}

impl Parameters {
    pub fn values(&self) -> Vec<u64> {
        match self {
            Parameters::Range([a, b]) => (*a..=*b).collect(),
            Parameters::List(v) => v.clone(),
            Parameters::Log2Range([a, b]) => (*a..=*b).map(|e| 1u64 << e).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Dstar,
    Qr,
    AcceptRate,
    IntegrationError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RPolicy {
    /// `F_{ceil(2k/3)}`; Fibonacci only.
    #[default]
    Auto,
    Fixed(u64),
}

fn default_seeds() -> Vec<u64> {
    (1..=10).collect()
}

fn default_measures() -> Vec<Measure> {
    vec![Measure::Dstar, Measure::AcceptRate]
}

fn default_integrand() -> String {
    "x".into()
}

fn default_fit_min_n() -> u64 {
    DEFAULT_FIT_MIN_N
}

fn default_cost_cap() -> u128 {
    DEFAULT_COST_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub density: DensitySpec,
    /// Override of the density bound `L`.
    #[serde(default, rename = "L")]
    pub bound: Option<f64>,
    pub family: Family,
    pub parameters: Parameters,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_measures")]
    pub measures: Vec<Measure>,
    #[serde(default)]
    pub r_policy: RPolicy,
    #[serde(default = "default_integrand")]
    pub integrand: String,
    #[serde(default = "default_fit_min_n")]
    pub fit_min_n: u64,
    #[serde(default = "default_cost_cap")]
    pub cost_cap: u128,
}

impl ExperimentConfig {
    pub fn new(density: DensitySpec, family: Family, parameters: Parameters) -> Self {
        ExperimentConfig {
            density,
            bound: None,
            family,
            parameters,
            seeds: default_seeds(),
            measures: default_measures(),
            r_policy: RPolicy::Auto,
            integrand: default_integrand(),
            fit_min_n: DEFAULT_FIT_MIN_N,
            cost_cap: DEFAULT_COST_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.parameters.values().is_empty() {
            return Err(Error::InvalidParameter("parameter range is empty".into()));
        }
        if self.family == Family::Random && self.seeds.is_empty() {
            return Err(Error::InvalidParameter("the random family needs at least one seed".into()));
        }
        if self.measures.contains(&Measure::Qr) && self.r_policy == RPolicy::Auto && self.family != Family::Fibonacci {
            return Err(Error::InvalidParameter(
                "r_policy \"auto\" is only defined for the Fibonacci family; use {\"fixed\": R}".into(),
            ));
        }
        if self.measures.contains(&Measure::IntegrationError) {
            Integrand::builtin(&self.integrand)?;
        }
        Ok(())
    }

    fn wants(&self, m: Measure) -> bool {
        self.measures.contains(&m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub family: Family,
    pub param: u64,
    #[serde(rename = "M")]
    pub m: u64,
    /// Accepted points; for the random family the mean over seeds, rounded.
    #[serde(rename = "N")]
    pub n: u64,
    pub accept_rate: f64,
    pub dstar: Option<f64>,
    pub qr: Option<f64>,
    pub integ_err: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub density: String,
    #[serde(rename = "L")]
    pub bound: f64,
    #[serde(rename = "C")]
    pub norm: f64,
    pub family: Family,
    pub rows: Vec<Row>,
    /// Slope of `ln dstar` against `ln N` over rows with `N >= fit_range.0`.
    pub dstar_fit: Option<SlopeFit>,
    /// Slope of `ln qr` against `ln M` over all rows.
    pub qr_fit: Option<SlopeFit>,
    /// Slope of `ln integ_err` against `ln N` over rows with `N >= fit_range.0`.
    pub integ_fit: Option<SlopeFit>,
    pub fit_range: (u64, u64),
}

impl ConvergenceReport {
    /// `family,param,M,N,accept_rate,dstar,qr,integ_err`; absent values are empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("family,param,M,N,accept_rate,dstar,qr,integ_err\n");
        let opt = |v: Option<f64>| v.map(format_decimal).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.family,
                r.param,
                r.m,
                r.n,
                format_decimal(r.accept_rate),
                opt(r.dstar),
                opt(r.qr),
                opt(r.integ_err)
            );
        }
        s
    }
}

/// Ordinary least squares of `ln value` on `ln N`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "a slope fit needs at least 3 points (got {})",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::InvalidParameter(format!("non-positive point ({}, {}) in slope fit", p.0, p.1)));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, v)| (n.ln(), v.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("slope fit needs at least two distinct N".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (ssr / (k - 2.0) / sxx).sqrt();
    Ok(SlopeFit {
        slope,
        stderr,
        intercept,
        points: logs.len(),
    })
}

fn fit_if_possible(points: Vec<(f64, f64)>) -> Option<SlopeFit> {
    fit_slope(&points).ok()
}

struct Measured {
    n: u64,
    dstar: Option<f64>,
    integ_err: Option<f64>,
}

fn measure_one(cfg: &ExperimentConfig, density: &Density, integrand: Option<&Integrand>, spec: DriverSpec) -> Result<(u64, Measured)> {
    let drv = spec.generate()?;
    let set = ar_deterministic(density, &drv.points);
    let n = set.accepted() as u64;
    let needs_samples = cfg.wants(Measure::Dstar) || integrand.is_some();
    if needs_samples && n == 0 {
        return Err(Error::InvalidParameter("no driver point was accepted".into()));
    }
    let dstar = if cfg.wants(Measure::Dstar) {
        Some(star_discrepancy_1d(density, &set)?.value)
    } else {
        None
    };
    let integ_err = match integrand {
        Some(f) => {
            let est = integration::qmc_estimate(f, &set)?;
            Some((est - integration::reference_integral(f, density)?).abs())
        }
        None => None,
    };
    Ok((drv.len() as u64, Measured { n, dstar, integ_err }))
}

fn run_parameter(cfg: &ExperimentConfig, density: &Density, integrand: Option<&Integrand>, param: u64) -> Result<Row> {
    let start = Instant::now();
    let seeds: Vec<Option<u64>> = if cfg.family == Family::Random {
        cfg.seeds.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    let runs = seeds
        .iter()
        .map(|&seed| {
            measure_one(
                cfg,
                density,
                integrand,
                DriverSpec {
                    family: cfg.family,
                    parameter: param,
                    seed,
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let k = runs.len() as f64;
    let m = runs[0].0;
    let mean_n = runs.iter().map(|r| r.1.n as f64).sum::<f64>() / k;
    let mean = |get: fn(&Measured) -> Option<f64>| -> Option<f64> {
        let vals: Option<Vec<f64>> = runs.iter().map(|r| get(&r.1)).collect();
        vals.map(|v| v.iter().sum::<f64>() / k)
    };
    let qr = if cfg.wants(Measure::Qr) {
        Some(match (cfg.family, cfg.r_policy) {
            (Family::Fibonacci, RPolicy::Auto) => {
                let kk = param as u32;
                criterion::qr_fibonacci(kk, criterion::default_r_for_fibonacci(kk)?)?.value
            }
            (Family::Fibonacci, RPolicy::Fixed(r)) => criterion::qr_fibonacci(param as u32, r)?.value,
            (_, RPolicy::Fixed(r)) => {
                let mut total = 0.0;
                for &seed in &seeds {
                    let drv = DriverSpec {
                        family: cfg.family,
                        parameter: param,
                        seed,
                    }
                    .generate()?;
                    total += criterion::qr_general(&drv.points, r, cfg.cost_cap)?.value;
                }
                total / k
            }
            (_, RPolicy::Auto) => unreachable!("rejected by validate"),
        })
    } else {
        None
    };
    Ok(Row {
        family: cfg.family,
        param,
        m,
        n: mean_n.round() as u64,
        accept_rate: mean_n / m as f64,
        dstar: mean(|r| r.dstar),
        qr,
        integ_err: mean(|r| r.integ_err),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs every parameter of the sweep and fits the convergence slopes.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let density = cfg.density.build(cfg.bound)?;
    let integrand = if cfg.wants(Measure::IntegrationError) {
        Some(Integrand::builtin(&cfg.integrand)?)
    } else {
        None
    };
    let mut rows = cfg
        .parameters
        .values()
        .into_par_iter()
        .map(|p| {
            run_parameter(cfg, &density, integrand.as_ref(), p)
                .map_err(|e| Error::InvalidParameter(format!("{} parameter {p}: {e}", cfg.family)))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| (a.family, a.n, a.param).cmp(&(b.family, b.n, b.param)));

    let min_n = cfg.fit_min_n;
    let fit_rows = || rows.iter().filter(move |r| r.n >= min_n);
    let dstar_fit = fit_if_possible(fit_rows().filter_map(|r| r.dstar.map(|d| (r.n as f64, d))).collect());
    let integ_fit = fit_if_possible(fit_rows().filter_map(|r| r.integ_err.map(|e| (r.n as f64, e))).collect());
    let qr_fit = fit_if_possible(rows.iter().filter_map(|r| r.qr.map(|q| (r.m as f64, q))).collect());
    let max_n = rows.iter().map(|r| r.n).max().unwrap_or(0);
    Ok(ConvergenceReport {
        density: density.name().to_string(),
        bound: density.bound(),
        norm: density.norm(),
        family: cfg.family,
        rows,
        dstar_fit,
        qr_fit,
        integ_fit,
        fit_range: (min_n, max_n),
    })
}

/// Fraction of `better` rows whose `dstar` is at most that of `other`
/// interpolated log-log at the same `N`. Rows outside `other`'s `N` range
/// or below `min_n` are not compared. Returns `(not_worse, compared)`.
pub fn fraction_not_worse(better: &[Row], other: &[Row], min_n: u64) -> (usize, usize) {
    let reference: Vec<(f64, f64)> = other
        .iter()
        .filter_map(|r| r.dstar.map(|d| ((r.n as f64).ln(), d.ln())))
        .collect();
    let (mut wins, mut total) = (0, 0);
    for r in better.iter().filter(|r| r.n >= min_n) {
        let Some(d) = r.dstar else { continue };
        let x = (r.n as f64).ln();
        let Some(i) = reference.windows(2).position(|w| w[0].0 <= x && x <= w[1].0) else {
            continue;
        };
        let (a, b) = (reference[i], reference[i + 1]);
        let y = if b.0 == a.0 { a.1 } else { a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0) };
        total += 1;
        if d.ln() <= y {
            wins += 1;
        }
    }
    (wins, total)
}

/// Sweep layout for one figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigurePlan {
    pub density: String,
    pub fibonacci: Parameters,
    pub kronecker: Parameters,
    pub grid: Parameters,
    pub random: Parameters,
    pub seeds: Vec<u64>,
}

impl FigurePlan {
    pub fn standard(density: &str) -> Self {
        FigurePlan {
            density: density.into(),
            fibonacci: Parameters::Range([10, 25]),
            kronecker: Parameters::Log2Range([8, 20]),
            grid: Parameters::Log2Range([8, 20]),
            random: Parameters::Log2Range([8, 20]),
            seeds: default_seeds(),
        }
    }

    fn config(&self, family: Family) -> ExperimentConfig {
        let params = match family {
            Family::Fibonacci => self.fibonacci.clone(),
            Family::Kronecker => self.kronecker.clone(),
            Family::Grid => self.grid.clone(),
            Family::Random => self.random.clone(),
        };
        let mut cfg = ExperimentConfig::new(DensitySpec::Named(self.density.clone()), family, params);
        cfg.seeds = self.seeds.clone();
        cfg.measures = vec![Measure::Dstar, Measure::AcceptRate];
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub family: Family,
    pub slope: Option<f64>,
    pub stderr: Option<f64>,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureSummary {
    pub file: String,
    pub density: String,
    #[serde(rename = "L")]
    pub bound: f64,
    #[serde(rename = "C")]
    pub norm: f64,
    pub series: Vec<SeriesSummary>,
    /// Fibonacci rows with `dstar` not above the interpolated Kronecker value.
    pub fibonacci_not_worse: usize,
    pub fibonacci_compared: usize,
    /// At least 80% of the compared sizes favour the Fibonacci lattice.
    pub ordering_holds: bool,
    #[serde(skip)]
    pub reports: Vec<ConvergenceReport>,
}

impl FigureSummary {
    pub fn slope(&self, family: Family) -> Option<f64> {
        self.series.iter().find(|s| s.family == family).and_then(|s| s.slope)
    }
}

fn figure_csv(reports: &[ConvergenceReport]) -> String {
    let mut rows: Vec<&Row> = reports.iter().flat_map(|r| &r.rows).collect();
    rows.sort_by(|a, b| (a.family, a.n, a.param).cmp(&(b.family, b.n, b.param)));
    let mut s = String::from("family,param,M,N,dstar\n");
    for r in rows {
        let d = r.dstar.map(format_decimal).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{},{}", r.family, r.param, r.m, r.n, d);
    }
    s
}

/// Runs the four driver families for one density.
pub fn run_figure(plan: &FigurePlan, file: &str) -> Result<FigureSummary> {
    let reports = Family::ALL
        .iter()
        .map(|&f| run_convergence(&plan.config(f)))
        .collect::<Result<Vec<_>>>()?;
    let by = |f: Family| reports.iter().find(|r| r.family == f).expect("all families ran");
    let (wins, total) = fraction_not_worse(&by(Family::Fibonacci).rows, &by(Family::Kronecker).rows, DEFAULT_FIT_MIN_N);
    Ok(FigureSummary {
        file: file.into(),
        density: plan.density.clone(),
        bound: reports[0].bound,
        norm: reports[0].norm,
        series: reports
            .iter()
            .map(|r| SeriesSummary {
                family: r.family,
                slope: r.dstar_fit.map(|f| f.slope),
                stderr: r.dstar_fit.map(|f| f.stderr),
                rows: r.rows.len(),
            })
            .collect(),
        fibonacci_not_worse: wins,
        fibonacci_compared: total,
        ordering_holds: total > 0 && wins as f64 >= 0.8 * total as f64,
        reports,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `figure1.csv`, `figure2.csv` and `summary.json` for the given plans.
pub fn reproduce_figures_with(out_dir: &Path, plans: &[FigurePlan; 2]) -> Result<Vec<FigureSummary>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut summaries = Vec::new();
    for (i, plan) in plans.iter().enumerate() {
        let file = format!("figure{}.csv", i + 1);
        let summary = run_figure(plan, &file)?;
        write_file(&out_dir.join(&file), &figure_csv(&summary.reports))?;
        summaries.push(summary);
    }
    let json = serde_json::to_string_pretty(&summaries).map_err(|e| Error::Parse(e.to_string()))?;
    write_file(&out_dir.join("summary.json"), &(json + "\n"))?;
    Ok(summaries)
}

/// Both figures with the default sweeps (Example 1 and Example 2 densities).
pub fn reproduce_figures(out_dir: &Path) -> Result<Vec<FigureSummary>> {
    reproduce_figures_with(
        out_dir,
        &[FigurePlan::standard("example1"), FigurePlan::standard("example2")],
    )
}

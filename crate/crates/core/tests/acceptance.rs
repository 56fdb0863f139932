//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use qmcar::criterion::{default_r_for_fibonacci, qr_fibonacci, qr_general};
use qmcar::discrepancy::{
    grid_oracle_1d, grid_oracle_2d, star_discrepancy_1d, star_discrepancy_1d_samples, star_discrepancy_2d_uniform,
};
use qmcar::driver::{fibonacci, fibonacci_lattice, regular_grid};
use qmcar::experiments::{fit_slope, run_figure, FigurePlan, FigureSummary};
use qmcar::integration::{integration_report, qmc_estimate, Integrand};
use qmcar::sampler::ar_deterministic;
use qmcar::{make_builtin, DriverSpec, Error, Family, Point2, SampleSet};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn in_band(x: Option<f64>, lo: f64, hi: f64) -> bool {
    x.is_some_and(|s| (lo..=hi).contains(&s))
}

fn slopes_ok(s: &FigureSummary) -> (bool, String) {
    let f = s.slope(Family::Fibonacci);
    let k = s.slope(Family::Kronecker);
    let r = s.slope(Family::Random);
    let g = s.slope(Family::Grid);
    let ok = in_band(f, -0.90, -0.65) && in_band(k, -0.88, -0.60) && in_band(r, -0.62, -0.40) && in_band(g, -0.65, -0.35);
    let show = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.3}"));
    (
        ok,
        format!(
            "slopes fibonacci {} kronecker {} random {} grid {}",
            show(f),
            show(k),
            show(r),
            show(g)
        ),
    )
}

fn figure(density: &str) -> (FigureSummary, f64) {
    let start = Instant::now();
    let s = run_figure(&FigurePlan::standard(density), density).expect("figure sweep");
    (s, start.elapsed().as_secs_f64())
}

fn criterion_1(s: &FigureSummary, secs: f64) -> Outcome {
    let (ok, detail) = slopes_ok(s);
    outcome(ok && secs < 300.0, format!("{detail}; {secs:.1}s"))
}

fn criterion_2(s: &FigureSummary, secs: f64) -> Outcome {
    let (ok, detail) = slopes_ok(s);
    outcome(
        ok && s.ordering_holds && secs < 300.0,
        format!(
            "{detail}; fibonacci <= kronecker at {}/{} sizes; {secs:.1}s",
            s.fibonacci_not_worse, s.fibonacci_compared
        ),
    )
}

fn criterion_3() -> Outcome {
    let specs = [
        DriverSpec { family: Family::Fibonacci, parameter: 26, seed: None },
        DriverSpec { family: Family::Kronecker, parameter: 1 << 17, seed: None },
        DriverSpec { family: Family::Grid, parameter: 1 << 17, seed: None },
    ];
    let mut worst: f64 = 0.0;
    let mut rates = Vec::new();
    for name in ["example1", "example2"] {
        let d = make_builtin(name, None).unwrap();
        for spec in specs {
            let set = spec.generate().unwrap();
            assert!(set.len() >= 100_000);
            let s = ar_deterministic(&d, &set.points);
            worst = worst.max((s.acceptance_rate() - d.acceptance_ratio()).abs());
            rates.push(format!("{name}/{} {:.4}", spec.family, s.acceptance_rate()));
        }
    }
    outcome(worst <= 0.01, format!("max |N/M - C/L| = {worst:.2e}; {}", rates.join(", ")))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let pts: Vec<(f64, f64)> = (9..=24)
        .map(|k| {
            let q = qr_fibonacci(k, default_r_for_fibonacci(k).unwrap()).unwrap();
            (fibonacci(k) as f64, q.value)
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let fit = fit_slope(&pts).unwrap();
    outcome(
        (-0.80..=-0.55).contains(&fit.slope) && secs < 60.0,
        format!("slope {:.3} +- {:.3}; {secs:.2}s", fit.slope, fit.stderr),
    )
}

fn criterion_5() -> Outcome {
    let d = make_builtin("example1", None).unwrap();
    let mut ratios: Vec<f64> = (9..=24)
        .map(|k| {
            let set = ar_deterministic(&d, &fibonacci_lattice(k).unwrap().points);
            let dstar = star_discrepancy_1d(&d, &set).unwrap().value;
            dstar / qr_fibonacci(k, default_r_for_fibonacci(k).unwrap()).unwrap().value
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let max = *ratios.last().unwrap();
    let median = 0.5 * (ratios[7] + ratios[8]);
    outcome(max <= 10.0 * median, format!("max ratio {max:.4}, median {median:.4}"))
}

fn on_lattice_sets(rng: &mut ChaCha20Rng) -> Vec<Vec<Point2>> {
    let mut sets = Vec::new();
    for _ in 0..20 {
        let m = rng.gen_range(1..=200);
        sets.push(
            (0..m)
                .map(|_| Point2::new(rng.gen_range(0..2000) as f64 / 2000.0, rng.gen_range(0..2000) as f64 / 2000.0))
                .collect(),
        );
    }
    for n in [1u64, 2, 4, 5, 8, 10] {
        sets.push(regular_grid(n * n).unwrap().points);
    }
    for k in [3, 5, 6] {
        sets.push(fibonacci_lattice(k).unwrap().points);
    }
    sets
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let names = ["example1", "example2", "uniform"];
    let grid = 100_000;
    let mut worst_1d: f64 = 0.0;
    let mut ok_1d = true;
    for case in 0..100 {
        let d = make_builtin(names[case % 3], None).unwrap();
        let family = Family::ALL[rng.gen_range(0..4)];
        let spec = match family {
            Family::Fibonacci => DriverSpec { family, parameter: rng.gen_range(5..=20), seed: None },
            _ => DriverSpec { family, parameter: rng.gen_range(10..=20_000), seed: Some(case as u64) },
        };
        let spec = if family == Family::Random { spec } else { DriverSpec { seed: None, ..spec } };
        let set = ar_deterministic(&d, &spec.generate().unwrap().points);
        if set.accepted() == 0 {
            continue;
        }
        let exact = star_discrepancy_1d(&d, &set).unwrap().value;
        let oracle = grid_oracle_1d(&d, &set, grid).unwrap().value;
        let slack = (d.bound() / d.norm() + 1.0) / grid as f64;
        ok_1d &= exact >= oracle - 1e-15 && exact - oracle <= slack;
        worst_1d = worst_1d.max((exact - oracle).abs());
    }

    let mut worst_q: f64 = 0.0;
    for k in 5..=14 {
        let r = default_r_for_fibonacci(k).unwrap();
        let fast = qr_fibonacci(k, r).unwrap().value;
        let general = qr_general(&fibonacci_lattice(k).unwrap().points, r, 10_000_000_000).unwrap().value;
        worst_q = worst_q.max((fast - general).abs());
    }

    let mut worst_2d: f64 = 0.0;
    let sets = on_lattice_sets(&mut rng);
    for pts in &sets {
        let exact = star_discrepancy_2d_uniform(pts).unwrap().value;
        let oracle = grid_oracle_2d(pts, 2000).unwrap().value;
        worst_2d = worst_2d.max((exact - oracle).abs());
    }
    outcome(
        ok_1d && worst_q <= 1e-9 && worst_2d <= 2e-5,
        format!(
            "1-D worst gap {worst_1d:.2e} (<= ~{:.1e}), Q_R paths {worst_q:.1e}, 2-D worst {worst_2d:.1e} over {} sets",
            (1.0 / 0.72 + 1.0) / grid as f64,
            sets.len()
        ),
    )
}

fn criterion_7() -> Outcome {
    let integrands = ["1", "x", "x2", "xc2", "sinpi"];
    let densities = ["example1", "example2", "uniform"];
    let mut checked = 0;
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    for dn in densities {
        let d = make_builtin(dn, None).unwrap();
        for family in Family::ALL {
            for i in 0..10u64 {
                let spec = match family {
                    Family::Fibonacci => DriverSpec { family, parameter: 8 + i, seed: None },
                    Family::Random => DriverSpec { family, parameter: 100 << i, seed: Some(i + 1) },
                    _ => DriverSpec { family, parameter: 100 << i, seed: None },
                };
                let set = ar_deterministic(&d, &spec.generate().unwrap().points);
                for fname in integrands {
                    let f = Integrand::builtin(fname).unwrap();
                    let r = integration_report(&f, &d, &set).unwrap();
                    checked += 1;
                    if r.abs_error > r.bound + 1e-9 {
                        violations += 1;
                    }
                    if r.bound > 0.0 {
                        tightest = tightest.min(r.bound - r.abs_error);
                    }
                }
            }
        }
    }

    let d = make_builtin("example1", None).unwrap();
    let f = Integrand::builtin("x").unwrap();
    let pts: Vec<(f64, f64)> = (10..=24)
        .filter_map(|k| {
            let set = ar_deterministic(&d, &fibonacci_lattice(k).unwrap().points);
            let r = integration_report(&f, &d, &set).unwrap();
            (r.n >= 100).then_some((r.n as f64, r.abs_error))
        })
        .collect();
    let fit = fit_slope(&pts).unwrap();
    outcome(
        violations == 0 && fit.slope <= -0.6,
        format!(
            "{violations} violations in {checked} cases (smallest slack {tightest:.1e}); error slope {:.3} +- {:.3} over {} sizes",
            fit.slope,
            fit.stderr,
            pts.len()
        ),
    )
}

fn classical_uniform(samples: &[f64]) -> f64 {
    let mut y = samples.to_vec();
    y.sort_by(f64::total_cmp);
    let n = y.len() as f64;
    y.iter()
        .enumerate()
        .map(|(j, &v)| ((j + 1) as f64 / n - v).max(v - j as f64 / n))
        .fold(0.0, f64::max)
}

fn criterion_8() -> Outcome {
    let uniform = make_builtin("uniform", None).unwrap();
    let exact_bound = uniform.with_bound(1.0).unwrap();
    let mut notes = Vec::new();
    let mut ok = true;

    for family in Family::ALL {
        let spec = match family {
            Family::Fibonacci => DriverSpec { family, parameter: 15, seed: None },
            Family::Random => DriverSpec { family, parameter: 1000, seed: Some(9) },
            _ => DriverSpec { family, parameter: 1000, seed: None },
        };
        let set = spec.generate().unwrap();
        // The grid places points on x2 = 1, which only L = 1 accepts.
        let d = if family == Family::Grid { &exact_bound } else { &uniform };
        let s = ar_deterministic(d, &set.points);
        ok &= s.accepted() == set.len();
        let a = star_discrepancy_1d(d, &s).unwrap().value;
        let b = classical_uniform(&s.samples);
        ok &= (a - b).abs() <= 1e-15;
    }
    notes.push("uniform accepts 100% and matches classical D*".to_string());

    let half = star_discrepancy_1d_samples(&uniform, &[0.5]).unwrap().value;
    ok &= (half - 0.5).abs() < 1e-15;
    let corner = star_discrepancy_2d_uniform(&[Point2::new(0.5, 0.5)]).unwrap().value;
    ok &= (corner - 0.75).abs() < 1e-15;
    notes.push(format!("single point 1-D {half} 2-D {corner}"));

    let empty = SampleSet {
        samples: vec![],
        proposed: 10,
        bound: 1.0,
        density: "uniform".into(),
    };
    ok &= matches!(star_discrepancy_1d(&uniform, &empty), Err(Error::EmptySampleSet));
    ok &= qmc_estimate(&Integrand::builtin("x").unwrap(), &empty).is_err();
    let none = ar_deterministic(
        &uniform.with_bound(1e9).unwrap(),
        &[Point2::new(0.5, 0.5), Point2::new(0.2, 0.9)],
    );
    ok &= none.accepted() == 0 && none.proposed == 2;
    notes.push("empty sample set rejected by discrepancy and estimator".into());
    outcome(ok, notes.join("; "))
}

fn main() {
    let started = Instant::now();
    let (fig1, t1) = figure("example1");
    let (fig2, t2) = figure("example2");
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome>)> = vec![
        ("1 figure-1 slopes (example1)", Box::new(|| criterion_1(&fig1, t1))),
        ("2 figure-2 slopes and ordering (example2)", Box::new(|| criterion_2(&fig2, t2))),
        ("3 acceptance-rate identity", Box::new(criterion_3)),
        ("4 criterion scaling on Fibonacci lattices", Box::new(criterion_4)),
        ("5 discrepancy bounded by criterion", Box::new(criterion_5)),
        ("6 oracle equivalence", Box::new(criterion_6)),
        ("7 Koksma-Hlawka audit", Box::new(criterion_7)),
        ("8 degenerate cases", Box::new(criterion_8)),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} failed, {:.1}s total", failed, started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}

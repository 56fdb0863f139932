use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use qmcar::criterion::{default_r_for_fibonacci, qr_fibonacci, qr_general};
use qmcar::density::DensitySpec;
use qmcar::discrepancy::{grid_oracle_1d, star_discrepancy_1d, star_discrepancy_1d_samples, star_discrepancy_2d_uniform};
use qmcar::driver::{fibonacci, fibonacci_lattice, kronecker, random_driver, CubicBasis};
use qmcar::experiments::{fit_slope, run_convergence, ExperimentConfig, Measure, Parameters};
use qmcar::sampler::{accepts, ar_deterministic};
use qmcar::{make_builtin, DriverSpec, Family};

const BUILTINS: [&str; 3] = ["example1", "example2", "uniform"];

#[test]
fn cdf_closed_form_matches_quadrature() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    for name in BUILTINS {
        let d = make_builtin(name, None).unwrap();
        assert!(d.has_antiderivative(), "{name}");
        for _ in 0..10_000 {
            let t: f64 = rng.gen();
            let diff = (d.cdf(t).unwrap() - d.cdf_quadrature(t).unwrap()).abs();
            assert!(diff <= 1e-10, "{name} at {t}: {diff}");
        }
    }
}

#[test]
fn default_bound_dominates_random_audit() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for name in BUILTINS {
        let d = make_builtin(name, None).unwrap();
        for _ in 0..1_000_000 {
            let x: f64 = rng.gen();
            assert!(d.eval(x) <= d.bound(), "{name} at {x}");
        }
    }
}

#[test]
fn fibonacci_second_coordinates_are_permutations() {
    for k in 3..=15 {
        let f = fibonacci(k) as usize;
        let mut seen = vec![false; f];
        for p in fibonacci_lattice(k).unwrap().points {
            let r = (p.x2 * f as f64).round() as usize;
            assert!(!seen[r], "k = {k}");
            seen[r] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}

#[test]
fn kronecker_discrepancy_trends_down() {
    let basis = CubicBasis::new().unwrap();
    // 2^13 is the largest power of two under the exact 2-D size cap.
    let points: Vec<(f64, f64)> = (6..=13)
        .map(|e| {
            let m = 1u64 << e;
            let d = star_discrepancy_2d_uniform(&kronecker(m, &basis).unwrap().points).unwrap();
            (m as f64, d.value)
        })
        .collect();
    assert!(fit_slope(&points).unwrap().slope < 0.0);
}

#[test]
fn driver_specs_regenerate_bit_identical() {
    let specs = [
        DriverSpec { family: Family::Fibonacci, parameter: 17, seed: None },
        DriverSpec { family: Family::Kronecker, parameter: 5000, seed: None },
        DriverSpec { family: Family::Grid, parameter: 4900, seed: None },
        DriverSpec { family: Family::Random, parameter: 3000, seed: Some(42) },
    ];
    for spec in specs {
        let text = serde_json::to_string(&spec).unwrap();
        let again: DriverSpec = serde_json::from_str(&text).unwrap();
        let (a, b) = (spec.generate().unwrap(), again.generate().unwrap());
        assert!(a.points.iter().zip(&b.points).all(|(p, q)| p.x1.to_bits() == q.x1.to_bits() && p.x2.to_bits() == q.x2.to_bits()));
        assert_eq!(a.len(), b.len());
    }
}

#[test]
fn kronecker_matches_extended_precision_fractional_parts() {
    // {xi} and {xi^2} in 2^-100 fixed point, from 60-digit arithmetic.
    const ALPHA: i128 = 290_397_206_179_929_386_094_378_016_156;
    const BETA: i128 = 753_381_251_905_673_528_451_304_455_825;
    let one = 1i128 << 100;
    let scale = 2f64.powi(100);
    let set = kronecker(1 << 16, &CubicBasis::new().unwrap()).unwrap();
    for (j, p) in set.points.iter().enumerate() {
        let j = j as i128 + 1;
        let x1 = (j * ALPHA).rem_euclid(one) as f64 / scale;
        let x2 = (j * BETA).rem_euclid(one) as f64 / scale;
        assert!((p.x1 - x1).abs() < 1e-15 && (p.x2 - x2).abs() < 1e-15, "j = {j}");
    }
}

#[test]
fn projection_and_rejection_are_consistent() {
    for name in BUILTINS {
        let d = make_builtin(name, None).unwrap();
        let set = random_driver(2000, 5).unwrap();
        let samples = ar_deterministic(&d, &set.points);
        let mut accepted = samples.samples.iter();
        for p in &set.points {
            if accepts(&d, p) {
                assert_eq!(accepted.next().copied(), Some(p.x1));
            } else {
                assert!(d.eval(p.x1) < d.bound() * p.x2);
            }
        }
        assert!(accepted.next().is_none());
        assert!(samples.accepted() <= set.len());
    }
}

#[test]
fn raising_the_bound_never_adds_samples() {
    let d = make_builtin("example1", None).unwrap();
    let pts = fibonacci_lattice(18).unwrap().points;
    let mut previous = usize::MAX;
    for factor in [1.0, 1.01, 1.1, 1.5, 2.0, 4.0] {
        let n = ar_deterministic(&d.with_bound(d.bound() * factor).unwrap(), &pts).accepted();
        assert!(n <= previous);
        previous = n;
    }
}

#[test]
fn exact_1d_dominates_oracle_across_families() {
    let grid = 10_000;
    for name in BUILTINS {
        let d = make_builtin(name, None).unwrap();
        let slack = (d.bound() / d.norm() + 1.0) / grid as f64;
        for family in Family::ALL {
            for i in 0..20u64 {
                let spec = match family {
                    Family::Fibonacci => DriverSpec { family, parameter: 5 + i % 12, seed: None },
                    Family::Random => DriverSpec { family, parameter: 50 + 97 * i, seed: Some(i) },
                    _ => DriverSpec { family, parameter: 50 + 97 * i, seed: None },
                };
                let set = ar_deterministic(&d, &spec.generate().unwrap().points);
                if set.accepted() == 0 {
                    continue;
                }
                let exact = star_discrepancy_1d(&d, &set).unwrap().value;
                let oracle = grid_oracle_1d(&d, &set, grid).unwrap().value;
                assert!(exact >= oracle - 1e-15 && exact - oracle <= slack, "{name} {family} {i}: {exact} vs {oracle}");
            }
        }
    }
}

#[test]
fn oracle_is_monotone_in_nested_grids() {
    let d = make_builtin("example2", None).unwrap();
    let set = ar_deterministic(&d, &random_driver(300, 3).unwrap().points);
    let coarse = grid_oracle_1d(&d, &set, 1_000).unwrap().value;
    let fine = grid_oracle_1d(&d, &set, 100_000).unwrap().value;
    assert!(fine >= coarse);
}

#[test]
fn fast_path_equals_general_path() {
    for k in 5..=14 {
        let r = default_r_for_fibonacci(k).unwrap();
        let fast = qr_fibonacci(k, r).unwrap();
        let general = qr_general(&fibonacci_lattice(k).unwrap().points, r, 10_000_000_000).unwrap();
        assert!((fast.value - general.value).abs() <= 1e-9, "k = {k}");
        assert!(fast.value >= 1.0 / r as f64);
    }
}

#[test]
fn random_driver_criterion_is_small() {
    let pts = random_driver(10_000, 1).unwrap().points;
    let q = qr_general(&pts, 16, 10_000_000_000).unwrap().value;
    assert!(q < 2.0, "{q}");
    assert!(q < qr_general(&[qmcar::Point2::new(0.3, 0.6)], 16, 1_000_000).unwrap().value);
}

#[test]
fn noisy_power_law_slope() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let pts: Vec<(f64, f64)> = (0..30)
        .map(|i| {
            let n = 100.0 * 1.3f64.powi(i);
            let noise = 1.0 + rng.gen_range(-0.05..0.05);
            (n, n.powf(-2.0 / 3.0) * noise)
        })
        .collect();
    let fit = fit_slope(&pts).unwrap();
    assert!((fit.slope + 2.0 / 3.0).abs() <= 3.0 * fit.stderr, "{fit:?}");
}

#[test]
fn experiment_csv_is_deterministic() {
    let mut cfg = ExperimentConfig::new(
        DensitySpec::Named("example2".into()),
        Family::Random,
        Parameters::List(vec![4096, 256, 1024, 512]),
    );
    cfg.seeds = vec![1, 2, 3];
    cfg.measures = vec![Measure::Dstar, Measure::AcceptRate, Measure::IntegrationError];
    let a = run_convergence(&cfg).unwrap();
    let b = run_convergence(&cfg).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert!(a.rows.windows(2).all(|w| w[0].n <= w[1].n));
    assert!(a.rows.iter().all(|r| r.n <= r.m && r.integ_err.is_some()));
    assert!(a.dstar_fit.is_some());
}

#[test]
fn experiment_rows_report_sampler_n() {
    let mut cfg = ExperimentConfig::new(DensitySpec::Named("example1".into()), Family::Fibonacci, Parameters::Range([8, 14]));
    cfg.measures = vec![Measure::Dstar, Measure::Qr];
    let report = run_convergence(&cfg).unwrap();
    let d = make_builtin("example1", None).unwrap();
    for row in &report.rows {
        let n = ar_deterministic(&d, &fibonacci_lattice(row.param as u32).unwrap().points).accepted();
        assert_eq!(row.n as usize, n);
        assert_eq!(row.m, fibonacci(row.param as u32) as u64);
        assert!(row.qr.unwrap() > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cdf_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0, which in 0usize..3) {
        let d = make_builtin(BUILTINS[which], None).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(d.cdf(lo).unwrap() <= d.cdf(hi).unwrap());
    }

    #[test]
    fn discrepancy_is_permutation_invariant(mut ys in proptest::collection::vec(0.0f64..1.0, 1..200), seed in any::<u64>()) {
        let d = make_builtin("example1", None).unwrap();
        let before = star_discrepancy_1d_samples(&d, &ys).unwrap().value;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for i in (1..ys.len()).rev() {
            ys.swap(i, rng.gen_range(0..=i));
        }
        prop_assert_eq!(before, star_discrepancy_1d_samples(&d, &ys).unwrap().value);
    }

    #[test]
    fn discrepancy_is_scale_invariant(ys in proptest::collection::vec(0.0f64..1.0, 1..200), c in 0.01f64..100.0, which in 0usize..3) {
        let d = make_builtin(BUILTINS[which], None).unwrap();
        let scaled = d.scaled(c).unwrap();
        let a = star_discrepancy_1d_samples(&d, &ys).unwrap().value;
        let b = star_discrepancy_1d_samples(&scaled, &ys).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-14, "{} vs {}", a, b);
    }

    #[test]
    fn discrepancy_in_unit_interval(ys in proptest::collection::vec(0.0f64..=1.0, 1..100), which in 0usize..3) {
        let d = make_builtin(BUILTINS[which], None).unwrap();
        let v = star_discrepancy_1d_samples(&d, &ys).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&v));
    }
}

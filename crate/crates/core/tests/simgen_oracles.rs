use avcheck::simgen::{
    correlation_grid, fit_marginal, inject_outlier, replicate_rng, select_marginal, simulate_copula_table, simulate_step_table,
    Candidate, CopulaScenario, CopulaVariable, CorrelationMatrix, DayKind, Distribution, Family, Marginal, OutlierRule,
    PairValues, StepScenario,
};
use avcheck::stats::{pearson_corr, tukey_outliers};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution as _, Gamma, LogNormal, Normal, Poisson, Weibull};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn weibull_draws(n: usize, shape: f64, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Weibull::new(scale, shape).unwrap();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

fn weibull_loglik(x: &[f64], shape: f64, scale: f64) -> f64 {
    x.iter()
        .map(|&v| (shape / scale).ln() + (shape - 1.0) * (v / scale).ln() - (v / scale).powf(shape))
        .sum()
}

fn ks_statistic(mut x: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn single_variable(name: &str, marginal: Marginal) -> CopulaVariable {
    CopulaVariable {
        name: name.into(),
        marginal,
        outlier: None,
    }
}

#[test]
fn weibull_recovery_and_profile_grid() {
    let x = weibull_draws(10_000, 2.0, 10.0, 1);
    let fit = fit_marginal(&x, Family::Weibull).unwrap();
    let Distribution::Weibull { shape, scale } = fit.marginal.distribution else {
        panic!("wrong family {:?}", fit.family());
    };
    assert!((shape - 2.0).abs() < 0.1, "shape {shape}");
    assert!((scale - 10.0).abs() < 0.3, "scale {scale}");

    // no point on a fine grid around the estimate beats it
    let best = weibull_loglik(&x, shape, scale);
    assert!((best - fit.log_likelihood).abs() < 1e-6 * best.abs());
    for i in -20..=20 {
        for j in -20..=20 {
            let s = shape * (1.0 + 0.002 * i as f64);
            let c = scale * (1.0 + 0.002 * j as f64);
            assert!(weibull_loglik(&x, s, c) <= best + 1e-9, "({s}, {c}) beats the estimate");
        }
    }
}

#[test]
fn weibull_selected_over_normal_and_exponential() {
    let candidates: Vec<Candidate> = [Family::Normal, Family::Exponential, Family::Weibull].map(Candidate::from).to_vec();
    let wins = (0..100)
        .filter(|&t| {
            let x = weibull_draws(2000, 2.0, 10.0, 100 + t);
            select_marginal(&x, &candidates).unwrap().family() == Family::Weibull
        })
        .count();
    assert!(wins >= 90, "{wins}/100");
}

#[test]
fn poisson_not_beaten_by_negative_binomial() {
    let mut ok = 0;
    for t in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + t);
        let d = Poisson::new(100.0).unwrap();
        let x: Vec<f64> = (0..2000).map(|_| d.sample(&mut rng)).collect();
        let pois = fit_marginal(&x, Family::Poisson).unwrap();
        let nb = fit_marginal(&x, Family::NegativeBinomial).unwrap();
        let chosen = select_marginal(&x, &[Family::Poisson.into(), Family::NegativeBinomial.into()]).unwrap();
        if chosen.family() == Family::Poisson || (pois.aic - nb.aic).abs() <= 2.0 {
            ok += 1;
        }
    }
    assert!(ok >= 90, "{ok}/100");
}

#[test]
fn aic_identity_for_every_family() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pos: Vec<f64> = {
        let d = Gamma::new(3.0, 2.0).unwrap();
        (0..500).map(|_| d.sample(&mut rng)).collect()
    };
    let counts: Vec<f64> = {
        let d = Poisson::new(20.0).unwrap();
        (0..500).map(|_| d.sample(&mut rng)).collect()
    };
    let unit: Vec<f64> = {
        let d = Beta::new(2.5, 6.0).unwrap();
        (0..500).map(|_| d.sample(&mut rng)).collect()
    };
    let logn: Vec<f64> = {
        let d = LogNormal::new(1.0, 0.5).unwrap();
        (0..500).map(|_| d.sample(&mut rng)).collect()
    };
    let cases = [
        (Family::Poisson, &counts),
        (Family::NegativeBinomial, &counts),
        (Family::Gamma, &pos),
        (Family::LogNormal, &logn),
        (Family::Exponential, &pos),
        (Family::Weibull, &pos),
        (Family::Normal, &pos),
        (Family::Beta, &unit),
    ];
    for (family, data) in cases {
        let fit = fit_marginal(data, family).unwrap();
        let k = family.n_params() as f64;
        assert_eq!(fit.aic, 2.0 * k - 2.0 * fit.log_likelihood, "{family:?}");
        let ll: f64 = data.iter().map(|&v| fit.marginal.distribution.ln_density(v)).sum();
        assert!((ll - fit.log_likelihood).abs() < 1e-8 * ll.abs(), "{family:?}");
    }
}

#[test]
fn copula_weibull_marginal_passes_ks() {
    let marginal = Marginal::new(Distribution::Weibull { shape: 3.5, scale: 62.0 });
    let scenario = CopulaScenario::new(10_000, vec![single_variable("w", marginal)], vec![CorrelationMatrix::identity(1)]).unwrap();
    let draw = simulate_copula_table(&scenario, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    let x = draw.table.values("w").unwrap().to_vec();
    let d = ks_statistic(x, |v| 1.0 - (-(v / 62.0).powf(3.5)).exp());
    assert!(d <= 0.02, "KS {d}");
}

#[test]
fn copula_marginals_pass_ks_at_one_percent() {
    // mixed marginals under a correlated latent
    let vars = vec![
        single_variable("g", Marginal::new(Distribution::Gamma { shape: 2.0, rate: 0.5 })),
        single_variable("l", Marginal::new(Distribution::LogNormal { meanlog: 0.0, sdlog: 0.7 })),
        single_variable("n", Marginal::new(Distribution::Normal { mean: 20.0, sd: 5.0 })),
    ];
    let corr = CorrelationMatrix::from_lower(3, &[0.4, -0.3, 0.2]).unwrap();
    let scenario = CopulaScenario::new(10_000, vars, vec![corr]).unwrap();
    let draw = simulate_copula_table(&scenario, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
    let gamma = statrs::distribution::Gamma::new(2.0, 0.5).unwrap();
    let logn = statrs::distribution::LogNormal::new(0.0, 0.7).unwrap();
    let norm = statrs::distribution::Normal::new(20.0, 5.0).unwrap();
    // critical value at alpha 0.01: 1.628 / sqrt(n)
    let crit = 1.628 / 100.0;
    for (name, d) in [
        ("g", ks_statistic(draw.table.values("g").unwrap().to_vec(), |v| gamma.cdf(v))),
        ("l", ks_statistic(draw.table.values("l").unwrap().to_vec(), |v| logn.cdf(v))),
        ("n", ks_statistic(draw.table.values("n").unwrap().to_vec(), |v| norm.cdf(v))),
    ] {
        assert!(d < crit, "{name}: KS {d}");
    }
}

#[test]
fn latent_correlation_survives_normal_marginals() {
    let normal = Marginal::new(Distribution::Normal { mean: 0.0, sd: 1.0 });
    let two = vec![single_variable("a", normal), single_variable("b", normal)];
    let scenario = CopulaScenario::new(10_000, two, vec![CorrelationMatrix::from_lower(2, &[0.5]).unwrap()]).unwrap();
    let t = simulate_copula_table(&scenario, &mut ChaCha8Rng::seed_from_u64(4)).unwrap().table;
    let r = pearson_corr(t.values("a").unwrap(), t.values("b").unwrap()).unwrap();
    assert!((r - 0.5).abs() < 0.03, "r {r}");

    let three = vec![single_variable("a", normal), single_variable("b", normal), single_variable("c", normal)];
    let scenario = CopulaScenario::new(10_000, three, vec![CorrelationMatrix::identity(3)]).unwrap();
    let t = simulate_copula_table(&scenario, &mut ChaCha8Rng::seed_from_u64(5)).unwrap().table;
    for (a, b) in [("a", "b"), ("a", "c"), ("b", "c")] {
        let r = pearson_corr(t.values(a).unwrap(), t.values(b).unwrap()).unwrap();
        assert!(r.abs() <= 0.02, "{a}{b}: {r}");
    }
}

#[test]
fn sign_grid_matches_eigenvalue_oracle() {
    let pairs = |a: &str, b: &str| PairValues {
        a: a.into(),
        b: b.into(),
        values: vec![-0.9, 0.9],
    };
    let grid = correlation_grid(&["x", "y", "z"], &[pairs("x", "y"), pairs("x", "z"), pairs("y", "z")]).unwrap();
    let mut expected = Vec::new();
    for &r01 in &[-0.9, 0.9] {
        for &r02 in &[-0.9, 0.9] {
            for &r12 in &[-0.9, 0.9] {
                let m = DMatrix::from_row_slice(3, 3, &[1.0, r01, r02, r01, 1.0, r12, r02, r12, 1.0]);
                let min_eig = SymmetricEigen::new(m.clone()).eigenvalues.min();
                // Sylvester: all leading minors positive
                let sylvester = 1.0 - r01 * r01 > 0.0 && m.determinant() > 0.0;
                assert_eq!(min_eig > 0.0, sylvester);
                if min_eig > 0.0 {
                    expected.push(m);
                }
            }
        }
    }
    assert_eq!(expected.len(), 4);
    assert_eq!(grid.rejected, 4);
    assert_eq!(grid.matrices.len(), expected.len());
    for (got, want) in grid.matrices.iter().zip(&expected) {
        assert!((got.matrix() - want).abs().max() < 1e-15);
    }
}

#[test]
fn small_grid_is_all_positive_definite() {
    let grid = correlation_grid(
        &["m", "p", "t"],
        &[
            PairValues { a: "m".into(), b: "p".into(), values: vec![-0.05, 0.0, 0.05] },
            PairValues { a: "m".into(), b: "t".into(), values: vec![-0.45, -0.3] },
            PairValues { a: "p".into(), b: "t".into(), values: vec![0.0] },
        ],
    )
    .unwrap();
    assert_eq!(grid.matrices.len(), 6);
    assert_eq!(grid.rejected, 0);
    for m in &grid.matrices {
        assert!(m.matrix().clone().cholesky().is_some());
    }
}

#[test]
fn injected_index_is_uniform() {
    let n = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let base: Vec<f64> = {
        let d = Normal::new(50.0, 5.0).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    };
    let draws = 10_000;
    let mut counts = vec![0usize; n];
    for _ in 0..draws {
        let mut v = base.clone();
        let at = inject_outlier(&mut v, &OutlierRule::default(), &mut rng).unwrap();
        assert!(tukey_outliers(&v, 1.5).unwrap().contains(&at));
        counts[at] += 1;
    }
    let e = draws as f64 / n as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let p = 1.0 - ChiSquared::new((n - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 {chi2}, p {p}");
}

#[test]
fn generators_are_seed_deterministic() {
    let s = StepScenario::default();
    let a = simulate_step_table(&s, &mut replicate_rng(1, 7)).unwrap();
    let b = simulate_step_table(&s, &mut replicate_rng(1, 7)).unwrap();
    assert_eq!(a.table, b.table);
    let c = simulate_step_table(&s, &mut replicate_rng(1, 8)).unwrap();
    assert_ne!(a.table, c.table);

    let scenario = avcheck::simgen::pm10_scenario().unwrap();
    let x = simulate_copula_table(&scenario, &mut replicate_rng(3, 0)).unwrap();
    let y = simulate_copula_table(&scenario, &mut replicate_rng(3, 0)).unwrap();
    assert_eq!(x.table, y.table);
    assert_eq!(x.grid_index, y.grid_index);
}

#[test]
fn step_composition_matches_counts() {
    let s = StepScenario::default();
    for i in 0..200 {
        let d = simulate_step_table(&s, &mut replicate_rng(2, i)).unwrap();
        let low = d.kinds.iter().filter(|k| **k == DayKind::Low).count();
        let high = d.kinds.iter().filter(|k| **k == DayKind::High).count();
        assert_eq!((low, high), (d.n_low, d.n_high));
        assert_eq!(d.kinds.len(), 30);
        assert!(d.table.values("step").unwrap().iter().all(|&v| v >= 0.0));
    }
}

use avcheck::checks::{evaluate_expectation, Comparator};
use avcheck::simgen::{replicate_rng, simulate_step_table, StepScenario};
use avcheck::stats::mean;
use avcheck::{CheckDef, CheckMatrix, DataTable, ExpectationDef, NumericColumn, Replicate};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

fn toy_bank() -> Vec<CheckDef> {
    vec![
        CheckDef::quantile("check1", "step", 0.6, Comparator::Gt, 10000.0),
        CheckDef::quantile("check2", "step", 0.4, Comparator::Lt, 8000.0),
        CheckDef::sd("check3", "step", Comparator::Gt, 2500.0),
    ]
}

#[test]
fn expectation_interval_is_closed() {
    let e = ExpectationDef::new("mean_step", 8500.0, 9500.0).unwrap();
    assert!(!evaluate_expectation(&e, 9000.0));
    assert!(!evaluate_expectation(&e, 8500.0));
    assert!(!evaluate_expectation(&e, 9500.0));
    assert!(evaluate_expectation(&e, 9500.0001));
    let glm = ExpectationDef::new("pm10_coefficient", 0.0, 0.005).unwrap();
    assert!(evaluate_expectation(&glm, -0.0008));
}

#[test]
fn one_replicate_always_pass() {
    let table = DataTable::single("step", vec![9000.0; 30]).unwrap();
    let bank = vec![CheckDef::mean("never", "step", Comparator::Gt, 1e9)];
    let exp = ExpectationDef::new("mean_step", 8500.0, 9500.0).unwrap();
    let m = avcheck::checks::build_check_matrix(&bank, &exp, &[Replicate { table, outcome: 9000.0 }]).unwrap();
    assert_eq!(m.rows(), &[vec![false]]);
    assert_eq!(m.unexpected(), &[false]);
}

#[test]
fn matrix_rows_match_individual_evaluation() {
    let mut low = vec![6000.0; 20];
    low.extend([9000.0; 10]);
    let mut wide = vec![3000.0; 15];
    wide.extend([15000.0; 15]);
    let reps: Vec<Replicate> = [low, wide]
        .into_iter()
        .map(|v| {
            let outcome = mean(&v).unwrap();
            Replicate { table: DataTable::single("step", v).unwrap(), outcome }
        })
        .collect();
    let bank = toy_bank();
    let exp = ExpectationDef::new("mean_step", 8500.0, 9500.0).unwrap();
    let m = avcheck::checks::build_check_matrix(&bank, &exp, &reps).unwrap();
    for (i, rep) in reps.iter().enumerate() {
        for (k, c) in bank.iter().enumerate() {
            assert_eq!(m.rows()[i][k], c.evaluate(&rep.table).unwrap());
        }
    }
    // q40 of the second table is 3000 (<8000), q60 is 15000, sd is about 6100
    assert_eq!(m.rows()[1], vec![true, true, true]);
    assert_eq!(m.rows()[0], vec![false, true, false]);
    assert_eq!(m.unexpected(), &[true, false]);
}

// Independent generator for the step mixture, sharing nothing with the
// library beyond the distribution parameters.
fn oracle_unexpected_rate(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pois = Poisson::new(8.0).unwrap();
    let (typ, lo, hi) = (
        Normal::new(9000.0, 300.0).unwrap(),
        Normal::new(6000.0, 200.0).unwrap(),
        Normal::new(12000.0, 200.0).unwrap(),
    );
    let mut bad = 0;
    for _ in 0..n {
        let (l, h) = loop {
            let l = pois.sample(&mut rng) as usize;
            let h = pois.sample(&mut rng) as usize;
            if l + h <= 30 {
                break (l, h);
            }
        };
        let sum: f64 = (0..30)
            .map(|d| {
                let v: f64 = if d < l {
                    lo.sample(&mut rng)
                } else if d < l + h {
                    hi.sample(&mut rng)
                } else {
                    typ.sample(&mut rng)
                };
                v.max(0.0)
            })
            .sum();
        let m = sum / 30.0;
        if !(8500.0..=9500.0).contains(&m) {
            bad += 1;
        }
    }
    bad as f64 / n as f64
}

#[test]
fn unexpected_rate_matches_monte_carlo() {
    let oracle = oracle_unexpected_rate(100_000, 1);
    let scenario = StepScenario::default();
    let exp = ExpectationDef::new("mean_step", 8500.0, 9500.0).unwrap();
    let n = 20_000;
    let (m, _) = avcheck::checks::simulate_check_matrix(&toy_bank(), &exp, n, |i| {
        let draw = simulate_step_table(&scenario, &mut replicate_rng(42, i as u64))?;
        let outcome = mean(draw.table.values("step")?)?;
        Ok(Replicate { table: draw.table, outcome })
    })
    .unwrap();
    let rate = m.unexpected().iter().filter(|&&u| u).count() as f64 / n as f64;
    // oracle sd ~0.0014, library sd ~0.003
    assert!((rate - oracle).abs() < 0.012, "library {rate}, oracle {oracle}");

    // 300 replicates: within four binomial standard errors
    let small = &m.unexpected()[..300];
    let r300 = small.iter().filter(|&&u| u).count() as f64 / 300.0;
    let se = (oracle * (1.0 - oracle) / 300.0).sqrt();
    assert!((r300 - oracle).abs() < 4.0 * se, "{r300} vs {oracle}");
}

#[test]
fn matrix_csv_round_trip() {
    let m = CheckMatrix::new(
        vec!["a".into(), "b".into()],
        vec![vec![true, false], vec![false, false], vec![true, true]],
        vec![false, true, true],
    )
    .unwrap();
    let mut buf = Vec::new();
    m.to_csv(&mut buf).unwrap();
    assert_eq!(CheckMatrix::from_csv(buf.as_slice()).unwrap(), m);
}

#[test]
fn check_json_round_trip() {
    for c in toy_bank().into_iter().chain([
        CheckDef::correlation("r", "x", "y", Comparator::Lt, -0.05),
        CheckDef::has_outlier("o", "x", 3.0),
    ]) {
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<CheckDef>(&s).unwrap(), c);
    }
}

fn table_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (5usize..40).prop_flat_map(|n| (prop::collection::vec(0.0f64..2e4, n), prop::collection::vec(-50.0f64..50.0, n)))
}

proptest! {
    #[test]
    fn column_order_irrelevant((step, temp) in table_strategy()) {
        let a = DataTable::new(vec![
            NumericColumn::new("step", step.clone()).unwrap(),
            NumericColumn::new("temp", temp.clone()).unwrap(),
        ]).unwrap();
        let b = DataTable::new(vec![
            NumericColumn::new("temp", temp).unwrap(),
            NumericColumn::new("step", step).unwrap(),
        ]).unwrap();
        let mut bank = toy_bank();
        bank.push(CheckDef::correlation("r", "step", "temp", Comparator::Gt, 0.0));
        bank.push(CheckDef::has_outlier("o", "temp", 1.5));
        for c in &bank {
            prop_assert_eq!(c.evaluate(&a).unwrap(), c.evaluate(&b).unwrap());
        }
    }

    #[test]
    fn raising_threshold_only_clears((step, _) in table_strategy(), t in 0.0f64..2e4, dt in 0.0f64..5e3) {
        let table = DataTable::single("step", step).unwrap();
        let low = CheckDef::quantile("q", "step", 0.6, Comparator::Gt, t).evaluate(&table).unwrap();
        let high = CheckDef::quantile("q", "step", 0.6, Comparator::Gt, t + dt).evaluate(&table).unwrap();
        prop_assert!(!(high && !low));
    }

    #[test]
    fn evaluation_deterministic((step, _) in table_strategy()) {
        let table = DataTable::single("step", step).unwrap();
        let exp = ExpectationDef::new("mean_step", 8500.0, 9500.0).unwrap();
        let reps = vec![Replicate { table, outcome: 9000.0 }];
        let a = avcheck::checks::build_check_matrix(&toy_bank(), &exp, &reps).unwrap();
        let b = avcheck::checks::build_check_matrix(&toy_bank(), &exp, &reps).unwrap();
        prop_assert_eq!(a, b);
    }
}

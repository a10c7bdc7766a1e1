mod common;

use std::collections::BTreeSet;

use common::{mean, random_signs, rng, variance};
use forrelation::blockpoly::{
    balance, random_bounded, random_orthogonal, Balanced, BlockMultilinearPoly, QueryAlgorithm,
};
use forrelation::estimators::{
    estimate_blockpoly, estimate_quadratic, fourier_stats, main_single_sample, random_bounded_quadratic,
    simulate_quantum_classically, warmup_single_sample, BlockInput, EstimatorConfig, Mode, MultilinearPoly,
    QuadraticConfig, QuadraticSplit, SplitPhase,
};
use forrelation::Error;
use proptest::prelude::*;

fn signs(len: usize, seed: u64) -> Vec<f64> {
    random_signs(len, &mut rng(seed)).into_iter().map(f64::from).collect()
}

fn bits(code: usize, len: usize) -> Vec<bool> {
    (0..len).map(|i| code >> i & 1 == 1).collect()
}

#[test]
fn full_marking_is_exact() {
    let p = random_bounded(3, 5, 4, &mut rng(1));
    let x: Vec<Vec<f64>> = (0..3).map(|j| signs(5, j)).collect();
    let truth = p.evaluate(&x).unwrap();
    let b = Balanced::unsplit(p, 1.0);
    for mode in [Mode::Main, Mode::Warmup] {
        let cfg = EstimatorConfig { mode, repetitions: 3, mark_probability: Some(1.0) };
        let r = estimate_blockpoly(&b, &BlockInput::per_block(x.clone()), &mut rng(2), &cfg).unwrap();
        assert!((r.estimate - truth).abs() < 1e-12, "{mode}");
    }
}

#[test]
fn zero_polynomial_estimates_zero() {
    let b = balance(&BlockMultilinearPoly::zero(vec![4, 4]).unwrap(), 0.01).unwrap();
    let x = vec![signs(4, 0), signs(4, 1)];
    let cfg = EstimatorConfig { repetitions: 50, ..Default::default() };
    let r = estimate_blockpoly(&b, &BlockInput::per_block(x), &mut rng(0), &cfg).unwrap();
    assert_eq!(r.estimate, 0.0);
    assert!(r.per_repetition_values.iter().all(|&v| v == 0.0));
    assert_eq!(r.queries_used, 0);
}

#[test]
fn main_sample_is_unbiased_by_enumeration() {
    // k = 2, n = 4: every one of the 2^8 mark patterns, weighted by its probability
    let n = 4;
    let q = 1.0 / (n as f64).sqrt();
    for seed in 0..5 {
        let p = random_bounded(2, n, 4, &mut rng(seed));
        let x = vec![signs(n, 10 + seed), signs(n, 20 + seed)];
        let mut expectation = 0.0;
        for code in 0..1usize << (2 * n) {
            let marks = vec![bits(code, n), bits(code >> n, n)];
            let on = code.count_ones() as i32;
            let weight = q.powi(on) * (1.0 - q).powi(2 * n as i32 - on);
            expectation += weight * main_single_sample(&p, &x, &marks).unwrap();
        }
        assert!((expectation - p.evaluate(&x).unwrap() / n as f64).abs() < 1e-12);
    }
}

#[test]
fn warmup_sample_is_unbiased_by_enumeration() {
    let n = 4;
    let q = 1.0 / n as f64;
    for seed in 0..3 {
        let p = random_bounded(2, n, 3, &mut rng(seed));
        let x = vec![signs(n, 30 + seed), signs(n, 40 + seed)];
        let support: Vec<Vec<usize>> = p.terms().map(|(idx, _)| idx.to_vec()).collect();
        let mut expectation = 0.0;
        for code in 0..1usize << support.len() {
            let marked: BTreeSet<Vec<usize>> =
                support.iter().enumerate().filter(|(i, _)| code >> i & 1 == 1).map(|(_, m)| m.clone()).collect();
            let on = marked.len() as i32;
            let weight = q.powi(on) * (1.0 - q).powi(support.len() as i32 - on);
            expectation += weight * warmup_single_sample(&p, &x, &marked).unwrap();
        }
        assert!((expectation - p.evaluate(&x).unwrap() / n as f64).abs() < 1e-12);
    }
}

#[test]
fn unbalanced_input_is_refused() {
    let p = BlockMultilinearPoly::from_terms(vec![1, 1], vec![(vec![0, 0], 1.0)]).unwrap();
    let b = Balanced::unsplit(p, 0.01);
    let input = BlockInput::per_block(vec![vec![1.0], vec![1.0]]);
    let r = estimate_blockpoly(&b, &input, &mut rng(0), &EstimatorConfig::default());
    assert!(matches!(r, Err(Error::Precondition(_))));
}

#[test]
fn input_shape_is_checked() {
    let b = balance(&random_bounded(2, 3, 2, &mut rng(0)), 0.5).unwrap();
    let short = BlockInput::per_block(vec![vec![1.0; 3]]);
    assert!(estimate_blockpoly(&b, &short, &mut rng(0), &EstimatorConfig::default()).is_err());
    assert!(BlockInput::new(vec![vec![1.0]], vec![vec![]]).is_err());
}

#[test]
fn constant_algorithm_costs_nothing() {
    let mut r = rng(4);
    let u = random_orthogonal(4, &mut r);
    let a = QueryAlgorithm::new(2, 8, vec![u.clone(), u], vec![0, 1], vec![0; 4]).unwrap();
    let x = random_signs(8, &mut r);
    let rep = simulate_quantum_classically(&a, &x, 0.2, &mut r, &EstimatorConfig::default()).unwrap();
    assert_eq!(rep.queries_used, 0);
    assert!((rep.estimate - a.accept_probability(&x).unwrap()).abs() < 1e-12);
}

#[test]
fn small_simulation_is_accurate() {
    let (n_qubits, len) = (3, 7);
    let mut hits = 0;
    let mut queries = Vec::new();
    for seed in 0..200 {
        let mut r = rng(seed);
        let a = QueryAlgorithm::random(n_qubits, len, 1, &mut r);
        let x = random_signs(len, &mut r);
        let rep = simulate_quantum_classically(&a, &x, 0.2, &mut r, &EstimatorConfig::default()).unwrap();
        hits += usize::from((rep.estimate - a.accept_probability(&x).unwrap()).abs() <= 0.2);
        assert!(rep.queries_used <= len);
        queries.push(rep.queries_used as f64);
    }
    assert!(hits >= 134, "{hits}/200");
    // at this size the estimator reads nearly everything
    assert!(mean(&queries) > 0.5 * len as f64);
}

#[test]
fn more_queries_need_more_reads() {
    // one repetition, so the count reflects the marking rate rather than saturating at N
    let len = 8;
    let cfg = EstimatorConfig { repetitions: 1, ..Default::default() };
    let median = |t: usize| {
        let mut qs: Vec<usize> = (0..15)
            .map(|seed| {
                let mut r = rng(100 + seed);
                let a = QueryAlgorithm::random(3, len, t, &mut r);
                let x = random_signs(len, &mut r);
                simulate_quantum_classically(&a, &x, 0.25, &mut r, &cfg).unwrap().queries_used
            })
            .collect();
        qs.sort_unstable();
        qs[qs.len() / 2]
    };
    let (one, two) = (median(1), median(2));
    assert!(one < two, "t=1 median {one}, t=2 median {two}");
}

#[test]
fn fourier_stat_examples() {
    let p = MultilinearPoly::from_terms(3, [(vec![0], 1.0)]).unwrap();
    let s = fourier_stats(&p);
    assert_eq!(s.variance, 1.0);
    assert_eq!(s.influences, vec![1.0, 0.0, 0.0]);

    let p = MultilinearPoly::from_terms(2, [(vec![0, 1], 1.0)]).unwrap();
    let s = fourier_stats(&p);
    assert_eq!(s.influences, vec![1.0, 1.0]);
    assert_eq!(s.influences.iter().sum::<f64>(), 2.0 * s.variance);

    let p = MultilinearPoly::from_terms(2, [(vec![1, 1], 0.5), (vec![], 0.25)]).unwrap();
    assert_eq!(p.coefficient(&[]), 0.75);
    assert_eq!(p.degree(), 0);
}

#[test]
fn influence_sum_is_at_most_degree_times_variance() {
    let mut r = rng(8);
    for _ in 0..50 {
        let p = random_bounded_quadratic(10, &mut r);
        let s = fourier_stats(&p);
        assert!(s.influences.iter().sum::<f64>() <= 2.0 * s.variance + 1e-12);
    }
}

#[test]
fn pair_estimator_with_full_marking_is_exact() {
    let p = MultilinearPoly::from_terms(2, [(vec![0, 1], 1.0)]).unwrap();
    let cfg = QuadraticConfig { mark_probability: Some(1.0), ..Default::default() };
    for x in [[1i8, 1], [1, -1], [-1, -1]] {
        let r = estimate_quadratic(&p, &x, 0.1, &mut rng(0), &cfg).unwrap();
        assert!((r.report.estimate - f64::from(x[0] * x[1])).abs() < 1e-12);
    }
}

#[test]
fn dominant_row_is_split_down() {
    let n = 64;
    let terms = (1..n).map(|j| (vec![0, j], 1.0 / n as f64));
    let p = MultilinearPoly::from_terms(n, terms).unwrap();
    let cfg = QuadraticConfig { c: 1.0, ..Default::default() };
    let mut split = QuadraticSplit::new(&p);
    split.run(n, &cfg).unwrap();
    let rows: Vec<_> = split.history.iter().filter(|s| s.phase == SplitPhase::RowSum).collect();
    assert!(!rows.is_empty());
    assert!(rows.windows(2).all(|w| w[1].row_mass < w[0].row_mass));
    assert!(split.row_mass() <= cfg.c * (n as f64).ln() / n as f64);
    assert!(split.variance() <= cfg.c / n as f64);
    // the split polynomial is the same function of the original input
    let x = signs(n, 3);
    assert!((split.evaluate(&x) - p.evaluate(&x).unwrap()).abs() < 1e-12);
}

#[test]
fn quadratic_estimator_accuracy() {
    let n = 128;
    let mut hits = 0;
    for seed in 0..20 {
        let mut r = rng(500 + seed);
        let p = random_bounded_quadratic(n, &mut r);
        let x = random_signs(n, &mut r);
        let rep = estimate_quadratic(&p, &x, 0.15, &mut r, &QuadraticConfig::default()).unwrap();
        hits += usize::from((rep.report.estimate - p.evaluate_signs(&x).unwrap()).abs() <= 0.15);
        assert!(rep.report.queries_used <= n);
    }
    assert!(hits >= 14, "{hits}/20");
}

#[test]
fn quadratic_rejects_bad_input() {
    let p = MultilinearPoly::from_terms(3, [(vec![0, 1, 2], 1.0)]).unwrap();
    assert!(estimate_quadratic(&p, &[1, 1, 1], 0.1, &mut rng(0), &QuadraticConfig::default()).is_err());
    let q = MultilinearPoly::from_terms(3, [(vec![0, 1], 1.0)]).unwrap();
    assert!(estimate_quadratic(&q, &[1, 1], 0.1, &mut rng(0), &QuadraticConfig::default()).is_err());
    assert!(estimate_quadratic(&q, &[1, 1, 1], 0.0, &mut rng(0), &QuadraticConfig::default()).is_err());
}

#[test]
fn tight_iteration_cap_is_reported() {
    let n = 64;
    let p = MultilinearPoly::from_terms(n, (1..n).map(|j| (vec![0, j], 1.0 / n as f64))).unwrap();
    let cfg = QuadraticConfig { c: 1.0, iteration_factor: 0, ..Default::default() };
    let err = estimate_quadratic(&p, &vec![1; n], 0.1, &mut rng(0), &cfg).unwrap_err();
    assert!(matches!(err, Error::ResourceGuard(_)));
}

#[test]
fn mode_names() {
    assert_eq!("warmup".parse::<Mode>().unwrap(), Mode::Warmup);
    assert_eq!(Mode::Main.to_string(), "main");
    assert!("fast".parse::<Mode>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn influence_splits_lower_variance(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_bounded_quadratic(24, &mut r);
        let mut split = QuadraticSplit::new(&p);
        split.run(24, &QuadraticConfig::default()).unwrap();
        let mut previous = QuadraticSplit::new(&p).variance();
        for step in split.history.iter().filter(|s| s.phase == SplitPhase::Influence) {
            prop_assert!(step.variance < previous);
            previous = step.variance;
        }
        prop_assert!(split.history.len() <= 50 * 24);
        let x = signs(24, seed);
        let quadratic: f64 = p.terms().filter(|(s, _)| s.len() == 2).map(|(s, c)| c * x[s[0]] * x[s[1]]).sum();
        prop_assert!((split.evaluate(&x) - quadratic).abs() < 1e-12);
    }

    #[test]
    fn queries_never_exceed_positions(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_bounded(2, 8, 4, &mut r);
        let b = balance(&p, 0.05).unwrap();
        let x = vec![signs(8, seed), signs(8, seed ^ 1)];
        let rep = estimate_blockpoly(&b, &BlockInput::per_block(x), &mut r, &EstimatorConfig::default()).unwrap();
        prop_assert!(rep.queries_used <= 16);
        prop_assert_eq!(rep.per_repetition_values.len(), 16);
        prop_assert!((rep.estimate - mean(&rep.per_repetition_values)).abs() < 1e-12);
    }

    #[test]
    fn multilinear_json_round_trip(seed in any::<u64>()) {
        let p = random_bounded_quadratic(6, &mut rng(seed));
        let back: MultilinearPoly = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        let x = signs(6, seed);
        prop_assert!((back.evaluate(&x).unwrap() - p.evaluate(&x).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn main_estimator_variance_is_small() {
    let mut r = rng(77);
    let n = 64;
    let delta = 0.25 / n as f64;
    let p = random_bounded(2, n, 8, &mut r);
    let b = balance(&p, delta).unwrap();
    let size = b.block_size() as f64;
    let x = vec![signs(n, 1), signs(n, 2)];
    let cfg = EstimatorConfig { repetitions: 1000, ..Default::default() };
    let rep = estimate_blockpoly(&b, &BlockInput::per_block(x), &mut r, &cfg).unwrap();
    let samples: Vec<f64> = rep.per_repetition_values.iter().map(|v| v / size).collect();
    assert!(variance(&samples) <= 10.0 * delta / size);
}

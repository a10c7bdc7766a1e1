mod common;

use common::{hadamard_matrix, mat_vec, rng};
use forrelation::fourier::{
    exact_distribution, quantum_sample, relation_solve, relation_success_exact, tv_distance, unitary_transform,
    Distribution, RelationStrategy,
};
use forrelation::instances::TruthTable;
use proptest::prelude::*;

#[test]
fn character_concentrates_on_its_index() {
    let f = TruthTable::character(4, 0b1011);
    let d = exact_distribution(&f);
    for (y, p) in d.probabilities().iter().enumerate() {
        assert_eq!(*p, f64::from(u8::from(y == 0b1011)));
    }
    let mut r = rng(1);
    for _ in 0..20 {
        assert_eq!(quantum_sample(&f, &mut r).y, 0b1011);
    }
}

#[test]
fn unitary_transform_matches_dense_matrix() {
    let mut r = rng(2);
    for n in 1..=6 {
        let f = TruthTable::random(n, &mut r);
        let dense = mat_vec(&hadamard_matrix(n), &f.to_f64());
        for (a, b) in unitary_transform(&f).iter().zip(&dense) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn empirical_distribution_converges() {
    let mut r = rng(3);
    let f = TruthTable::random(6, &mut r);
    let exact = exact_distribution(&f);
    let tv_at = |draws: usize, r: &mut _| {
        let ys: Vec<usize> = (0..draws).map(|_| quantum_sample(&f, r).y).collect();
        tv_distance(&Distribution::empirical(6, &ys).unwrap(), &exact).unwrap()
    };
    let coarse = tv_at(500, &mut r);
    let fine = tv_at(50_000, &mut r);
    assert!(fine < 0.03, "{fine}");
    assert!(fine < coarse);
}

#[test]
fn relation_rates_agree_with_the_exact_value() {
    let mut r = rng(4);
    let f = TruthTable::random(8, &mut r);
    let c = 0.5;
    let exact = relation_success_exact(&f, c).unwrap();
    let trials = 20_000;
    let mut hits = 0;
    for _ in 0..trials {
        let out = relation_solve(&f, c, RelationStrategy::Quantum, &mut r).unwrap();
        assert_eq!(out.queries, 1);
        hits += usize::from(out.success);
    }
    let rate = hits as f64 / trials as f64;
    let se = (exact * (1.0 - exact) / trials as f64).sqrt();
    assert!((rate - exact).abs() <= 4.0 * se + 1e-12, "{rate} vs {exact}");
}

#[test]
fn zero_query_strategy_reads_nothing() {
    let mut r = rng(5);
    let bent = TruthTable::from_fn(2, |x| x == 3);
    let out = relation_solve(&bent, 0.5, RelationStrategy::ZeroQuery, &mut r).unwrap();
    assert_eq!((out.y, out.queries, out.success), (0, 0, true));
    let chi = TruthTable::character(3, 5);
    let out = relation_solve(&chi, 0.5, RelationStrategy::ZeroQuery, &mut r).unwrap();
    assert!(!out.success);
    assert!((relation_success_exact(&chi, 0.5).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(Distribution::new(vec![0.5, 0.4]).is_err());
    assert!(Distribution::new(vec![0.5, 0.25, 0.25]).is_err());
    assert!(Distribution::new(vec![1.5, -0.5]).is_err());
    assert!(Distribution::empirical(2, &[]).is_err());
    assert!(Distribution::empirical(2, &[4]).is_err());
    let f = TruthTable::constant(2, 1);
    assert!(relation_solve(&f, 0.0, RelationStrategy::Quantum, &mut rng(0)).is_err());
    assert!(tv_distance(&exact_distribution(&f), &exact_distribution(&TruthTable::constant(3, 1))).is_err());
    assert_eq!("zero-query".parse::<RelationStrategy>().unwrap(), RelationStrategy::ZeroQuery);
    assert!("classical".parse::<RelationStrategy>().is_err());
}

proptest! {
    #[test]
    fn exact_distribution_is_normalized(n in 1u32..10, seed in any::<u64>()) {
        let f = TruthTable::random(n, &mut rng(seed));
        let d = exact_distribution(&f);
        let total: f64 = d.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(d.probabilities().iter().all(|p| *p >= 0.0));
        prop_assert!(Distribution::new(d.probabilities().to_vec()).is_ok());
    }

    #[test]
    fn tv_is_a_metric_on_samples(n in 1u32..6, a in any::<u64>(), b in any::<u64>()) {
        let p = exact_distribution(&TruthTable::random(n, &mut rng(a)));
        let q = exact_distribution(&TruthTable::random(n, &mut rng(b)));
        let pq = tv_distance(&p, &q).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&pq));
        prop_assert!((pq - tv_distance(&q, &p).unwrap()).abs() < 1e-15);
        prop_assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
    }
}

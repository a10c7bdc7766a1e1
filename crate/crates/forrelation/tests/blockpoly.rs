mod common;

use common::{random_signs, rng};
use forrelation::blockpoly::{
    balance, from_query_algorithm, nonempty_subsets, random_bounded, random_orthogonal, BlockMultilinearPoly,
    QueryAlgorithm,
};
use forrelation::Error;
use proptest::prelude::*;
use rand::Rng;

fn monomial(k: usize) -> BlockMultilinearPoly {
    BlockMultilinearPoly::from_terms(vec![1; k], vec![(vec![0; k], 1.0)]).unwrap()
}

fn signs_of<R: Rng>(sizes: &[usize], r: &mut R) -> Vec<Vec<f64>> {
    sizes.iter().map(|&n| random_signs(n, r).into_iter().map(f64::from).collect()).collect()
}

/// `Lambda_S` straight from the definition, summing over every index tuple.
fn lambda_by_definition(p: &BlockMultilinearPoly, subset: &[usize]) -> f64 {
    let sizes: Vec<usize> = subset.iter().map(|&j| p.block_sizes()[j]).collect();
    let total: usize = sizes.iter().product();
    (0..total)
        .map(|mut code| {
            let key: Vec<usize> = sizes
                .iter()
                .map(|&s| {
                    let i = code % s;
                    code /= s;
                    i
                })
                .collect();
            let a: f64 = p
                .terms()
                .filter(|(idx, _)| subset.iter().zip(&key).all(|(&j, &i)| idx[j] == i))
                .map(|(_, c)| c)
                .sum();
            a * a
        })
        .sum()
}

#[test]
fn evaluation_examples() {
    let p = BlockMultilinearPoly::from_terms(vec![1, 1], vec![(vec![0, 0], 1.0)]).unwrap();
    assert_eq!(p.evaluate(&[vec![1.0], vec![-1.0]]).unwrap(), -1.0);
    let zero = BlockMultilinearPoly::zero(vec![3, 2]).unwrap();
    assert_eq!(zero.evaluate(&[vec![1.0, -1.0, 1.0], vec![-1.0, -1.0]]).unwrap(), 0.0);
    assert!(p.evaluate(&[vec![1.0, 1.0], vec![1.0]]).is_err());
    assert!(p.evaluate(&[vec![1.0]]).is_err());
}

#[test]
fn lambda_of_a_monomial() {
    let p = monomial(3);
    for s in nonempty_subsets(3) {
        assert_eq!(p.lambda(&s).unwrap(), 1.0);
    }
    assert!(p.lambda(&[]).is_err());
    assert!(p.lambda(&[1, 0]).is_err());
}

#[test]
fn splitting_a_monomial() {
    let p = monomial(2);
    let (same, fresh) = p.split_variable(0, 0, 1).unwrap();
    assert_eq!(same, p);
    assert!(fresh.is_empty());

    let (split, fresh) = p.split_variable(1, 0, 4).unwrap();
    assert_eq!(fresh, vec![1, 2, 3]);
    assert_eq!(split.block_sizes(), &[1, 4]);
    assert_eq!(split.term_count(), 4);
    assert!(split.terms().all(|(_, c)| c == 0.25));
    assert!((split.lambda(&[0, 1]).unwrap() - 0.25).abs() < 1e-15);
    assert!(p.split_variable(0, 0, 0).is_err());
    assert!(p.split_variable(2, 0, 2).is_err());
}

#[test]
fn full_subset_lambda_is_coefficient_norm() {
    let p = random_bounded(3, 5, 3, &mut rng(0));
    let norm: f64 = p.terms().map(|(_, c)| c * c).sum();
    assert!((p.lambda(&[0, 1, 2]).unwrap() - norm).abs() < 1e-15);
}

#[test]
fn lambda_matches_definition() {
    let mut r = rng(14);
    for k in 2..=3 {
        let p = random_bounded(k, 4, 3, &mut r);
        for s in nonempty_subsets(k) {
            assert!((p.lambda(&s).unwrap() - lambda_by_definition(&p, &s)).abs() < 1e-12);
        }
    }
}

#[test]
fn balanced_input_is_untouched() {
    let p = BlockMultilinearPoly::from_terms(
        vec![4, 4],
        (0..4).map(|i| (vec![i, i], 0.25)).collect::<Vec<_>>(),
    )
    .unwrap();
    let b = balance(&p, 1.0).unwrap();
    assert_eq!(b.new_variables(), 0);
    assert_eq!(b.base(), &p);
}

#[test]
fn balancing_a_monomial() {
    let b = balance(&monomial(2), 0.1).unwrap();
    let (split, _) = b.materialize(1 << 20).unwrap();
    for s in nonempty_subsets(2) {
        assert!(split.lambda(&s).unwrap() <= 0.1 * (1.0 + 1e-9));
    }
    assert!(b.new_variables() <= 40, "{} new variables", b.new_variables());
}

#[test]
fn balance_rejects_unbounded_input() {
    let p = BlockMultilinearPoly::from_terms(vec![2, 2], vec![(vec![0, 0], 1.0), (vec![1, 1], 1.0)]).unwrap();
    assert!(matches!(balance(&p, 0.1), Err(Error::Precondition(_))));
    assert!(balance(&monomial(2), 0.0).is_err());
}

#[test]
fn balancing_extracted_polynomials() {
    let mut r = rng(30);
    let eps: f64 = 0.25;
    for _ in 0..3 {
        let a = QueryAlgorithm::random(2, 3, 1, &mut r);
        let p = from_query_algorithm(&a).unwrap();
        let delta = eps * eps / a.input_len() as f64;
        let b = balance(&p, delta).unwrap();
        let (split, trace) = b.materialize(1 << 22).unwrap();
        for s in nonempty_subsets(2) {
            assert!(split.lambda(&s).unwrap() <= delta * (1.0 + 1e-9));
        }
        // copies of one variable stay on the same original
        for (j, block) in trace.origin.iter().enumerate() {
            assert_eq!(block.iter().flatten().count(), b.split_block_sizes()[j]);
        }
    }
}

#[test]
fn hadamard_mean_extraction_by_hand() {
    let p = from_query_algorithm(&QueryAlgorithm::hadamard_mean(1)).unwrap();
    assert_eq!(p.block_sizes(), &[3, 3]);
    let mut expected = BlockMultilinearPoly::zero(vec![3, 3]).unwrap();
    for i in 1..=2 {
        for j in 1..=2 {
            expected.add_term(vec![i, j], 0.25).unwrap();
        }
    }
    assert_eq!(p.term_count(), 4);
    for (idx, c) in expected.terms() {
        assert!((p.coefficient(idx) - c).abs() < 1e-12);
    }
}

#[test]
fn extraction_matches_simulation_on_all_inputs() {
    let mut r = rng(31);
    for (n_qubits, input_len, t) in [(1, 1, 1), (2, 3, 1), (2, 3, 2), (3, 4, 1), (3, 2, 2)] {
        let a = QueryAlgorithm::random(n_qubits, input_len, t, &mut r);
        let p = from_query_algorithm(&a).unwrap();
        assert_eq!(p.k(), 2 * t);
        assert!(p.terms().all(|(idx, _)| idx.len() == 2 * t));
        for code in 0..1usize << input_len {
            let x: Vec<i8> = (0..input_len).map(|i| if code >> i & 1 == 1 { -1 } else { 1 }).collect();
            let row: Vec<f64> = std::iter::once(1.0).chain(x.iter().map(|&v| f64::from(v))).collect();
            let value = p.evaluate(&vec![row; 2 * t]).unwrap();
            assert!((value - a.accept_probability(&x).unwrap()).abs() < 1e-10);
        }
    }
}

#[test]
fn extraction_guard() {
    let a = QueryAlgorithm::random(3, 64, 2, &mut rng(0));
    assert!(matches!(from_query_algorithm(&a), Err(Error::ResourceGuard(_))));
}

#[test]
fn query_algorithm_validation() {
    let mut r = rng(2);
    let u = random_orthogonal(4, &mut r);
    assert!(QueryAlgorithm::new(2, 3, vec![u.clone(), u.clone()], vec![0], vec![0, 1, 2, 3]).is_ok());
    assert!(QueryAlgorithm::new(2, 2, vec![u.clone()], vec![0], vec![0, 1, 2, 3]).is_err());
    assert!(QueryAlgorithm::new(2, 3, vec![u.clone()], vec![4], vec![0, 1, 2, 3]).is_err());
    let mut bad = u.clone();
    bad[(0, 0)] += 0.1;
    assert!(QueryAlgorithm::new(2, 3, vec![bad], vec![0], vec![0, 1, 2, 3]).is_err());
    assert!(QueryAlgorithm::new(2, 3, vec![], vec![0], vec![0, 1, 2, 3]).is_err());
}

#[test]
fn json_format() {
    let json = r#"{"k":2,"block_sizes":[2,1],"terms":[{"idx":[1,0],"c":0.5}]}"#;
    let p: BlockMultilinearPoly = serde_json::from_str(json).unwrap();
    assert_eq!(p.coefficient(&[1, 0]), 0.5);
    assert!(serde_json::from_str::<BlockMultilinearPoly>(r#"{"k":3,"block_sizes":[2,1],"terms":[]}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_is_a_substitution(seed in any::<u64>(), k in 1usize..=3, m in 1usize..=5) {
        let mut r = rng(seed);
        let p = random_bounded(k, 4, 3, &mut r);
        let block = r.random_range(0..k);
        let index = r.random_range(0..4);
        let (split, fresh) = p.split_variable(block, index, m).unwrap();
        let x = signs_of(p.block_sizes(), &mut r);
        let mut y = x.clone();
        y[block].extend(fresh.iter().map(|_| x[block][index]));
        prop_assert!((split.evaluate(&y).unwrap() - p.evaluate(&x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn split_stays_bounded(seed in any::<u64>(), m in 2usize..=6) {
        let mut r = rng(seed);
        let p = random_bounded(2, 4, 4, &mut r);
        let (split, _) = p.split_variable(0, 1, m).unwrap();
        for _ in 0..100 {
            let y = signs_of(split.block_sizes(), &mut r);
            prop_assert!(split.evaluate(&y).unwrap().abs() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn split_lambda_monotone(seed in any::<u64>(), m in 2usize..=6) {
        let mut r = rng(seed);
        let k = 3;
        let p = random_bounded(k, 4, 4, &mut r);
        let block = r.random_range(0..k);
        let (split, _) = p.split_variable(block, r.random_range(0..4), m).unwrap();
        for s in nonempty_subsets(k) {
            let (before, after) = (p.lambda(&s).unwrap(), split.lambda(&s).unwrap());
            if s.contains(&block) {
                prop_assert!(after <= before + 1e-12);
            } else {
                prop_assert!((after - before).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn balance_meets_every_target(seed in any::<u64>(), k in 2usize..=3, eps in 0.2f64..0.6) {
        let mut r = rng(seed);
        let p = random_bounded(k, 6, 3, &mut r);
        let delta = eps * eps / 6.0;
        let b = balance(&p, delta).unwrap();
        prop_assert!(b.new_variables() as f64 <= f64::from(1u32 << k) / delta);
        for (s, lambda) in b.lambdas() {
            prop_assert!(lambda <= delta * (1.0 + 1e-9));
            prop_assert!(lambda <= p.lambda(&s).unwrap() + 1e-12);
        }
    }

    #[test]
    fn random_bounded_is_bounded(seed in any::<u64>(), k in 1usize..=4) {
        let mut r = rng(seed);
        let p = random_bounded(k, 8, 4, &mut r);
        for _ in 0..50 {
            prop_assert!(p.evaluate(&signs_of(p.block_sizes(), &mut r)).unwrap().abs() <= 1.0 + 1e-9);
        }
    }
}

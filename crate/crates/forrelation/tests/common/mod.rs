//! Reference implementations shared by the integration tests. Everything here
//! is deliberately slow and written without the library's kernels.

#![allow(dead_code)]

use forrelation::instances::{Function, InstanceTuple, TruthTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn parity(x: usize, y: usize) -> f64 {
    if (x & y).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Unitary Hadamard matrix as rows.
pub fn hadamard_matrix(n: u32) -> Vec<Vec<f64>> {
    let len = 1usize << n;
    let s = 1.0 / (len as f64).sqrt();
    (0..len).map(|x| (0..len).map(|y| parity(x, y) * s).collect()).collect()
}

pub fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// `<0| H D_k H ... D_1 H |0>` by dense products.
pub fn phi_dense(t: &InstanceTuple) -> f64 {
    let n = t.n();
    let h = hadamard_matrix(n);
    let mut state = vec![0.0; 1 << n];
    state[0] = 1.0;
    state = mat_vec(&h, &state);
    for f in t.functions() {
        for (x, a) in state.iter_mut().enumerate() {
            *a *= f.value(x);
        }
        state = mat_vec(&h, &state);
    }
    state[0]
}

pub fn random_signs<R: Rng>(len: usize, rng: &mut R) -> Vec<i8> {
    (0..len).map(|_| if rng.random() { 1 } else { -1 }).collect()
}

pub fn random_tuple<R: Rng>(n: u32, k: usize, rng: &mut R) -> InstanceTuple {
    let tables = (0..k).map(|_| TruthTable::new(n, random_signs(1 << n, rng)).unwrap()).collect();
    InstanceTuple::boolean(tables).unwrap()
}

pub fn twisted(t: &InstanceTuple, z: usize) -> InstanceTuple {
    let mut functions: Vec<Function> = t.functions().to_vec();
    let last = functions.pop().unwrap();
    let n = last.n();
    let values = (0..1usize << n).map(|x| last.value(x) * parity(x, z)).collect::<Vec<f64>>();
    let f = match last {
        Function::Boolean(_) => {
            Function::Boolean(TruthTable::new(n, values.iter().map(|&v| v as i8).collect()).unwrap())
        }
        Function::Real(_) => Function::Real(forrelation::instances::RealFunction::new(n, values).unwrap()),
    };
    functions.push(f);
    InstanceTuple::new(functions, None).unwrap()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

//! The k-fold forrelation `Phi`, evaluated as the `|0>` amplitude of
//! `H U_k H ... U_1 H |0>`, plus a literal nested-sum oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hadamard::{character, fwht_in_place, RealVector};
use crate::instances::{Function, InstanceTuple};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiResult {
    pub phi: f64,
    pub n: u32,
    pub k: usize,
    /// Entry `z` is `Phi` with `f_k` twisted by `(-1)^(x.z)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<f64>>,
}

fn uniform_state(len: usize) -> Vec<f64> {
    vec![1.0 / (len as f64).sqrt(); len]
}

/// Final state of the circuit over `functions`.
pub(crate) fn run_circuit(functions: &[Function]) -> Vec<f64> {
    let len = functions[0].len();
    let mut state = uniform_state(len);
    for f in functions {
        f.multiply_into(&mut state);
        fwht_in_place(&mut state);
    }
    state
}

pub(crate) fn final_state(t: &InstanceTuple) -> Vec<f64> {
    run_circuit(t.functions())
}

/// The states after each of the `k` query-plus-Hadamard rounds.
pub(crate) fn prefix_states(t: &InstanceTuple) -> Vec<Vec<f64>> {
    let mut state = uniform_state(1 << t.n());
    let mut out = Vec::with_capacity(t.k());
    for f in t.functions() {
        f.multiply_into(&mut state);
        fwht_in_place(&mut state);
        out.push(state.clone());
    }
    out
}

/// `Phi` in `O(k N log N)`.
pub fn phi(t: &InstanceTuple) -> PhiResult {
    let state = final_state(t);
    PhiResult { phi: state[0], n: t.n(), k: t.k(), amplitudes: None }
}

/// `Phi` together with the full vector of twisted values.
pub fn phi_with_amplitudes(t: &InstanceTuple) -> PhiResult {
    let state = final_state(t);
    PhiResult { phi: state[0], n: t.n(), k: t.k(), amplitudes: Some(state) }
}

/// The twisted values as a [`RealVector`].
pub fn amplitudes(t: &InstanceTuple) -> RealVector {
    RealVector::new(final_state(t)).expect("circuit output has power-of-two length")
}

pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

/// Literal evaluation of
/// `2^{-(k+1)n/2} sum f_1(x_1) (-1)^{x_1.x_2} f_2(x_2) ... f_k(x_k)`.
pub fn phi_bruteforce(t: &InstanceTuple) -> Result<f64> {
    let len = 1usize << t.n();
    let k = t.k();
    let terms = (len as f64).powi(k as i32);
    if terms > BRUTE_FORCE_LIMIT {
        return Err(Error::ResourceGuard(format!("N^k = {terms} exceeds {BRUTE_FORCE_LIMIT}")));
    }
    let fs = t.functions();
    let mut xs = vec![0usize; k];
    let mut total = 0.0;
    loop {
        let mut term = fs[0].value(xs[0]);
        for j in 1..k {
            term *= character(xs[j - 1], xs[j]) * fs[j].value(xs[j]);
        }
        total += term;

        let mut j = 0;
        while j < k {
            xs[j] += 1;
            if xs[j] < len {
                break;
            }
            xs[j] = 0;
            j += 1;
        }
        if j == k {
            break;
        }
    }
    Ok(total * (len as f64).powf(-((k + 1) as f64) / 2.0))
}

//! Statevector simulation of the `ceil(k/2)`-query algorithm and its
//! decision wrapper.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hadamard::{dot, fwht_in_place};
use crate::instances::InstanceTuple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    pub accept_probability: f64,
    pub decision: Decision,
    pub queries_used: usize,
}

/// How the control-qubit interference is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// `(1 + <b1|b0>) / 2` from the two branch states.
    #[default]
    InnerProduct,
    /// Full `(n+1)`-qubit state with a final Hadamard on the control.
    Controlled,
}

pub fn queries_used(k: usize) -> usize {
    k.div_ceil(2)
}

/// The two branch states. Branch 0 runs `H U_m ... H U_1 H |0>` with
/// `m = ceil(k/2)`; branch 1 runs `U_{m+1} H ... U_k H |0>`, so that
/// `<b1|b0> = Phi`.
pub fn branches(t: &InstanceTuple) -> (Vec<f64>, Vec<f64>) {
    let fs = t.functions();
    let m = queries_used(fs.len());
    let len = 1usize << t.n();

    let mut b0 = vec![0.0; len];
    b0[0] = 1.0;
    fwht_in_place(&mut b0);
    for f in &fs[..m] {
        f.multiply_into(&mut b0);
        fwht_in_place(&mut b0);
    }

    let mut b1 = vec![0.0; len];
    b1[0] = 1.0;
    for f in fs[m..].iter().rev() {
        fwht_in_place(&mut b1);
        f.multiply_into(&mut b1);
    }
    (b0, b1)
}

pub fn halfk_accept_probability(t: &InstanceTuple) -> f64 {
    halfk_accept_probability_with(t, Method::InnerProduct)
}

pub fn halfk_accept_probability_with(t: &InstanceTuple, method: Method) -> f64 {
    let (b0, b1) = branches(t);
    match method {
        Method::InnerProduct => (1.0 + dot(&b1, &b0)) / 2.0,
        Method::Controlled => {
            // control in |+>, branches entangled with it, then H on the control
            let s = 1.0 / 2f64.sqrt();
            let mut state: Vec<f64> = b0.iter().chain(&b1).map(|a| a * s).collect();
            let half = b0.len();
            let (zero, one) = state.split_at_mut(half);
            for (a, b) in zero.iter_mut().zip(one.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = (x + y) * s;
                *b = (x - y) * s;
            }
            zero.iter().map(|a| a * a).sum()
        }
    }
}

/// `(3/4)(1 + Phi)/2`: reject outright with probability 1/4, otherwise run
/// the half-k circuit.
pub fn decide_probability(phi: f64) -> f64 {
    // this grouping rounds to exactly 0.6 at phi = 0.6
    0.375 + 0.375 * phi
}

pub fn decide<R: Rng + ?Sized>(t: &InstanceTuple, rng: &mut R) -> Result<DecisionOutcome> {
    t.tables()?;
    let accept = 2.0 * halfk_accept_probability(t) - 1.0;
    let p = decide_probability(accept).clamp(0.0, 1.0);
    let decision = if rng.random::<f64>() < p { Decision::Accept } else { Decision::Reject };
    Ok(DecisionOutcome { accept_probability: p, decision, queries_used: queries_used(t.k()) })
}

//! Fourier sampling: draw `y` with probability `fhat(y)^2`, where
//! `fhat = fwht_raw(f) / N`.
//!
//! The relation variant asks for any `y` with `|fhat_unit(y)| >= c`, where
//! `fhat_unit = fwht_raw(f) / sqrt(N)` is the unitary transform.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hadamard::{fwht_in_place, fwht_raw_in_place, log2_len};
use crate::instances::TruthTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    n: u32,
    probabilities: Vec<f64>,
}

impl Distribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        let n = log2_len(probabilities.len())?;
        if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("probabilities sum to {total}")));
        }
        Ok(Self { n, probabilities })
    }

    /// Empirical distribution of `draws` over `{0,1}^n`.
    pub fn empirical(n: u32, draws: &[usize]) -> Result<Self> {
        if draws.is_empty() {
            return Err(invalid("no draws"));
        }
        let mut counts = vec![0.0; 1 << n];
        for &y in draws {
            *counts.get_mut(y).ok_or_else(|| invalid(format!("draw {y} out of range")))? += 1.0;
        }
        let total = draws.len() as f64;
        counts.iter_mut().for_each(|c| *c /= total);
        Ok(Self { n, probabilities: counts })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn sampler(&self) -> Sampler {
        Sampler { index: WeightedIndex::new(&self.probabilities).expect("a valid distribution has positive mass") }
    }
}

/// Repeated draws from one [`Distribution`].
#[derive(Debug, Clone)]
pub struct Sampler {
    index: WeightedIndex<f64>,
}

impl Sampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng)
    }
}

/// `D_f(y) = (fwht_raw(f)[y] / N)^2`.
pub fn exact_distribution(f: &TruthTable) -> Distribution {
    let mut v = f.to_f64();
    fwht_raw_in_place(&mut v);
    let len = v.len() as f64;
    let probabilities = v.into_iter().map(|a| (a / len).powi(2)).collect();
    Distribution { n: f.n(), probabilities }
}

/// `fwht_raw(f) / sqrt(N)`.
pub fn unitary_transform(f: &TruthTable) -> Vec<f64> {
    let mut v = f.to_f64();
    fwht_in_place(&mut v);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantumSample {
    pub y: usize,
    pub queries: usize,
}

/// One run of the single-query sampler.
pub fn quantum_sample<R: Rng + ?Sized>(f: &TruthTable, rng: &mut R) -> QuantumSample {
    QuantumSample { y: exact_distribution(f).sampler().sample(rng), queries: 1 }
}

/// `(1/2) sum |p - q|`.
pub fn tv_distance(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.probabilities.len() != q.probabilities.len() {
        return Err(Error::LengthMismatch { expected: p.probabilities.len(), got: q.probabilities.len() });
    }
    Ok(p.probabilities.iter().zip(&q.probabilities).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationStrategy {
    /// Output a Fourier sample.
    Quantum,
    /// Output `0^n` without querying.
    ZeroQuery,
}

impl std::str::FromStr for RelationStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(Self::Quantum),
            "zero-query" | "zero_query" => Ok(Self::ZeroQuery),
            other => Err(invalid(format!("unknown relation strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationOutcome {
    pub y: usize,
    pub success: bool,
    pub queries: usize,
}

fn check_threshold(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("threshold c = {c} must be positive")))
    }
}

pub fn relation_solve<R: Rng + ?Sized>(
    f: &TruthTable,
    c: f64,
    strategy: RelationStrategy,
    rng: &mut R,
) -> Result<RelationOutcome> {
    check_threshold(c)?;
    let unit = unitary_transform(f);
    let (y, queries) = match strategy {
        RelationStrategy::Quantum => {
            let d = unit.iter().map(|a| a * a / unit.len() as f64);
            let index = WeightedIndex::new(d).expect("Parseval gives positive mass");
            (index.sample(rng), 1)
        }
        RelationStrategy::ZeroQuery => (0, 0),
    };
    Ok(RelationOutcome { y, success: unit[y].abs() >= c, queries })
}

/// Probability that a Fourier sample meets the threshold.
pub fn relation_success_exact(f: &TruthTable, c: f64) -> Result<f64> {
    check_threshold(c)?;
    let unit = unitary_transform(f);
    let len = unit.len() as f64;
    Ok(unit.iter().filter(|a| a.abs() >= c).map(|a| a * a / len).sum())
}

//! Sublinear classical estimators.
//!
//! * [`estimate_blockpoly`] marks variables of a balanced block polynomial at
//!   random and rescales the sum over fully marked monomials.
//! * [`simulate_quantum_classically`] chains extraction, balancing and the
//!   block estimator to approximate a query algorithm's acceptance
//!   probability.
//! * [`estimate_quadratic`] handles a general bounded polynomial of degree at
//!   most 2 by splitting high-influence variables first.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::blockpoly::{balance, from_query_algorithm, Balanced, BlockMultilinearPoly, QueryAlgorithm};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Every monomial is kept independently with probability `1/n`.
    Warmup,
    /// Every variable is kept independently with probability `n^{-1/k}`.
    #[default]
    Main,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "warmup" => Ok(Mode::Warmup),
            "main" => Ok(Mode::Main),
            other => Err(invalid(format!("unknown mode `{other}`"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Warmup => "warmup",
            Mode::Main => "main",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub mode: Mode,
    pub repetitions: usize,
    /// Overrides the default marking probability.
    pub mark_probability: Option<f64>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { mode: Mode::Main, repetitions: 16, mark_probability: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: f64,
    /// Distinct input positions read.
    pub queries_used: usize,
    pub repetitions: usize,
    pub per_repetition_values: Vec<f64>,
}

impl EstimateReport {
    fn exact(value: f64) -> Self {
        Self { estimate: value, queries_used: 0, repetitions: 0, per_repetition_values: Vec::new() }
    }
}

/// Values of the original (unsplit) variables of every block, and the input
/// position each one reads. Variables without a position are free.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockInput {
    values: Vec<Vec<f64>>,
    positions: Vec<Vec<Option<usize>>>,
}

impl BlockInput {
    pub fn new(values: Vec<Vec<f64>>, positions: Vec<Vec<Option<usize>>>) -> Result<Self> {
        if values.len() != positions.len() {
            return Err(Error::LengthMismatch { expected: values.len(), got: positions.len() });
        }
        for (v, p) in values.iter().zip(&positions) {
            if v.len() != p.len() {
                return Err(Error::LengthMismatch { expected: v.len(), got: p.len() });
            }
        }
        Ok(Self { values, positions })
    }

    /// Independent blocks: variable `i` of block `j` is its own position.
    pub fn per_block(values: Vec<Vec<f64>>) -> Self {
        let mut next = 0;
        let positions = values
            .iter()
            .map(|b| {
                let p: Vec<_> = (next..next + b.len()).map(Some).collect();
                next += b.len();
                p
            })
            .collect();
        Self { values, positions }
    }

    /// `k` copies of `(1, x_1, ..., x_N)`, the layout produced by
    /// [`from_query_algorithm`].
    pub fn shared_with_dummy(x: &[i8], k: usize) -> Self {
        let values: Vec<f64> = std::iter::once(1.0).chain(x.iter().map(|&v| f64::from(v))).collect();
        let positions: Vec<Option<usize>> = std::iter::once(None).chain((0..x.len()).map(Some)).collect();
        Self { values: vec![values; k], positions: vec![positions; k] }
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn positions(&self) -> &[Vec<Option<usize>>] {
        &self.positions
    }
}

fn check_probability(q: f64) -> Result<f64> {
    if q > 0.0 && q <= 1.0 {
        Ok(q)
    } else {
        Err(invalid(format!("marking probability {q} outside (0, 1]")))
    }
}

fn binomial<R: Rng + ?Sized>(trials: u64, q: f64, rng: &mut R) -> u64 {
    if q >= 1.0 {
        trials
    } else if trials == 1 {
        u64::from(rng.random_bool(q))
    } else {
        Binomial::new(trials, q).expect("valid parameters").sample(rng)
    }
}

/// Runs the estimator on a balanced polynomial.
///
/// Copies of one original variable are exchangeable, so only the number of
/// marked copies matters; it is drawn as a binomial instead of materializing
/// the copies.
pub fn estimate_blockpoly<R: Rng + ?Sized>(
    b: &Balanced,
    input: &BlockInput,
    rng: &mut R,
    cfg: &EstimatorConfig,
) -> Result<EstimateReport> {
    let base = b.base();
    if input.values.len() != base.k() {
        return Err(Error::LengthMismatch { expected: base.k(), got: input.values.len() });
    }
    for (v, &size) in input.values.iter().zip(base.block_sizes()) {
        if v.len() != size {
            return Err(Error::LengthMismatch { expected: size, got: v.len() });
        }
    }
    if cfg.repetitions == 0 {
        return Err(invalid("at least one repetition is required"));
    }
    b.audit()?;

    let k = base.k();
    let n = b.block_size().max(1) as f64;
    let copies = b.copies();
    // a variable outside every monomial never has to be read
    let mut used: Vec<Vec<bool>> = base.block_sizes().iter().map(|&n| vec![false; n]).collect();
    for (idx, _) in base.terms() {
        for (j, &i) in idx.iter().enumerate() {
            used[j][i] = true;
        }
    }
    let mut read = BTreeSet::new();
    let mut values = Vec::with_capacity(cfg.repetitions);

    match cfg.mode {
        Mode::Main => {
            let q = check_probability(cfg.mark_probability.unwrap_or(n.powf(-1.0 / k as f64)))?;
            let scale = q.powi(k as i32);
            for _ in 0..cfg.repetitions {
                let z: Vec<Vec<f64>> = (0..k)
                    .map(|j| {
                        copies[j]
                            .iter()
                            .enumerate()
                            .map(|(i, &c)| {
                                let marked = binomial(c as u64, q, rng);
                                if marked == 0 {
                                    return 0.0;
                                }
                                if let (true, Some(pos)) = (used[j][i], input.positions[j][i]) {
                                    read.insert(pos);
                                }
                                input.values[j][i] * marked as f64 / c as f64
                            })
                            .collect()
                    })
                    .collect();
                values.push(base.eval_unchecked(|j, i| z[j][i]) / scale);
            }
        }
        Mode::Warmup => {
            let q = check_probability(cfg.mark_probability.unwrap_or(1.0 / n))?;
            for _ in 0..cfg.repetitions {
                let mut total = 0.0;
                for (idx, a) in base.terms() {
                    let tuples: f64 = idx.iter().enumerate().map(|(j, &i)| copies[j][i] as f64).product();
                    let marked = binomial(tuples as u64, q, rng);
                    if marked == 0 {
                        continue;
                    }
                    let mut term = a * marked as f64 / tuples;
                    for (j, &i) in idx.iter().enumerate() {
                        term *= input.values[j][i];
                        if let Some(pos) = input.positions[j][i] {
                            read.insert(pos);
                        }
                    }
                    total += term;
                }
                values.push(total / q);
            }
        }
    }

    let estimate = values.iter().sum::<f64>() / values.len() as f64;
    Ok(EstimateReport { estimate, queries_used: read.len(), repetitions: cfg.repetitions, per_repetition_values: values })
}

/// One draw of the main estimator on an explicit polynomial with explicit
/// marks: the sum over monomials whose variables are all marked.
pub fn main_single_sample(p: &BlockMultilinearPoly, x: &[Vec<f64>], marks: &[Vec<bool>]) -> Result<f64> {
    p.evaluate(x)?;
    Ok(p.eval_unchecked(|j, i| if marks[j][i] { x[j][i] } else { 0.0 }))
}

/// One draw of the warmup estimator with an explicit set of marked monomials.
pub fn warmup_single_sample(p: &BlockMultilinearPoly, x: &[Vec<f64>], marked: &BTreeSet<Vec<usize>>) -> Result<f64> {
    p.evaluate(x)?;
    Ok(p
        .terms()
        .filter(|(idx, _)| marked.contains(*idx))
        .map(|(idx, a)| idx.iter().enumerate().fold(a, |acc, (j, &i)| acc * x[j][i]))
        .sum())
}

/// Estimates the acceptance probability of `a` on `x` to additive error
/// about `eps` without reading all of `x`.
pub fn simulate_quantum_classically<R: Rng + ?Sized>(
    a: &QueryAlgorithm,
    x: &[i8],
    eps: f64,
    rng: &mut R,
    cfg: &EstimatorConfig,
) -> Result<EstimateReport> {
    if x.len() != a.input_len() {
        return Err(Error::LengthMismatch { expected: a.input_len(), got: x.len() });
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("eps = {eps} must be positive")));
    }
    let p = from_query_algorithm(a)?;
    if p.terms().all(|(idx, _)| idx.iter().all(|&i| i == 0)) {
        let value = p.terms().map(|(_, c)| c).sum();
        return Ok(EstimateReport::exact(value));
    }
    let delta = eps * eps / x.len() as f64;
    let b = balance(&p, delta)?;
    let input = BlockInput::shared_with_dummy(x, p.k());
    estimate_blockpoly(&b, &input, rng, cfg)
}

/// A multilinear polynomial over `x_0, ..., x_{N-1}` in `{-1, 1}`; keys are
/// sorted variable sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMultilinear", into = "RawMultilinear")]
pub struct MultilinearPoly {
    n_vars: usize,
    terms: BTreeMap<Vec<usize>, f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMultilinear {
    n_vars: usize,
    terms: Vec<RawMonomial>,
}

#[derive(Serialize, Deserialize)]
struct RawMonomial {
    vars: Vec<usize>,
    c: f64,
}

impl TryFrom<RawMultilinear> for MultilinearPoly {
    type Error = Error;

    fn try_from(raw: RawMultilinear) -> Result<Self> {
        Self::from_terms(raw.n_vars, raw.terms.into_iter().map(|m| (m.vars, m.c)))
    }
}

impl From<MultilinearPoly> for RawMultilinear {
    fn from(p: MultilinearPoly) -> Self {
        let terms = p.terms.into_iter().map(|(vars, c)| RawMonomial { vars, c }).collect();
        Self { n_vars: p.n_vars, terms }
    }
}

impl MultilinearPoly {
    pub fn zero(n_vars: usize) -> Self {
        Self { n_vars, terms: BTreeMap::new() }
    }

    /// Builds a polynomial, reducing `x_i^2 = 1` and merging equal keys.
    pub fn from_terms(n_vars: usize, terms: impl IntoIterator<Item = (Vec<usize>, f64)>) -> Result<Self> {
        let mut p = Self::zero(n_vars);
        for (vars, c) in terms {
            p.add_term(vars, c)?;
        }
        Ok(p)
    }

    pub fn add_term(&mut self, mut vars: Vec<usize>, c: f64) -> Result<()> {
        if !c.is_finite() {
            return Err(invalid("coefficients must be finite"));
        }
        if let Some(&v) = vars.iter().find(|&&v| v >= self.n_vars) {
            return Err(invalid(format!("variable {v} out of range for {} variables", self.n_vars)));
        }
        vars.sort_unstable();
        let mut reduced: Vec<usize> = Vec::with_capacity(vars.len());
        for v in vars {
            if reduced.last() == Some(&v) {
                reduced.pop();
            } else {
                reduced.push(v);
            }
        }
        let entry = self.terms.entry(reduced).or_insert(0.0);
        *entry += c;
        Ok(())
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().filter(|(_, c)| **c != 0.0).map(|(s, _)| s.len()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.terms.iter().filter(|(_, c)| **c != 0.0).map(|(s, c)| (s.as_slice(), *c))
    }

    pub fn coefficient(&self, vars: &[usize]) -> f64 {
        self.terms.get(vars).copied().unwrap_or(0.0)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_vars {
            return Err(Error::LengthMismatch { expected: self.n_vars, got: x.len() });
        }
        Ok(self.terms().map(|(s, c)| s.iter().fold(c, |acc, &i| acc * x[i])).sum())
    }

    pub fn evaluate_signs(&self, x: &[i8]) -> Result<f64> {
        let x: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
        self.evaluate(&x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierStats {
    pub variance: f64,
    pub influences: Vec<f64>,
}

pub fn fourier_stats(p: &MultilinearPoly) -> FourierStats {
    let mut influences = vec![0.0; p.n_vars];
    let mut variance = 0.0;
    for (s, c) in p.terms() {
        if s.is_empty() {
            continue;
        }
        variance += c * c;
        for &i in s {
            influences[i] += c * c;
        }
    }
    FourierStats { variance, influences }
}

/// Random bounded polynomial of degree 2 on `n_vars` variables: a convex
/// combination of products of two L1-normalized linear forms on disjoint
/// supports, squares of such forms, single forms and constants. Each piece
/// lies in `[-1, 1]`, hence so does the mixture.
pub fn random_bounded_quadratic<R: Rng + ?Sized>(n_vars: usize, rng: &mut R) -> MultilinearPoly {
    fn form<R: Rng + ?Sized>(support: &[usize], rng: &mut R) -> Vec<(usize, f64)> {
        let w: Vec<f64> = support.iter().map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let l1: f64 = w.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
        support.iter().zip(w).map(|(&i, v)| (i, v / l1)).collect()
    }

    assert!(n_vars >= 2, "need at least two variables");
    let pieces = rng.random_range(2..=6);
    let weights: Vec<f64> = (0..pieces).map(|_| -rng.random::<f64>().ln()).collect();
    let total: f64 = weights.iter().sum();
    let max_support = n_vars.min(32);

    let mut p = MultilinearPoly::zero(n_vars);
    for w in weights.iter().map(|w| w / total) {
        match rng.random_range(0..4) {
            0 => {
                let s = rng.random_range(2..=max_support);
                let idx = rand::seq::index::sample(rng, n_vars, s).into_vec();
                let cut = rng.random_range(1..s);
                let (u, v) = (form(&idx[..cut], rng), form(&idx[cut..], rng));
                for &(i, a) in &u {
                    for &(j, b) in &v {
                        p.add_term(vec![i, j], w * a * b).expect("in range");
                    }
                }
            }
            1 => {
                let s = rng.random_range(2..=max_support);
                let idx = rand::seq::index::sample(rng, n_vars, s).into_vec();
                let u = form(&idx, rng);
                for &(i, a) in &u {
                    for &(j, b) in &u {
                        p.add_term(vec![i, j], w * a * b).expect("in range");
                    }
                }
            }
            2 => {
                let s = rng.random_range(1..=max_support);
                let idx = rand::seq::index::sample(rng, n_vars, s).into_vec();
                for (i, a) in form(&idx, rng) {
                    p.add_term(vec![i], w * a).expect("in range");
                }
            }
            _ => p.add_term(Vec::new(), w * rng.random_range(-1.0..=1.0)).expect("in range"),
        }
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticConfig {
    /// Halting constant for both splitting loops.
    pub c: f64,
    /// Overrides `1/sqrt(n)` for the quadratic part.
    pub mark_probability: Option<f64>,
    /// Cap on repetitions of the quadratic sampler.
    pub max_repetitions: usize,
    /// Splitting steps allowed per original variable.
    pub iteration_factor: usize,
}

impl Default for QuadraticConfig {
    fn default() -> Self {
        Self { c: 4.0, mark_probability: None, max_repetitions: 20_000, iteration_factor: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitPhase {
    /// Splitting the most influential variable.
    Influence,
    /// Splitting the variable with the largest squared row sum.
    RowSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitStep {
    pub phase: SplitPhase,
    pub variable: usize,
    pub variance: f64,
    pub row_mass: f64,
}

/// The homogeneous quadratic part after splitting. `weights[i][j]` is the
/// coefficient of `y_i y_j` (stored in both directions) and `origin[i]` the
/// original variable of `y_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSplit {
    origin: Vec<usize>,
    weights: Vec<BTreeMap<usize, f64>>,
    influence: Vec<f64>,
    row: Vec<f64>,
    variance: f64,
    row_mass: f64,
    pub history: Vec<SplitStep>,
}

impl QuadraticSplit {
    /// The degree-2 part of `p`, unsplit.
    pub fn new(p: &MultilinearPoly) -> Self {
        let n = p.n_vars;
        let mut weights = vec![BTreeMap::new(); n];
        for (s, c) in p.terms() {
            if let [i, j] = *s {
                weights[i].insert(j, c);
                weights[j].insert(i, c);
            }
        }
        let mut out = Self {
            origin: (0..n).collect(),
            weights,
            influence: Vec::new(),
            row: Vec::new(),
            variance: 0.0,
            row_mass: 0.0,
            history: Vec::new(),
        };
        out.recompute();
        out
    }

    /// Recomputes every statistic from the weights.
    pub fn recompute(&mut self) {
        self.influence = self.weights.iter().map(|r| r.values().map(|c| c * c).sum()).collect();
        self.row = self.weights.iter().map(|r| r.values().sum::<f64>() / 2.0).collect();
        self.variance = self.influence.iter().sum::<f64>() / 2.0;
        self.row_mass = self.row.iter().map(|r| r * r).sum();
    }

    pub fn n_vars(&self) -> usize {
        self.origin.len()
    }

    pub fn origin(&self) -> &[usize] {
        &self.origin
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// `V = sum_i (sum_j a_ij)^2` with `a_ij = a_ji` half the pair weight.
    pub fn row_mass(&self) -> f64 {
        self.row_mass
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i].get(&j).copied().unwrap_or(0.0)
    }

    /// Value on the original input.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.range(i + 1..).map(move |(&j, &c)| (i, j, c)))
            .map(|(i, j, c)| c * x[self.origin[i]] * x[self.origin[j]])
            .sum()
    }

    /// Replaces `y_i` by two copies sharing its pair weights equally.
    pub fn split(&mut self, i: usize) -> usize {
        let fresh = self.origin.len();
        self.origin.push(self.origin[i]);
        let row = std::mem::take(&mut self.weights[i]);
        let mut halved = BTreeMap::new();
        for (&j, &c) in &row {
            let h = c / 2.0;
            halved.insert(j, h);
            let neighbour = &mut self.weights[j];
            neighbour.insert(i, h);
            neighbour.insert(fresh, h);
            self.influence[j] -= c * c / 2.0;
        }
        self.weights[i] = halved.clone();
        self.weights.push(halved);

        self.variance -= self.influence[i] / 2.0;
        self.row_mass -= self.row[i] * self.row[i] / 2.0;
        self.influence[i] /= 4.0;
        self.row[i] /= 2.0;
        self.influence.push(self.influence[i]);
        self.row.push(self.row[i]);
        fresh
    }

    fn argmax(values: &[f64]) -> usize {
        let mut best = 0;
        for (i, &v) in values.iter().enumerate() {
            if v > values[best] {
                best = i;
            }
        }
        best
    }

    /// Runs both splitting loops against `original` variables.
    pub fn run(&mut self, original: usize, cfg: &QuadraticConfig) -> Result<()> {
        let n = original.max(2) as f64;
        let var_target = cfg.c / n;
        let row_target = cfg.c * n.ln() / n;
        let cap = cfg.iteration_factor * original.max(1);
        let mut steps = 0;
        let mut step = |s: &mut Self, phase: SplitPhase, i: usize| -> Result<()> {
            steps += 1;
            if steps > cap {
                return Err(Error::ResourceGuard(format!(
                    "splitting did not converge in {cap} steps: variance {:.3e} (target {var_target:.3e}), \
                     row mass {:.3e} (target {row_target:.3e}), {} variables",
                    s.variance,
                    s.row_mass,
                    s.n_vars()
                )));
            }
            s.split(i);
            s.history.push(SplitStep { phase, variable: i, variance: s.variance, row_mass: s.row_mass });
            Ok(())
        };
        while self.variance >= var_target {
            let i = Self::argmax(&self.influence);
            step(self, SplitPhase::Influence, i)?;
        }
        while self.row_mass >= row_target {
            let rows: Vec<f64> = self.row.iter().map(|r| r * r).collect();
            let i = Self::argmax(&rows);
            step(self, SplitPhase::RowSum, i)?;
        }
        Ok(())
    }

    /// Upper bound on the variance of one draw of the pair sampler at
    /// marking probability `q`, valid for every input.
    pub fn sampler_variance_bound(&self, q: f64) -> f64 {
        let cross: f64 = self
            .weights
            .iter()
            .map(|r| {
                let l1: f64 = r.values().map(|c| c.abs()).sum();
                let l2: f64 = r.values().map(|c| c * c).sum();
                l1 * l1 - l2
            })
            .sum();
        (q.powi(-2) - 1.0) * self.variance.max(0.0) + (1.0 / q - 1.0) * cross
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticReport {
    #[serde(flatten)]
    pub report: EstimateReport,
    pub constant: f64,
    pub linear_estimate: f64,
    pub linear_samples: usize,
    pub quadratic_estimate: f64,
    pub variables_after_split: usize,
    pub variance_after_split: f64,
    pub row_mass_after_split: f64,
}

/// Estimates a bounded polynomial of degree at most 2 at `x`.
///
/// The constant is read off, the linear part is importance sampled by
/// coefficient magnitude, and the quadratic part is split and then sampled
/// pairwise. Sample counts are chosen so that each nonconstant part has
/// standard deviation at most `eps / 3`, up to the repetition cap.
pub fn estimate_quadratic<R: Rng + ?Sized>(
    p: &MultilinearPoly,
    x: &[i8],
    eps: f64,
    rng: &mut R,
    cfg: &QuadraticConfig,
) -> Result<QuadraticReport> {
    if x.len() != p.n_vars {
        return Err(Error::LengthMismatch { expected: p.n_vars, got: x.len() });
    }
    if p.degree() > 2 {
        return Err(invalid(format!("degree {} exceeds 2", p.degree())));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("eps = {eps} must be positive")));
    }
    let xf = |i: usize| f64::from(x[i]);
    let mut read = BTreeSet::new();

    let constant = p.coefficient(&[]);

    let linear: Vec<(usize, f64)> = p.terms().filter(|(s, _)| s.len() == 1).map(|(s, c)| (s[0], c)).collect();
    let l1: f64 = linear.iter().map(|(_, c)| c.abs()).sum();
    let (linear_estimate, linear_samples) = if l1 == 0.0 {
        (0.0, 0)
    } else {
        let samples = (9.0 * l1 * l1 / (eps * eps)).ceil() as usize;
        let mut cumulative = Vec::with_capacity(linear.len());
        let mut acc = 0.0;
        for (_, c) in &linear {
            acc += c.abs();
            cumulative.push(acc);
        }
        let mut sum = 0.0;
        for _ in 0..samples {
            let u = rng.random::<f64>() * l1;
            let pick = cumulative.partition_point(|&c| c <= u).min(linear.len() - 1);
            let (i, c) = linear[pick];
            read.insert(i);
            sum += l1 * c.signum() * xf(i);
        }
        (sum / samples as f64, samples)
    };

    let mut split = QuadraticSplit::new(p);
    split.run(p.n_vars, cfg)?;
    let n = split.n_vars();
    let q = check_probability(cfg.mark_probability.unwrap_or(1.0 / (n.max(1) as f64).sqrt()))?;
    let bound = split.sampler_variance_bound(q);
    let repetitions = ((9.0 * bound / (eps * eps)).ceil() as usize).clamp(1, cfg.max_repetitions.max(1));

    let has_pairs = split.variance > 0.0 || split.weights.iter().any(|r| !r.is_empty());
    let mut values = Vec::with_capacity(repetitions);
    if has_pairs {
        let mut marked = vec![false; n];
        let mut list = Vec::new();
        for _ in 0..repetitions {
            list.clear();
            for (i, m) in marked.iter_mut().enumerate() {
                *m = rng.random_bool(q);
                if *m && !split.weights[i].is_empty() {
                    list.push(i);
                    read.insert(split.origin[i]);
                }
            }
            let mut sum = 0.0;
            for &i in &list {
                let xi = xf(split.origin[i]);
                for (&j, &c) in split.weights[i].range(i + 1..) {
                    if marked[j] {
                        sum += c * xi * xf(split.origin[j]);
                    }
                }
            }
            values.push(sum / (q * q));
        }
    }
    let quadratic_estimate = if values.is_empty() { 0.0 } else { values.iter().sum::<f64>() / values.len() as f64 };

    Ok(QuadraticReport {
        report: EstimateReport {
            estimate: constant + linear_estimate + quadratic_estimate,
            queries_used: read.len(),
            repetitions: values.len(),
            per_repetition_values: values,
        },
        constant,
        linear_estimate,
        linear_samples,
        quadratic_estimate,
        variables_after_split: n,
        variance_after_split: split.variance,
        row_mass_after_split: split.row_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fourier_examples() {
        let p = MultilinearPoly::from_terms(3, [(vec![0], 1.0)]).unwrap();
        let s = fourier_stats(&p);
        assert_eq!(s.variance, 1.0);
        assert_eq!(s.influences, vec![1.0, 0.0, 0.0]);

        let p = MultilinearPoly::from_terms(2, [(vec![1, 0], 1.0)]).unwrap();
        let s = fourier_stats(&p);
        assert_eq!(s.influences, vec![1.0, 1.0]);
        assert_eq!(s.influences.iter().sum::<f64>(), 2.0 * s.variance);
    }

    #[test]
    fn squares_reduce() {
        let p = MultilinearPoly::from_terms(2, [(vec![0, 0], 0.5), (vec![1, 0, 1], 2.0)]).unwrap();
        assert_eq!(p.coefficient(&[]), 0.5);
        assert_eq!(p.coefficient(&[0]), 2.0);
        assert_eq!(p.degree(), 1);
    }

    #[test]
    fn split_keeps_value_and_halves_influence() {
        let p = MultilinearPoly::from_terms(3, [(vec![0, 1], 0.5), (vec![0, 2], 0.25), (vec![1, 2], 0.125)]).unwrap();
        let mut s = QuadraticSplit::new(&p);
        let x = [1.0, -1.0, -1.0];
        let before = s.evaluate(&x);
        let (var, inf0) = (s.variance(), s.influence[0]);
        s.split(0);
        assert!((s.evaluate(&x) - before).abs() < 1e-15);
        assert!((s.variance() - (var - inf0 / 2.0)).abs() < 1e-15);
        let mut fresh = s.clone();
        fresh.recompute();
        assert!((fresh.variance() - s.variance()).abs() < 1e-15);
        assert!((fresh.row_mass() - s.row_mass()).abs() < 1e-15);
    }

    #[test]
    fn full_marking_is_exact() {
        let p = MultilinearPoly::from_terms(2, [(vec![0, 1], 1.0)]).unwrap();
        let cfg = QuadraticConfig { mark_probability: Some(1.0), ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = estimate_quadratic(&p, &[1, -1], 0.1, &mut rng, &cfg).unwrap();
        assert_eq!(r.report.estimate, -1.0);
    }

    #[test]
    fn mode_parses() {
        assert_eq!("warmup".parse::<Mode>().unwrap(), Mode::Warmup);
        assert!("fast".parse::<Mode>().is_err());
    }
}

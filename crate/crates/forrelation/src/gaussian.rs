//! Gaussian distinguishing: is each response a fresh standard normal (case
//! i), or the projection `<Psi|v>` of one hidden Gaussian vector (case ii)?
//!
//! [`Transcript`] runs Gram-Schmidt on the queried vectors without forming
//! them, using only their pairwise inner products. [`run_distinguisher`]
//! plays full episodes and measures the bias of the likelihood-ratio rule.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hadamard::{character, fwht_in_place, fwht_raw_in_place};
use crate::instances::MultiplierVector;

/// A query whose residual norm squared is at or below this is dependent.
pub const DEPENDENCE_THRESHOLD: f64 = 1e-12;
pub const MAX_VECTOR_BITS: u32 = 14;

#[derive(Debug, Clone, PartialEq)]
enum Family {
    /// `e_x` then the columns of the unitary Hadamard matrix, optionally
    /// reweighted by multipliers `c`.
    Hadamard { c: Option<Vec<f64>>, self_overlap: Vec<f64> },
    Dense(Vec<Vec<f64>>),
}

/// A finite set of unit vectors addressed by id.
#[derive(Debug, Clone, PartialEq)]
pub struct TestVectorSet {
    dim: usize,
    family: Family,
    epsilon_bound: f64,
}

pub fn make_forrelation_vectors(n: u32) -> Result<TestVectorSet> {
    if n > MAX_VECTOR_BITS {
        return Err(Error::ResourceGuard(format!("n = {n} exceeds {MAX_VECTOR_BITS}")));
    }
    let dim = 1usize << n;
    let mut self_overlap = vec![0.0; dim];
    self_overlap[0] = 1.0;
    Ok(TestVectorSet {
        dim,
        family: Family::Hadamard { c: None, self_overlap },
        epsilon_bound: if dim > 1 { 1.0 / (dim as f64).sqrt() } else { 1.0 },
    })
}

/// Standard basis plus `psi_y = N^{-1/2} sum_x c_x (-1)^{x.y} |x>`.
pub fn make_kfold_vectors(c: &MultiplierVector) -> Result<TestVectorSet> {
    let n = c.n();
    if n > MAX_VECTOR_BITS {
        return Err(Error::ResourceGuard(format!("n = {n} exceeds {MAX_VECTOR_BITS}")));
    }
    let dim = 1usize << n;
    let values = c.values().to_vec();
    let mut s: Vec<f64> = values.iter().map(|v| v * v / dim as f64).collect();
    fwht_raw_in_place(&mut s);
    let cross = values.iter().map(|v| v.abs()).fold(0.0, f64::max) / (dim as f64).sqrt();
    let within = s.iter().skip(1).map(|v| v.abs()).fold(0.0, f64::max);
    Ok(TestVectorSet { dim, family: Family::Hadamard { c: Some(values), self_overlap: s }, epsilon_bound: cross.max(within) })
}

/// Arbitrary unit vectors, normalized on entry.
pub fn make_dense_vectors(vectors: Vec<Vec<f64>>) -> Result<TestVectorSet> {
    let dim = vectors.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(invalid("need at least one nonempty vector"));
    }
    let mut unit = Vec::with_capacity(vectors.len());
    for v in vectors {
        if v.len() != dim {
            return Err(Error::LengthMismatch { expected: dim, got: v.len() });
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(invalid("vectors must be nonzero and finite"));
        }
        unit.push(v.into_iter().map(|x| x / norm).collect::<Vec<_>>());
    }
    let mut eps: f64 = 0.0;
    for i in 0..unit.len() {
        for j in 0..i {
            eps = eps.max(crate::hadamard::dot(&unit[i], &unit[j]).abs());
        }
    }
    Ok(TestVectorSet { dim, family: Family::Dense(unit), epsilon_bound: eps })
}

impl TestVectorSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        match &self.family {
            Family::Hadamard { .. } => 2 * self.dim,
            Family::Dense(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn epsilon_bound(&self) -> f64 {
        self.epsilon_bound
    }

    /// Whether `id` is a standard basis vector of a Hadamard-type set.
    pub fn is_standard(&self, id: usize) -> bool {
        matches!(self.family, Family::Hadamard { .. }) && id < self.dim
    }

    fn weight(&self, x: usize) -> f64 {
        match &self.family {
            Family::Hadamard { c: Some(c), .. } => c[x],
            _ => 1.0,
        }
    }

    /// `<v_i|v_j>`.
    pub fn gram(&self, i: usize, j: usize) -> f64 {
        match &self.family {
            Family::Dense(v) => crate::hadamard::dot(&v[i], &v[j]),
            Family::Hadamard { self_overlap, .. } => {
                let n = self.dim;
                match (i < n, j < n) {
                    (true, true) => f64::from(u8::from(i == j)),
                    (true, false) => self.weight(i) * character(i, j - n) / (n as f64).sqrt(),
                    (false, true) => self.weight(j) * character(j, i - n) / (n as f64).sqrt(),
                    (false, false) => self_overlap[(i - n) ^ (j - n)],
                }
            }
        }
    }

    pub fn dense(&self, id: usize) -> Vec<f64> {
        match &self.family {
            Family::Dense(v) => v[id].clone(),
            Family::Hadamard { .. } => {
                let n = self.dim;
                if id < n {
                    let mut e = vec![0.0; n];
                    e[id] = 1.0;
                    e
                } else {
                    let s = 1.0 / (n as f64).sqrt();
                    (0..n).map(|x| self.weight(x) * character(x, id - n) * s).collect()
                }
            }
        }
    }

    /// `<Psi|v>` for every id.
    pub fn responses(&self, psi: &[f64]) -> Vec<f64> {
        match &self.family {
            Family::Dense(v) => v.iter().map(|u| crate::hadamard::dot(u, psi)).collect(),
            Family::Hadamard { .. } => {
                let mut h: Vec<f64> = psi.iter().enumerate().map(|(x, p)| p * self.weight(x)).collect();
                fwht_in_place(&mut h);
                psi.iter().copied().chain(h).collect()
            }
        }
    }

    /// Largest `|<v|w>|` over distinct ids in `ids`, by direct dot products.
    pub fn audit_epsilon(&self, ids: &[usize]) -> f64 {
        let dense: Vec<Vec<f64>> = ids.iter().map(|&i| self.dense(i)).collect();
        let mut eps: f64 = 0.0;
        for i in 0..dense.len() {
            for j in 0..i {
                eps = eps.max(crate::hadamard::dot(&dense[i], &dense[j]).abs());
            }
        }
        eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    I,
    Ii,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::I => "i",
            Case::Ii => "ii",
        })
    }
}

/// Answers queries in one episode.
#[derive(Debug, Clone)]
pub struct Oracle {
    case: Case,
    hidden: Option<Vec<f64>>,
    asked: BTreeSet<usize>,
    size: usize,
}

impl Oracle {
    /// For case ii, draws `Psi` and precomputes every response.
    pub fn new<R: Rng + ?Sized>(set: &TestVectorSet, case: Case, rng: &mut R) -> Self {
        let hidden = (case == Case::Ii).then(|| {
            let psi: Vec<f64> = (0..set.dim).map(|_| rng.sample(StandardNormal)).collect();
            set.responses(&psi)
        });
        Self { case, hidden, asked: BTreeSet::new(), size: set.len() }
    }

    pub fn case(&self) -> Case {
        self.case
    }

    pub fn respond<R: Rng + ?Sized>(&mut self, id: usize, rng: &mut R) -> Result<f64> {
        if id >= self.size {
            return Err(invalid(format!("vector id {id} out of range")));
        }
        if !self.asked.insert(id) {
            return Err(Error::RepeatedQuery(id));
        }
        Ok(match &self.hidden {
            Some(r) => r[id],
            None => rng.sample(StandardNormal),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub delta_u: f64,
    pub delta_f: f64,
    pub delta: f64,
    /// `Delta_U - sum c_i^2`; absent when computed in batch.
    pub delta_prime: Option<f64>,
    pub likelihood_ratio: f64,
    pub well_behaved: bool,
}

/// `|a| <= sqrt(2 ln 100 t)`.
pub fn well_behaved_bound(t: usize) -> f64 {
    (2.0 * (100.0 * t.max(1) as f64).ln()).sqrt()
}

/// Queried vectors and responses with the running Gram-Schmidt data.
/// `overlaps[i][j] = <v_i|w_j>` for `j < i`, and `1 / beta_i` on the
/// diagonal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    ids: Vec<usize>,
    responses: Vec<f64>,
    overlaps: Vec<Vec<f64>>,
    beta: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    r: Vec<f64>,
    delta_u: f64,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    /// `<v_i|w_j>` for `j < i`.
    pub fn overlap(&self, i: usize, j: usize) -> f64 {
        self.overlaps[i][j]
    }

    /// Overlaps of a candidate `id` with every `w_j`, and its residual norm
    /// squared.
    fn project(&self, set: &TestVectorSet, id: usize) -> (Vec<f64>, f64) {
        let mut ov = Vec::with_capacity(self.len());
        for j in 0..self.len() {
            let row = &self.overlaps[j];
            let acc: f64 = (0..j).map(|l| row[l] * ov[l]).sum();
            ov.push(self.beta[j] * (set.gram(id, self.ids[j]) - acc));
        }
        let residual = set.gram(id, id) - ov.iter().map(|o| o * o).sum::<f64>();
        (ov, residual)
    }

    /// `sum_j <v|w_j> c_j`, the prediction for `id` before querying it.
    pub fn predicted(&self, set: &TestVectorSet, id: usize) -> f64 {
        let (ov, _) = self.project(set, id);
        ov.iter().zip(&self.c).map(|(o, c)| o * c).sum()
    }

    /// Appends `(id, a)`. A vector in the span of earlier queries is
    /// refused with the value it is forced to take in case ii.
    pub fn push(&mut self, set: &TestVectorSet, id: usize, a: f64) -> Result<DeltaReport> {
        if id >= set.len() {
            return Err(invalid(format!("vector id {id} out of range")));
        }
        if self.ids.contains(&id) {
            return Err(Error::RepeatedQuery(id));
        }
        let (mut ov, residual) = self.project(set, id);
        if residual <= DEPENDENCE_THRESHOLD {
            let predicted = ov.iter().zip(&self.b).map(|(o, b)| o * b).sum();
            return Err(Error::DegenerateQuery { id, predicted });
        }
        let beta = 1.0 / residual.sqrt();
        let b_acc: f64 = ov.iter().zip(&self.b).map(|(o, b)| o * b).sum();
        let c_acc: f64 = ov.iter().zip(&self.c).map(|(o, c)| o * c).sum();
        ov.push(1.0 / beta);
        self.ids.push(id);
        self.responses.push(a);
        self.overlaps.push(ov);
        self.beta.push(beta);
        self.b.push(beta * (a - b_acc));
        self.c.push(a - c_acc);
        self.r.push(c_acc);
        self.delta_u += a * a;
        Ok(self.report())
    }

    pub fn report(&self) -> DeltaReport {
        let delta_f: f64 = self.b.iter().map(|b| b * b).sum();
        let sum_c: f64 = self.c.iter().map(|c| c * c).sum();
        let delta = self.delta_u - delta_f;
        let bound = well_behaved_bound(self.len());
        DeltaReport {
            delta_u: self.delta_u,
            delta_f,
            delta,
            delta_prime: Some(self.delta_u - sum_c),
            likelihood_ratio: (delta / 2.0).exp(),
            well_behaved: self.responses.iter().all(|a| a.abs() <= bound),
        }
    }

    /// The orthonormal vectors `w_j`, formed explicitly.
    pub fn orthonormal_vectors(&self, set: &TestVectorSet) -> Vec<Vec<f64>> {
        let mut w: Vec<Vec<f64>> = Vec::with_capacity(self.len());
        for (i, &id) in self.ids.iter().enumerate() {
            let mut v = set.dense(id);
            for (j, wj) in w.iter().enumerate() {
                let o = self.overlaps[i][j];
                v.iter_mut().zip(wj).for_each(|(x, y)| *x -= o * y);
            }
            v.iter_mut().for_each(|x| *x *= self.beta[i]);
            w.push(v);
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// A uniformly random order over all vectors.
    #[default]
    RandomOrder,
    /// Standard and Hadamard vectors alternately, each family in random order.
    Alternating,
    /// Next vector maximizes the magnitude of its predicted response.
    Greedy,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-order" | "random" => Ok(Strategy::RandomOrder),
            "alternating" => Ok(Strategy::Alternating),
            "greedy" | "likelihood-greedy" => Ok(Strategy::Greedy),
            other => Err(invalid(format!("unknown strategy `{other}`"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::RandomOrder => "random-order",
            Strategy::Alternating => "alternating",
            Strategy::Greedy => "greedy",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistinguisherConfig {
    pub strategy: Strategy,
    pub t: usize,
    pub trials: usize,
    /// Fraction of episodes run in case ii.
    pub case_mix: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub case: Case,
    pub t: usize,
    pub delta_u: f64,
    pub delta_f: f64,
    pub lr: f64,
    pub guess: Case,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub bias: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub accept_given_ii: f64,
    pub accept_given_i: f64,
    pub trials: Vec<TrialRecord>,
}

/// Above this many queries the Forrelation set is scored in one batch.
const BATCH_THRESHOLD: usize = 256;
const GREEDY_WORK_LIMIT: f64 = 2e9;

fn schedule(trial: usize, mix: f64) -> Case {
    let before = (trial as f64 * mix).floor();
    let after = ((trial + 1) as f64 * mix).floor();
    if after > before {
        Case::Ii
    } else {
        Case::I
    }
}

fn order<R: Rng + ?Sized>(set: &TestVectorSet, strategy: Strategy, t: usize, rng: &mut R) -> Vec<usize> {
    match (strategy, &set.family) {
        (Strategy::Alternating, Family::Hadamard { .. }) => {
            let n = set.dim;
            let mut std: Vec<usize> = (0..n).collect();
            let mut had: Vec<usize> = (n..2 * n).collect();
            std.shuffle(rng);
            had.shuffle(rng);
            std.into_iter().zip(had).flat_map(|(a, b)| [a, b]).take(t).collect()
        }
        _ => {
            let mut ids = rand::seq::index::sample(rng, set.len(), t).into_vec();
            ids.shuffle(rng);
            ids
        }
    }
}

/// Outcome of one episode before the decision.
struct Episode {
    delta_u: f64,
    delta_f: f64,
    lr: f64,
}

impl Episode {
    fn from_parts(delta_u: f64, delta_f: f64, redundant: bool, inconsistent: bool) -> Self {
        if inconsistent {
            Self { delta_u, delta_f: f64::INFINITY, lr: 0.0 }
        } else if redundant {
            Self { delta_u, delta_f, lr: f64::INFINITY }
        } else {
            Self { delta_u, delta_f, lr: ((delta_u - delta_f) / 2.0).exp() }
        }
    }
}

fn consistent(a: f64, predicted: f64) -> bool {
    (a - predicted).abs() <= 1e-6 * a.abs().max(1.0)
}

fn sequential<R: Rng + ?Sized>(
    set: &TestVectorSet,
    ids: &[usize],
    oracle: &mut Oracle,
    rng: &mut R,
) -> Result<Episode> {
    let mut tr = Transcript::new();
    let (mut extra, mut redundant, mut inconsistent) = (0.0, false, false);
    for &id in ids {
        let a = oracle.respond(id, rng)?;
        match tr.push(set, id, a) {
            Ok(_) => {}
            Err(Error::DegenerateQuery { predicted, .. }) => {
                extra += a * a;
                redundant = true;
                inconsistent |= !consistent(a, predicted);
            }
            Err(e) => return Err(e),
        }
    }
    let rep = tr.report();
    Ok(Episode::from_parts(rep.delta_u + extra, rep.delta_f, redundant, inconsistent))
}

fn greedy<R: Rng + ?Sized>(set: &TestVectorSet, t: usize, oracle: &mut Oracle, rng: &mut R) -> Result<Episode> {
    let m = set.len();
    if (m as f64) * (t as f64) * (t as f64) > GREEDY_WORK_LIMIT {
        return Err(Error::ResourceGuard(format!("greedy strategy with {m} vectors and t = {t}")));
    }
    // cand[v][j] = <v|w_j>
    let mut cand: Vec<Vec<f64>> = vec![Vec::with_capacity(t); m];
    let mut pred = vec![0.0f64; m];
    let mut used = vec![false; m];
    let mut tr = Transcript::new();
    let (mut extra, mut redundant, mut inconsistent) = (0.0, false, false);
    for _ in 0..t {
        let mut best = None;
        for v in 0..m {
            if !used[v] && best.is_none_or(|b: usize| pred[v].abs() > pred[b].abs()) {
                best = Some(v);
            }
        }
        let id = best.expect("budget checked against set size");
        used[id] = true;
        let a = oracle.respond(id, rng)?;
        match tr.push(set, id, a) {
            Ok(_) => {
                let j = tr.len() - 1;
                let beta = tr.beta[j];
                let c = tr.c[j];
                let row = &tr.overlaps[j];
                for v in 0..m {
                    if used[v] {
                        continue;
                    }
                    let acc: f64 = (0..j).map(|l| row[l] * cand[v][l]).sum();
                    let o = beta * (set.gram(v, id) - acc);
                    cand[v].push(o);
                    pred[v] += o * c;
                }
            }
            Err(Error::DegenerateQuery { predicted, .. }) => {
                extra += a * a;
                redundant = true;
                inconsistent |= !consistent(a, predicted);
            }
            Err(e) => return Err(e),
        }
    }
    let rep = tr.report();
    Ok(Episode::from_parts(rep.delta_u + extra, rep.delta_f, redundant, inconsistent))
}

/// Scores a query set on the plain Forrelation vectors in one shot.
///
/// With `A` the queried standard positions (responses `f`) and `B` the
/// queried Hadamard indices (responses `g`), the minimum-norm `Psi` equals
/// `f` on `A`, and on the complement solves `M u = g - H(f 1_A)` restricted
/// to `B`, where `M` is the Hadamard matrix with rows `B` and columns
/// outside `A`.
fn batch<R: Rng + ?Sized>(set: &TestVectorSet, ids: &[usize], oracle: &mut Oracle, rng: &mut R) -> Result<Episode> {
    let n = set.dim;
    let mut f_on_a = vec![0.0; n];
    let mut in_a = vec![false; n];
    let mut hadamard: Vec<(usize, f64)> = Vec::new();
    let mut delta_u = 0.0;
    for &id in ids {
        let a = oracle.respond(id, rng)?;
        delta_u += a * a;
        if id < n {
            f_on_a[id] = a;
            in_a[id] = true;
        } else {
            hadamard.push((id - n, a));
        }
    }
    let base: f64 = f_on_a.iter().map(|v| v * v).sum();
    if hadamard.is_empty() {
        return Ok(Episode::from_parts(delta_u, base, false, false));
    }
    let mut hf = f_on_a;
    fwht_in_place(&mut hf);
    let d: Vec<f64> = hadamard.iter().map(|&(y, g)| g - hf[y]).collect();
    let free: Vec<usize> = (0..n).filter(|&x| !in_a[x]).collect();
    let scale_d = d.iter().map(|v| v.abs()).fold(1.0, f64::max);

    if free.is_empty() {
        let ok = d.iter().all(|v| v.abs() <= 1e-6 * scale_d);
        return Ok(Episode::from_parts(delta_u, base, true, !ok));
    }
    let s = 1.0 / (n as f64).sqrt();
    let m = DMatrix::from_fn(hadamard.len(), free.len(), |r, c| s * character(hadamard[r].0, free[c]));
    let dv = nalgebra::DVector::from_vec(d);
    let svd = m.svd(true, false);
    let u = svd.u.as_ref().expect("requested");
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = 1e-10 * sigma_max.max(1.0);
    let mut extra = 0.0;
    let mut projected = nalgebra::DVector::zeros(dv.len());
    let mut rank = 0;
    for (k, &sv) in svd.singular_values.iter().enumerate() {
        if sv > tol {
            rank += 1;
            let col = u.column(k);
            let coef = col.dot(&dv);
            extra += coef * coef / (sv * sv);
            projected += col * coef;
        }
    }
    let gap = (&dv - projected).norm();
    let redundant = rank < hadamard.len();
    let inconsistent = gap > 1e-6 * scale_d;
    Ok(Episode::from_parts(delta_u, base + extra, redundant, inconsistent))
}

/// Plays `trials` episodes and reports how often the rule
/// "guess ii iff the likelihood ratio exceeds 1" says ii in each case.
pub fn run_distinguisher<R: Rng + ?Sized>(
    set: &TestVectorSet,
    cfg: &DistinguisherConfig,
    rng: &mut R,
) -> Result<BiasReport> {
    if cfg.t == 0 || cfg.t > set.len() {
        return Err(invalid(format!("budget t = {} outside 1..={}", cfg.t, set.len())));
    }
    if !(0.0..=1.0).contains(&cfg.case_mix) {
        return Err(invalid(format!("case mix {} outside [0, 1]", cfg.case_mix)));
    }
    let use_batch = matches!(&set.family, Family::Hadamard { c: None, .. })
        && cfg.strategy != Strategy::Greedy
        && cfg.t > BATCH_THRESHOLD;

    let mut records = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let case = schedule(trial, cfg.case_mix);
        let mut oracle = Oracle::new(set, case, rng);
        let episode = if cfg.strategy == Strategy::Greedy {
            greedy(set, cfg.t, &mut oracle, rng)?
        } else {
            let ids = order(set, cfg.strategy, cfg.t, rng);
            if use_batch {
                batch(set, &ids, &mut oracle, rng)?
            } else {
                sequential(set, &ids, &mut oracle, rng)?
            }
        };
        let guess = if episode.lr > 1.0 { Case::Ii } else { Case::I };
        records.push(TrialRecord {
            trial,
            case,
            t: cfg.t,
            delta_u: episode.delta_u,
            delta_f: episode.delta_f,
            lr: episode.lr,
            guess,
        });
    }

    let rate = |case: Case| {
        let (hits, total) = records
            .iter()
            .filter(|r| r.case == case)
            .fold((0usize, 0usize), |(h, t), r| (h + usize::from(r.guess == Case::Ii), t + 1));
        (if total == 0 { 0.0 } else { hits as f64 / total as f64 }, total)
    };
    let (p_ii, n_ii) = rate(Case::Ii);
    let (p_i, n_i) = rate(Case::I);
    let bias = (p_ii - p_i).abs();
    let var = |p: f64, n: usize| if n == 0 { 0.0 } else { p * (1.0 - p) / n as f64 };
    let half = 1.96 * (var(p_ii, n_ii) + var(p_i, n_i)).sqrt();
    Ok(BiasReport {
        bias,
        ci_low: (bias - half).max(0.0),
        ci_high: (bias + half).min(1.0),
        accept_given_ii: p_ii,
        accept_given_i: p_i,
        trials: records,
    })
}

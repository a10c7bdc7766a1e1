//! Truth tables, real functions and the instance distributions: uniform and
//! forrelated pairs, sign rounding, k-fold hybrids, corruption, and the
//! goodness diagnostics for Boolean tuples.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hadamard::{fwht_in_place, log2_len};
use crate::phi;

/// Boolean function `{0,1}^n -> {-1,+1}` stored densely.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTable<i8>", into = "RawTable<i8>")]
pub struct TruthTable {
    n: u32,
    values: Vec<i8>,
}

#[derive(Serialize, Deserialize)]
struct RawTable<T> {
    n: u32,
    values: Vec<T>,
}

impl TryFrom<RawTable<i8>> for TruthTable {
    type Error = Error;
    fn try_from(raw: RawTable<i8>) -> Result<Self> {
        TruthTable::new(raw.n, raw.values)
    }
}

impl From<TruthTable> for RawTable<i8> {
    fn from(t: TruthTable) -> Self {
        RawTable { n: t.n, values: t.values }
    }
}

impl TruthTable {
    pub fn new(n: u32, values: Vec<i8>) -> Result<Self> {
        if values.len() != 1usize << n {
            return Err(Error::LengthMismatch { expected: 1 << n, got: values.len() });
        }
        if let Some(i) = values.iter().position(|&v| v != 1 && v != -1) {
            return Err(invalid(format!("truth table entry {i} is {}", values[i])));
        }
        Ok(Self { n, values })
    }

    pub fn from_fn(n: u32, mut f: impl FnMut(usize) -> bool) -> Self {
        let values = (0..1usize << n).map(|x| if f(x) { -1 } else { 1 }).collect();
        Self { n, values }
    }

    pub fn constant(n: u32, value: i8) -> Self {
        assert!(value == 1 || value == -1);
        Self { n, values: vec![value; 1 << n] }
    }

    /// `x -> (-1)^(x.s)`.
    pub fn character(n: u32, s: usize) -> Self {
        Self::from_fn(n, |x| (x & s).count_ones() % 2 == 1)
    }

    pub fn random<R: Rng + ?Sized>(n: u32, rng: &mut R) -> Self {
        let values = (0..1usize << n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        Self { n, values }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, x: usize) -> i8 {
        self.values[x]
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }
}

/// Real function `{0,1}^n -> R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable<f64>", into = "RawTable<f64>")]
pub struct RealFunction {
    n: u32,
    values: Vec<f64>,
}

impl TryFrom<RawTable<f64>> for RealFunction {
    type Error = Error;
    fn try_from(raw: RawTable<f64>) -> Result<Self> {
        RealFunction::new(raw.n, raw.values)
    }
}

impl From<RealFunction> for RawTable<f64> {
    fn from(f: RealFunction) -> Self {
        RawTable { n: f.n, values: f.values }
    }
}

impl RealFunction {
    pub fn new(n: u32, values: Vec<f64>) -> Result<Self> {
        if values.len() != 1usize << n {
            return Err(Error::LengthMismatch { expected: 1 << n, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("real function has a non-finite entry"));
        }
        Ok(Self { n, values })
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        let n = log2_len(values.len())?;
        Self::new(n, values)
    }

    pub fn gaussian<R: Rng + ?Sized>(n: u32, rng: &mut R) -> Self {
        let values = (0..1usize << n).map(|_| rng.sample(StandardNormal)).collect();
        Self { n, values }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// One oracle of a tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Function {
    Boolean(TruthTable),
    Real(RealFunction),
}

impl Function {
    pub fn n(&self) -> u32 {
        match self {
            Function::Boolean(t) => t.n,
            Function::Real(f) => f.n,
        }
    }

    pub fn len(&self) -> usize {
        1 << self.n()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, x: usize) -> f64 {
        match self {
            Function::Boolean(t) => t.values[x] as f64,
            Function::Real(f) => f.values[x],
        }
    }

    pub fn as_boolean(&self) -> Option<&TruthTable> {
        match self {
            Function::Boolean(t) => Some(t),
            Function::Real(_) => None,
        }
    }

    /// `v[x] *= f(x)`.
    pub(crate) fn multiply_into(&self, v: &mut [f64]) {
        match self {
            Function::Boolean(t) => v.iter_mut().zip(&t.values).for_each(|(a, &s)| {
                if s < 0 {
                    *a = -*a
                }
            }),
            Function::Real(f) => v.iter_mut().zip(&f.values).for_each(|(a, b)| *a *= b),
        }
    }
}

impl From<TruthTable> for Function {
    fn from(t: TruthTable) -> Self {
        Function::Boolean(t)
    }
}

impl From<RealFunction> for Function {
    fn from(f: RealFunction) -> Self {
        Function::Real(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Uniform,
    Forrelated,
}

impl FromStr for Measure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Measure::Uniform),
            "forrelated" => Ok(Measure::Forrelated),
            other => Err(invalid(format!("unknown measure `{other}`"))),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Uniform => "uniform",
            Measure::Forrelated => "forrelated",
        })
    }
}

/// An ordered tuple `f_1, ..., f_k` sharing one input length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTuple", into = "RawTuple")]
pub struct InstanceTuple {
    functions: Vec<Function>,
    label: Option<Measure>,
}

#[derive(Serialize, Deserialize)]
struct RawTuple {
    k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<Measure>,
    functions: Vec<Function>,
}

impl TryFrom<RawTuple> for InstanceTuple {
    type Error = Error;
    fn try_from(raw: RawTuple) -> Result<Self> {
        if raw.k != raw.functions.len() {
            return Err(invalid(format!("k = {} but {} functions given", raw.k, raw.functions.len())));
        }
        InstanceTuple::new(raw.functions, raw.label)
    }
}

impl From<InstanceTuple> for RawTuple {
    fn from(t: InstanceTuple) -> Self {
        RawTuple { k: t.functions.len(), label: t.label, functions: t.functions }
    }
}

impl InstanceTuple {
    pub fn new(functions: Vec<Function>, label: Option<Measure>) -> Result<Self> {
        let Some(first) = functions.first() else {
            return Err(invalid("a tuple needs at least one function"));
        };
        let n = first.n();
        if let Some(f) = functions.iter().find(|f| f.n() != n) {
            return Err(Error::LengthMismatch { expected: 1 << n, got: f.len() });
        }
        Ok(Self { functions, label })
    }

    pub fn boolean(tables: Vec<TruthTable>) -> Result<Self> {
        Self::new(tables.into_iter().map(Function::Boolean).collect(), None)
    }

    pub fn k(&self) -> usize {
        self.functions.len()
    }

    pub fn n(&self) -> u32 {
        self.functions[0].n()
    }

    pub fn functions(&self) -> &[Function] {
        &self.functions
    }

    pub fn label(&self) -> Option<Measure> {
        self.label
    }

    pub fn is_boolean(&self) -> bool {
        self.functions.iter().all(|f| f.as_boolean().is_some())
    }

    /// The tables of an all-Boolean tuple.
    pub fn tables(&self) -> Result<Vec<&TruthTable>> {
        self.functions
            .iter()
            .map(|f| f.as_boolean().ok_or_else(|| invalid("tuple contains a real-valued function")))
            .collect()
    }
}

/// `N(0,1)` pair, either independent or with `g = H f`.
pub fn sample_real_pair<R: Rng + ?Sized>(n: u32, measure: Measure, rng: &mut R) -> Result<InstanceTuple> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let f = RealFunction::gaussian(n, rng);
    let g = match measure {
        Measure::Uniform => RealFunction::gaussian(n, rng),
        Measure::Forrelated => {
            let mut g = f.values.clone();
            fwht_in_place(&mut g);
            RealFunction { n, values: g }
        }
    };
    InstanceTuple::new(vec![f.into(), g.into()], Some(measure))
}

/// Entrywise sign with `sign(0) = +1`.
pub fn sign_round(f: &RealFunction) -> TruthTable {
    TruthTable { n: f.n, values: f.values.iter().map(|&v| if v < 0.0 { -1 } else { 1 }).collect() }
}

/// Rounds every function of a tuple; Boolean entries pass through.
pub fn sign_round_tuple(t: &InstanceTuple) -> InstanceTuple {
    let functions = t
        .functions
        .iter()
        .map(|f| match f {
            Function::Boolean(b) => Function::Boolean(b.clone()),
            Function::Real(r) => Function::Boolean(sign_round(r)),
        })
        .collect();
    InstanceTuple { functions, label: t.label }
}

/// `c_x` with `sum c_x^2 = N`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierVector {
    n: u32,
    values: Vec<f64>,
}

impl MultiplierVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = log2_len(values.len())?;
        let total: f64 = values.iter().map(|c| c * c).sum();
        let len = values.len() as f64;
        if (total - len).abs() > 1e-9 * len {
            return Err(Error::Precondition(format!("sum of squares is {total}, expected {len}")));
        }
        Ok(Self { n, values })
    }

    /// All ones; the multipliers of an empty prefix.
    pub fn ones(n: u32) -> Self {
        Self { n, values: vec![1.0; 1 << n] }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `sqrt(N)` times the final state of the k-fold circuit on `prefix`.
pub fn multipliers(prefix: &[TruthTable]) -> Result<MultiplierVector> {
    if prefix.is_empty() {
        return Err(invalid("multipliers need k >= 3, i.e. a non-empty prefix"));
    }
    let functions: Vec<Function> = prefix.iter().cloned().map(Function::Boolean).collect();
    let tuple = InstanceTuple::new(functions, None)?;
    let mut state = phi::final_state(&tuple);
    let scale = (state.len() as f64).sqrt();
    state.iter_mut().for_each(|a| *a *= scale);
    Ok(MultiplierVector { n: tuple.n(), values: state })
}

/// Uniform Boolean prefix followed by a Gaussian pair, where the forrelated
/// case sets `f_k = H(c . f_{k-1})`.
pub fn sample_kfold_hybrid<R: Rng + ?Sized>(
    n: u32,
    k: usize,
    measure: Measure,
    rng: &mut R,
) -> Result<InstanceTuple> {
    if k < 2 {
        return Err(invalid("hybrids need k >= 2"));
    }
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let prefix: Vec<TruthTable> = (0..k - 2).map(|_| TruthTable::random(n, rng)).collect();
    let c = if prefix.is_empty() { MultiplierVector::ones(n) } else { multipliers(&prefix)? };
    let f = RealFunction::gaussian(n, rng);
    let g = match measure {
        Measure::Uniform => RealFunction::gaussian(n, rng),
        Measure::Forrelated => {
            let mut g: Vec<f64> = f.values.iter().zip(&c.values).map(|(a, b)| a * b).collect();
            fwht_in_place(&mut g);
            RealFunction { n, values: g }
        }
    };
    let mut functions: Vec<Function> = prefix.into_iter().map(Function::Boolean).collect();
    functions.push(f.into());
    functions.push(g.into());
    InstanceTuple::new(functions, Some(measure))
}

/// Number of re-randomized positions per function, `round(eps * 2^n)`.
pub fn corruption_count(n: u32, eps: f64) -> usize {
    (eps * (1u64 << n) as f64).round() as usize
}

/// Re-randomizes `round(eps 2^n)` uniformly chosen positions of every table.
pub fn corrupt<R: Rng + ?Sized>(t: &InstanceTuple, eps: f64, rng: &mut R) -> Result<InstanceTuple> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(invalid(format!("eps = {eps} is outside [0, 1]")));
    }
    let count = corruption_count(t.n(), eps);
    let functions = t
        .tables()?
        .into_iter()
        .map(|table| {
            let mut values = table.values.clone();
            for x in index::sample(rng, values.len(), count) {
                values[x] = if rng.random::<bool>() { 1 } else { -1 };
            }
            Function::Boolean(TruthTable { n: table.n, values })
        })
        .collect();
    Ok(InstanceTuple { functions, label: t.label })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodnessConfig {
    /// Constant in the tail bound `C_k / t^(t/2)`.
    pub tail_constant: f64,
}

impl Default for GoodnessConfig {
    fn default() -> Self {
        Self { tail_constant: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    /// Prefix length `i`.
    pub prefix: usize,
    pub t: usize,
    pub fraction: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodnessReport {
    /// `max_{i,x} |Phi^{(x)}_{f_1..f_i}| * sqrt(N)`.
    pub max_partial: f64,
    pub partial_ok: bool,
    pub tails: Vec<TailRow>,
    pub tails_ok: bool,
    /// `max_{i, y != 0} |sum_{z.y = 0} (Phi^{(z)})^2 - 1/2|`.
    pub balance_deviation: f64,
    pub balance_ok: bool,
    pub good: bool,
}

/// Concentration diagnostics over every prefix of a Boolean tuple.
///
/// Logarithms are base 2; the balance check runs over `y != 0`, since the
/// `y = 0` half-space is the whole cube.
pub fn check_goodness(t: &InstanceTuple, cfg: &GoodnessConfig) -> Result<GoodnessReport> {
    t.tables()?;
    let len = 1usize << t.n();
    let sqrt_n = (len as f64).sqrt();
    let log_n = (t.n() as f64).max(1.0);
    let states = phi::prefix_states(t);

    let mut max_partial = 0.0f64;
    let mut tails = Vec::new();
    let mut balance_deviation = 0.0f64;
    for (i, state) in states.iter().enumerate() {
        for &a in state {
            max_partial = max_partial.max(a.abs() * sqrt_n);
        }
        for tt in 1..=t.n().max(1) as usize {
            let threshold = tt as f64 / sqrt_n;
            let hits = state.iter().filter(|a| a.abs() >= threshold).count();
            tails.push(TailRow {
                prefix: i + 1,
                t: tt,
                fraction: hits as f64 / len as f64,
                bound: cfg.tail_constant / (tt as f64).powf(tt as f64 / 2.0),
            });
        }
        let mut squares: Vec<f64> = state.iter().map(|a| a * a).collect();
        // sum_{z.y=0} a_z^2 = (total + (H_raw a^2)[y]) / 2
        let total: f64 = squares.iter().sum();
        crate::hadamard::fwht_raw_in_place(&mut squares);
        for &s in &squares[1..] {
            balance_deviation = balance_deviation.max(((total + s) / 2.0 - 0.5).abs());
        }
    }
    let partial_ok = max_partial <= log_n;
    let tails_ok = tails.iter().all(|r| r.fraction <= r.bound);
    let balance_ok = balance_deviation <= log_n.powf(2.5) / sqrt_n;
    Ok(GoodnessReport {
        max_partial,
        partial_ok,
        tails,
        tails_ok,
        balance_deviation,
        balance_ok,
        good: partial_ok && tails_ok && balance_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sign_examples() {
        let f = RealFunction::new(2, vec![0.3, -1.2, 2.0, -0.1]).unwrap();
        assert_eq!(sign_round(&f).values(), &[1, -1, 1, -1]);
        let z = RealFunction::new(1, vec![0.0, -0.0]).unwrap();
        assert_eq!(sign_round(&z).values(), &[1, 1]);
    }

    #[test]
    fn table_validation() {
        assert!(TruthTable::new(1, vec![1, 0]).is_err());
        assert!(TruthTable::new(2, vec![1, 1]).is_err());
        let json = r#"{"n":1,"values":[1,-1]}"#;
        let t: TruthTable = serde_json::from_str(json).unwrap();
        assert_eq!(serde_json::to_string(&t).unwrap(), json);
        assert!(serde_json::from_str::<TruthTable>(r#"{"n":1,"values":[1,2]}"#).is_err());
    }

    #[test]
    fn tuple_json_keeps_kinds() {
        let t = InstanceTuple::new(
            vec![TruthTable::constant(1, 1).into(), RealFunction::new(1, vec![0.5, -2.0]).unwrap().into()],
            Some(Measure::Uniform),
        )
        .unwrap();
        let s = serde_json::to_string(&t).unwrap();
        let back: InstanceTuple = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        assert!(back.functions()[0].as_boolean().is_some());
        assert!(back.functions()[1].as_boolean().is_none());
    }

    #[test]
    fn mismatched_n_rejected() {
        let r = InstanceTuple::boolean(vec![TruthTable::constant(1, 1), TruthTable::constant(2, 1)]);
        assert!(matches!(r, Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn multipliers_of_constant_prefix() {
        let c = multipliers(&[TruthTable::constant(2, 1)]).unwrap();
        assert_eq!(c.values(), &[2.0, 0.0, 0.0, 0.0]);
        assert!(multipliers(&[]).is_err());
    }

    #[test]
    fn corruption_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = InstanceTuple::boolean(vec![TruthTable::random(4, &mut rng), TruthTable::random(4, &mut rng)])
            .unwrap();
        assert_eq!(corrupt(&t, 0.0, &mut rng).unwrap(), t);
        assert!(corrupt(&t, 1.5, &mut rng).is_err());
        assert_eq!(corruption_count(8, 0.1), 26);
    }

    #[test]
    fn constant_pair_goodness() {
        let t = InstanceTuple::boolean(vec![TruthTable::constant(2, 1), TruthTable::constant(2, 1)]).unwrap();
        let r = check_goodness(&t, &GoodnessConfig::default()).unwrap();
        // first prefix is |0>, so sqrt(N) * 1 = 2 and every half-space holds all the mass
        assert!((r.max_partial - 2.0).abs() < 1e-12);
        assert!((r.balance_deviation - 0.5).abs() < 1e-12);
        // at N = 4 the thresholds log N and log^2.5 N / sqrt N are too loose to reject
        assert!(r.partial_ok && r.balance_ok);
    }
}

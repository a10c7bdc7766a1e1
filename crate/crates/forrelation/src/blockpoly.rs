//! Block-multilinear polynomials: every monomial takes exactly one variable
//! from each of `k` blocks.
//!
//! Besides evaluation and the `Lambda_S` statistic this module implements
//! variable splitting, the balancing pass that drives every `Lambda_S`
//! below a target, and extraction of the degree-`2t` polynomial whose
//! diagonal is the acceptance probability of a `t`-query algorithm.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance for the sampled boundedness audit.
pub const BOUND_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoly", into = "RawPoly")]
pub struct BlockMultilinearPoly {
    block_sizes: Vec<usize>,
    terms: BTreeMap<Vec<usize>, f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTerm {
    idx: Vec<usize>,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPoly {
    k: usize,
    block_sizes: Vec<usize>,
    terms: Vec<RawTerm>,
}

impl TryFrom<RawPoly> for BlockMultilinearPoly {
    type Error = Error;
    fn try_from(raw: RawPoly) -> Result<Self> {
        if raw.k != raw.block_sizes.len() {
            return Err(invalid(format!("k = {} but {} block sizes", raw.k, raw.block_sizes.len())));
        }
        BlockMultilinearPoly::from_terms(raw.block_sizes, raw.terms.into_iter().map(|t| (t.idx, t.c)))
    }
}

impl From<BlockMultilinearPoly> for RawPoly {
    fn from(p: BlockMultilinearPoly) -> Self {
        RawPoly {
            k: p.k(),
            terms: p.terms.into_iter().map(|(idx, c)| RawTerm { idx, c }).collect(),
            block_sizes: p.block_sizes,
        }
    }
}

/// Iterates over the nonempty block subsets of `[k]` as sorted index lists.
pub fn nonempty_subsets(k: usize) -> impl Iterator<Item = Vec<usize>> {
    (1u64..1 << k).map(move |mask| (0..k).filter(|j| mask >> j & 1 == 1).collect())
}

impl BlockMultilinearPoly {
    pub fn zero(block_sizes: Vec<usize>) -> Result<Self> {
        if block_sizes.is_empty() {
            return Err(invalid("a block polynomial needs at least one block"));
        }
        Ok(Self { block_sizes, terms: BTreeMap::new() })
    }

    pub fn from_terms(
        block_sizes: Vec<usize>,
        terms: impl IntoIterator<Item = (Vec<usize>, f64)>,
    ) -> Result<Self> {
        let mut p = Self::zero(block_sizes)?;
        for (idx, c) in terms {
            p.add_term(idx, c)?;
        }
        Ok(p)
    }

    /// Adds `c` to the coefficient of `idx`; exact zeros are dropped.
    pub fn add_term(&mut self, idx: Vec<usize>, c: f64) -> Result<()> {
        self.check_index(&idx)?;
        if !c.is_finite() {
            return Err(invalid("coefficient is not finite"));
        }
        match self.terms.entry(idx) {
            Entry::Occupied(mut e) => {
                let v = *e.get() + c;
                if v == 0.0 {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
            Entry::Vacant(e) => {
                if c != 0.0 {
                    e.insert(c);
                }
            }
        }
        Ok(())
    }

    fn check_index(&self, idx: &[usize]) -> Result<()> {
        if idx.len() != self.k() {
            return Err(invalid(format!("index has {} entries, expected {}", idx.len(), self.k())));
        }
        if let Some(j) = (0..self.k()).find(|&j| idx[j] >= self.block_sizes[j]) {
            return Err(invalid(format!("index {} out of range for block {j} of size {}", idx[j], self.block_sizes[j])));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.terms.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, idx: &[usize]) -> f64 {
        self.terms.get(idx).copied().unwrap_or(0.0)
    }

    fn check_assignment<T>(&self, assignment: &[Vec<T>]) -> Result<()> {
        if assignment.len() != self.k() {
            return Err(Error::LengthMismatch { expected: self.k(), got: assignment.len() });
        }
        for (a, &size) in assignment.iter().zip(&self.block_sizes) {
            if a.len() != size {
                return Err(Error::LengthMismatch { expected: size, got: a.len() });
            }
        }
        Ok(())
    }

    /// `sum_I a_I prod_j x_{j, I_j}`.
    pub fn evaluate(&self, assignment: &[Vec<f64>]) -> Result<f64> {
        self.check_assignment(assignment)?;
        Ok(self.eval_unchecked(|j, i| assignment[j][i]))
    }

    pub(crate) fn eval_unchecked(&self, value: impl Fn(usize, usize) -> f64) -> f64 {
        self.terms
            .iter()
            .map(|(idx, c)| idx.iter().enumerate().fold(*c, |acc, (j, &i)| acc * value(j, i)))
            .sum()
    }

    /// Coefficients summed over the blocks outside `subset`, keyed by the
    /// indices of the blocks in `subset`.
    pub fn marginal(&self, subset: &[usize]) -> Result<BTreeMap<Vec<usize>, f64>> {
        self.check_subset(subset)?;
        let mut out = BTreeMap::new();
        for (idx, c) in &self.terms {
            let key: Vec<usize> = subset.iter().map(|&j| idx[j]).collect();
            *out.entry(key).or_insert(0.0) += c;
        }
        Ok(out)
    }

    fn check_subset(&self, subset: &[usize]) -> Result<()> {
        if subset.is_empty() {
            return Err(invalid("block subset must be nonempty"));
        }
        if subset.windows(2).any(|w| w[0] >= w[1]) || subset.iter().any(|&j| j >= self.k()) {
            return Err(invalid(format!("{subset:?} is not a sorted subset of 0..{}", self.k())));
        }
        Ok(())
    }

    /// `Lambda_S`: the squared norm of the marginal over `subset`.
    pub fn lambda(&self, subset: &[usize]) -> Result<f64> {
        Ok(self.marginal(subset)?.values().map(|a| a * a).sum())
    }

    /// Replaces `x_{block,index}` by the mean of `m` fresh variables. The
    /// first copy keeps `index`; the others are appended to the block, and
    /// their indices are returned.
    pub fn split_variable(&self, block: usize, index: usize, m: usize) -> Result<(Self, Vec<usize>)> {
        if m == 0 {
            return Err(invalid("split count must be at least 1"));
        }
        if block >= self.k() || index >= self.block_sizes[block] {
            return Err(invalid(format!("variable ({block}, {index}) does not exist")));
        }
        let start = self.block_sizes[block];
        let fresh: Vec<usize> = (start..start + m - 1).collect();
        let mut block_sizes = self.block_sizes.clone();
        block_sizes[block] += m - 1;
        let mut terms = BTreeMap::new();
        for (idx, &c) in &self.terms {
            if idx[block] != index {
                terms.insert(idx.clone(), c);
                continue;
            }
            let share = c / m as f64;
            for target in std::iter::once(index).chain(fresh.iter().copied()) {
                let mut key = idx.clone();
                key[block] = target;
                terms.insert(key, share);
            }
        }
        Ok((Self { block_sizes, terms }, fresh))
    }

    /// Pads every block with unused variables up to the largest block.
    pub fn pad_blocks(&self) -> Self {
        let n = self.block_sizes.iter().copied().max().unwrap_or(0);
        Self { block_sizes: vec![n; self.k()], terms: self.terms.clone() }
    }

    /// Checks `|p| <= 1` on `samples` random sign assignments and on the
    /// all-ones point; an escape is a precondition violation.
    pub fn audit_bounded(&self, samples: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in 0..=samples {
            let point: Vec<Vec<f64>> = self
                .block_sizes
                .iter()
                .map(|&len| {
                    (0..len).map(|_| if s == 0 || rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
                })
                .collect();
            let v = self.eval_unchecked(|j, i| point[j][i]);
            if v.abs() > 1.0 + BOUND_TOLERANCE {
                return Err(Error::Precondition(format!("polynomial takes value {v} on a sign assignment")));
            }
        }
        Ok(())
    }
}

/// A random bounded polynomial: a convex combination of products of
/// L1-normalized linear forms, one form per block, with supports of at most
/// `max_support` variables.
pub fn random_bounded<R: Rng + ?Sized>(k: usize, n: usize, max_support: usize, rng: &mut R) -> BlockMultilinearPoly {
    assert!(k > 0 && n > 0 && max_support > 0, "empty shape");
    let pieces = rng.random_range(1..=4);
    let weights: Vec<f64> = (0..pieces).map(|_| -rng.random::<f64>().ln()).collect();
    let total: f64 = weights.iter().sum();
    let mut terms: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for w in weights {
        let forms: Vec<Vec<(usize, f64)>> = (0..k)
            .map(|_| {
                let s = rng.random_range(1..=max_support.min(n));
                let idx = rand::seq::index::sample(rng, n, s).into_vec();
                let c: Vec<f64> = idx.iter().map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let l1: f64 = c.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
                idx.into_iter().zip(c).map(|(i, v)| (i, v / l1)).collect()
            })
            .collect();
        let mut partial: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), w / total)];
        for form in &forms {
            partial = partial
                .iter()
                .flat_map(|(idx, a)| {
                    form.iter().map(move |&(i, c)| {
                        let mut idx = idx.clone();
                        idx.push(i);
                        (idx, a * c)
                    })
                })
                .collect();
        }
        for (idx, a) in partial {
            *terms.entry(idx).or_insert(0.0) += a;
        }
    }
    terms.retain(|_, a| *a != 0.0);
    BlockMultilinearPoly { block_sizes: vec![n; k], terms }
}

/// Maps every variable of a split polynomial back to the variable it was
/// split from; `None` marks padding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitTrace {
    pub origin: Vec<Vec<Option<usize>>>,
}

/// A balanced polynomial held implicitly: the original coefficient table and
/// the number of copies of every original variable. All copies of a variable
/// carry the same coefficients, so a monomial of copies has coefficient
/// `a_I / prod_j copies[j][I_j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Balanced {
    base: BlockMultilinearPoly,
    copies: Vec<Vec<usize>>,
    delta: f64,
}

impl Balanced {
    /// Wraps `p` without any splitting.
    pub fn unsplit(p: BlockMultilinearPoly, delta: f64) -> Self {
        let copies = p.block_sizes.iter().map(|&s| vec![1; s]).collect();
        Self { base: p, copies, delta }
    }

    pub fn base(&self) -> &BlockMultilinearPoly {
        &self.base
    }

    pub fn copies(&self) -> &[Vec<usize>] {
        &self.copies
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn k(&self) -> usize {
        self.base.k()
    }

    /// Variables per block after splitting.
    pub fn split_block_sizes(&self) -> Vec<usize> {
        self.copies.iter().map(|c| c.iter().sum()).collect()
    }

    /// Common block size after padding.
    pub fn block_size(&self) -> usize {
        self.split_block_sizes().into_iter().max().unwrap_or(0)
    }

    pub fn new_variables(&self) -> usize {
        self.copies.iter().flatten().map(|c| c - 1).sum()
    }

    /// `Lambda_S` of the split polynomial.
    pub fn lambda(&self, subset: &[usize]) -> Result<f64> {
        let marginal = self.base.marginal(subset)?;
        Ok(marginal
            .iter()
            .map(|(key, a)| {
                let weight: f64 = subset.iter().zip(key).map(|(&j, &i)| self.copies[j][i] as f64).product();
                a * a / weight
            })
            .sum())
    }

    /// `Lambda_S` for every nonempty `S`, in subset-mask order.
    pub fn lambdas(&self) -> Vec<(Vec<usize>, f64)> {
        nonempty_subsets(self.k())
            .map(|s| {
                let l = self.lambda(&s).expect("subsets are valid");
                (s, l)
            })
            .collect()
    }

    /// Checks `Lambda_S <= delta (1 + 1e-9)` for every `S`.
    pub fn audit(&self) -> Result<()> {
        for (s, l) in self.lambdas() {
            if l > self.delta * (1.0 + 1e-9) {
                return Err(Error::Precondition(format!("Lambda_{s:?} = {l} exceeds delta = {}", self.delta)));
            }
        }
        Ok(())
    }

    /// Writes the split polynomial out explicitly, padded to a common block
    /// size. Copies of original variable `i` occupy a contiguous range.
    pub fn materialize(&self, max_terms: usize) -> Result<(BlockMultilinearPoly, SplitTrace)> {
        let k = self.k();
        let total: f64 = self
            .base
            .terms
            .keys()
            .map(|idx| idx.iter().enumerate().map(|(j, &i)| self.copies[j][i] as f64).product::<f64>())
            .sum();
        if total > max_terms as f64 {
            return Err(Error::ResourceGuard(format!("split polynomial has {total} terms")));
        }
        let n = self.block_size();
        let mut offsets = Vec::with_capacity(k);
        let mut origin = Vec::with_capacity(k);
        for copies in &self.copies {
            let mut off = Vec::with_capacity(copies.len());
            let mut org = Vec::with_capacity(n);
            for (i, &c) in copies.iter().enumerate() {
                off.push(org.len());
                org.extend(std::iter::repeat_n(Some(i), c));
            }
            org.resize(n, None);
            offsets.push(off);
            origin.push(org);
        }
        let mut terms = BTreeMap::new();
        for (idx, &a) in &self.base.terms {
            let counts: Vec<usize> = idx.iter().enumerate().map(|(j, &i)| self.copies[j][i]).collect();
            let coef = a / counts.iter().map(|&c| c as f64).product::<f64>();
            let mut digits = vec![0usize; k];
            loop {
                let key: Vec<usize> = (0..k).map(|j| offsets[j][idx[j]] + digits[j]).collect();
                terms.insert(key, coef);
                let mut j = 0;
                while j < k {
                    digits[j] += 1;
                    if digits[j] < counts[j] {
                        break;
                    }
                    digits[j] = 0;
                    j += 1;
                }
                if j == k {
                    break;
                }
            }
        }
        Ok((BlockMultilinearPoly { block_sizes: vec![n; k], terms }, SplitTrace { origin }))
    }
}

/// Splits variables until `Lambda_S <= delta` for every nonempty `S`.
///
/// Subsets are visited in mask order. For a subset over its target, the
/// lowest block `j` of `S` is split: with `V_i` the squared marginal mass
/// through one copy of variable `i` and `T = sum_copies sqrt(V_i)`, each copy
/// becomes `floor(sqrt(V_i) max(T, 1) / delta) + 1` copies. When `T <= 1`
/// this is the textbook count; the `max` keeps the single pass sufficient
/// when the marginal is not normalized.
pub fn balance(p: &BlockMultilinearPoly, delta: f64) -> Result<Balanced> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!("delta = {delta} must be positive")));
    }
    p.audit_bounded(256, 0x5eed)?;
    let mut out = Balanced::unsplit(p.clone(), delta);
    for subset in nonempty_subsets(p.k()) {
        for _ in 0..4 {
            if out.lambda(&subset)? <= delta {
                break;
            }
            split_pass(&mut out, &subset)?;
        }
    }
    Ok(out)
}

fn split_pass(b: &mut Balanced, subset: &[usize]) -> Result<()> {
    let j = subset[0];
    let marginal = b.base.marginal(subset)?;
    let mut v = vec![0.0; b.copies[j].len()];
    for (key, a) in &marginal {
        let others: f64 = subset[1..].iter().zip(&key[1..]).map(|(&jj, &i)| b.copies[jj][i] as f64).product();
        v[key[0]] += a * a / others;
    }
    for (i, vi) in v.iter_mut().enumerate() {
        let c = b.copies[j][i] as f64;
        *vi /= c * c;
    }
    let t: f64 = v.iter().zip(&b.copies[j]).map(|(vi, &c)| c as f64 * vi.sqrt()).sum();
    let factor = t.max(1.0);
    for (i, vi) in v.iter().enumerate() {
        let m = (vi.sqrt() * factor / b.delta).floor();
        if m >= 1.0 {
            if m > 1e9 {
                return Err(Error::ResourceGuard(format!("splitting into {m} copies")));
            }
            b.copies[j][i] *= m as usize + 1;
        }
    }
    Ok(())
}

/// A `t`-query algorithm on real amplitudes: `U_t Q ... Q U_0 |0>`, where
/// the query `Q` multiplies the amplitude of basis state `s` by
/// `x_{query_map[s]}`. Index 0 of the query map is a dummy variable fixed
/// to 1; indices `1..=input_len` address the input.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryAlgorithm {
    n_qubits: u32,
    input_len: usize,
    unitaries: Vec<DMatrix<f64>>,
    accepting: Vec<usize>,
    query_map: Vec<usize>,
}

impl QueryAlgorithm {
    pub fn new(
        n_qubits: u32,
        input_len: usize,
        unitaries: Vec<DMatrix<f64>>,
        accepting: Vec<usize>,
        query_map: Vec<usize>,
    ) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if unitaries.is_empty() {
            return Err(invalid("an algorithm needs at least one unitary"));
        }
        for (i, u) in unitaries.iter().enumerate() {
            if u.nrows() != dim || u.ncols() != dim {
                return Err(invalid(format!("unitary {i} is {}x{}, expected {dim}x{dim}", u.nrows(), u.ncols())));
            }
            let defect = (u.transpose() * u - DMatrix::identity(dim, dim)).abs().max();
            if defect > 1e-10 {
                return Err(invalid(format!("unitary {i} is not orthogonal (defect {defect:e})")));
            }
        }
        if query_map.len() != dim {
            return Err(Error::LengthMismatch { expected: dim, got: query_map.len() });
        }
        if let Some(q) = query_map.iter().find(|&&q| q > input_len) {
            return Err(invalid(format!("query index {q} exceeds input length {input_len}")));
        }
        if let Some(a) = accepting.iter().find(|&&a| a >= dim) {
            return Err(invalid(format!("accepting state {a} out of range")));
        }
        Ok(Self { n_qubits, input_len, unitaries, accepting, query_map })
    }

    /// `H^n`, query with `s -> x_{s+1}`, `H^n`, accept on `|0>`; the
    /// acceptance probability is the squared mean of `x`.
    pub fn hadamard_mean(n_qubits: u32) -> Self {
        let dim = 1usize << n_qubits;
        let scale = 1.0 / (dim as f64).sqrt();
        let h = DMatrix::from_fn(dim, dim, |r, c| scale * crate::hadamard::character(r, c));
        Self::new(n_qubits, dim, vec![h.clone(), h], vec![0], (1..=dim).collect()).expect("valid by construction")
    }

    /// Haar-like random orthogonal unitaries, query map `s -> s mod (N+1)`,
    /// accepting the lower half of the basis.
    pub fn random<R: Rng + ?Sized>(n_qubits: u32, input_len: usize, t: usize, rng: &mut R) -> Self {
        let dim = 1usize << n_qubits;
        let unitaries = (0..=t).map(|_| random_orthogonal(dim, rng)).collect();
        let query_map = (0..dim).map(|s| s % (input_len + 1)).collect();
        let accepting = (0..dim.div_ceil(2)).collect();
        Self::new(n_qubits, input_len, unitaries, accepting, query_map).expect("valid by construction")
    }

    pub fn n_qubits(&self) -> u32 {
        self.n_qubits
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn queries(&self) -> usize {
        self.unitaries.len() - 1
    }

    pub fn query_map(&self) -> &[usize] {
        &self.query_map
    }

    /// Exact acceptance probability by statevector simulation.
    pub fn accept_probability(&self, x: &[i8]) -> Result<f64> {
        if x.len() != self.input_len {
            return Err(Error::LengthMismatch { expected: self.input_len, got: x.len() });
        }
        let dim = 1usize << self.n_qubits;
        let mut state = self.unitaries[0].column(0).clone_owned();
        for u in &self.unitaries[1..] {
            for s in 0..dim {
                let q = self.query_map[s];
                if q > 0 && x[q - 1] < 0 {
                    state[s] = -state[s];
                }
            }
            state = u * state;
        }
        Ok(self.accepting.iter().map(|&s| state[s] * state[s]).sum())
    }
}

/// QR of a Gaussian matrix with the sign of `R`'s diagonal folded into `Q`.
pub fn random_orthogonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for c in 0..dim {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

/// Largest `(N+1)^{2t}` accepted by [`from_query_algorithm`].
pub const EXTRACTION_TERM_LIMIT: f64 = (1u64 << 22) as f64;

/// The degree-`2t` block polynomial `p` with `p(X, ..., X)` equal to the
/// acceptance probability on input `X`. Block `j < t` carries the `j`-th
/// query of the ket, block `t + j` the `j`-th query of the bra; every block
/// has `N + 1` variables with index 0 the dummy.
pub fn from_query_algorithm(a: &QueryAlgorithm) -> Result<BlockMultilinearPoly> {
    let t = a.queries();
    let width = a.input_len + 1;
    let dim = 1usize << a.n_qubits;
    let dense_terms = (width as f64).powi(2 * t as i32);
    if dense_terms > EXTRACTION_TERM_LIMIT || dim > 1024 {
        return Err(Error::ResourceGuard(format!(
            "(N+1)^(2t) = {dense_terms} terms over a {dim}-dimensional space"
        )));
    }
    // amps[s][tuple] with tuple encoded little-endian base `width`
    let mut amps: Vec<Vec<f64>> = (0..dim).map(|s| vec![a.unitaries[0][(s, 0)]]).collect();
    let mut size = 1usize;
    for u in &a.unitaries[1..] {
        let queried: Vec<Vec<f64>> = amps
            .iter()
            .enumerate()
            .map(|(s, amp)| {
                let q = a.query_map[s];
                let mut next = vec![0.0; size * width];
                for (old, &v) in amp.iter().enumerate() {
                    next[old + size * q] = v;
                }
                next
            })
            .collect();
        size *= width;
        amps = (0..dim)
            .map(|r| {
                let mut out = vec![0.0; size];
                for (s, amp) in queried.iter().enumerate() {
                    let w = u[(r, s)];
                    if w != 0.0 {
                        out.iter_mut().zip(amp).for_each(|(o, v)| *o += w * v);
                    }
                }
                out
            })
            .collect();
    }

    let decode = |mut code: usize| -> Vec<usize> {
        (0..t)
            .map(|_| {
                let d = code % width;
                code /= width;
                d
            })
            .collect()
    };
    let mut dense = vec![0.0; size * size];
    for &s in &a.accepting {
        let amp = &amps[s];
        for (i, &x) in amp.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &mut dense[i * size..(i + 1) * size];
            row.iter_mut().zip(amp).for_each(|(d, y)| *d += x * y);
        }
    }
    let mut p = BlockMultilinearPoly::zero(vec![width; 2 * t.max(1)])?;
    if t == 0 {
        // no queries: a constant, carried by the dummy of a single block
        p.block_sizes = vec![width];
        if dense[0] != 0.0 {
            p.terms.insert(vec![0], dense[0]);
        }
        return Ok(p);
    }
    for (code, &c) in dense.iter().enumerate() {
        if c.abs() <= 1e-15 {
            continue;
        }
        let mut idx = decode(code / size);
        idx.extend(decode(code % size));
        p.terms.insert(idx, c);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(k: usize) -> BlockMultilinearPoly {
        BlockMultilinearPoly::from_terms(vec![1; k], [(vec![0; k], 1.0)]).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let p = BlockMultilinearPoly::from_terms(vec![1, 1], [(vec![0, 0], 1.0)]).unwrap();
        assert_eq!(p.evaluate(&[vec![1.0], vec![-1.0]]).unwrap(), -1.0);
        let z = BlockMultilinearPoly::zero(vec![2, 2]).unwrap();
        assert_eq!(z.evaluate(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap(), 0.0);
        assert!(p.evaluate(&[vec![1.0, 1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn lambda_of_single_monomial() {
        let p = single(3);
        for s in nonempty_subsets(3) {
            assert_eq!(p.lambda(&s).unwrap(), 1.0);
        }
        assert!(p.lambda(&[]).is_err());
        let (q, fresh) = p.split_variable(1, 0, 4).unwrap();
        assert_eq!(fresh, vec![1, 2, 3]);
        assert!(q.terms().all(|(_, c)| c == 0.25));
        assert!((q.lambda(&[0, 1, 2]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn split_once_is_identity() {
        let p = BlockMultilinearPoly::from_terms(vec![2, 2], [(vec![0, 1], 0.5), (vec![1, 0], -0.25)]).unwrap();
        let (q, fresh) = p.split_variable(0, 1, 1).unwrap();
        assert!(fresh.is_empty());
        assert_eq!(q, p);
    }

    #[test]
    fn balance_single_monomial() {
        let b = balance(&single(2), 0.1).unwrap();
        for (_, l) in b.lambdas() {
            assert!(l <= 0.1);
        }
        assert!(b.new_variables() <= 40);
        assert_eq!(b.new_variables(), 20);
    }

    #[test]
    fn balanced_input_untouched() {
        let p = BlockMultilinearPoly::from_terms(vec![4, 4], (0..4).map(|i| (vec![i, i], 0.25))).unwrap();
        let b = balance(&p, 0.3).unwrap();
        assert_eq!(b.new_variables(), 0);
    }

    #[test]
    fn unbounded_rejected() {
        let p = BlockMultilinearPoly::from_terms(vec![1, 1], [(vec![0, 0], 2.0)]).unwrap();
        assert!(matches!(balance(&p, 0.1), Err(Error::Precondition(_))));
    }

    #[test]
    fn hadamard_mean_extraction() {
        let a = QueryAlgorithm::hadamard_mean(1);
        let p = from_query_algorithm(&a).unwrap();
        // ((x1 + x2)/2)((x1' + x2')/2): dummy index 0 never appears
        assert_eq!(p.block_sizes(), &[3, 3]);
        assert_eq!(p.term_count(), 4);
        for (idx, c) in p.terms() {
            assert!(idx.iter().all(|&i| i > 0));
            assert!((c - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn json_round_trip() {
        let p = BlockMultilinearPoly::from_terms(vec![2, 3], [(vec![1, 2], 0.5)]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"k":2,"block_sizes":[2,3],"terms":[{"idx":[1,2],"c":0.5}]}"#);
        assert_eq!(serde_json::from_str::<BlockMultilinearPoly>(&s).unwrap(), p);
        assert!(serde_json::from_str::<BlockMultilinearPoly>(r#"{"k":1,"block_sizes":[2],"terms":[{"idx":[2],"c":1}]}"#).is_err());
    }
}

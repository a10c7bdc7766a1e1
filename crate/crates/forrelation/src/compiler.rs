//! Compiling `{H, CZ, CCZ}` circuits into k-fold forrelation instances.
//!
//! A compiled instance is a list of phase functions `f_1..f_k` standing for
//! the operator `H f_k H ... H f_1 H` with `H` applied to every wire. Selective
//! Hadamards come from the three-function gadget on a pair of wires, which
//! applies `H` to both and then swaps them; the swaps are absorbed into a
//! relabeling of logical qubits onto physical wires.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hadamard::fwht_in_place;
use crate::instances::{InstanceTuple, TruthTable};
use crate::phi::phi;

/// Largest wire count the verifier will simulate.
pub const VERIFY_MAX_QUBITS: usize = 12;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Layer {
    pub hadamards: BTreeSet<usize>,
    pub cz: Vec<[usize; 2]>,
    pub ccz: Vec<[usize; 3]>,
}

impl Layer {
    pub fn is_empty(&self) -> bool {
        self.hadamards.is_empty() && self.cz.is_empty() && self.ccz.is_empty()
    }

    fn diagonal_support(&self) -> impl Iterator<Item = usize> + '_ {
        self.cz.iter().flatten().chain(self.ccz.iter().flatten()).copied()
    }

    fn validate(&self, n: usize) -> std::result::Result<(), String> {
        if let Some(q) = self.hadamards.iter().copied().chain(self.diagonal_support()).find(|&q| q >= n) {
            return Err(format!("qubit {q} out of range for {n} qubits"));
        }
        if let Some(q) = self.diagonal_support().find(|q| self.hadamards.contains(q)) {
            return Err(format!("qubit {q} has both a Hadamard and a diagonal gate in one layer"));
        }
        for g in &self.cz {
            if g[0] == g[1] {
                return Err(format!("CZ on repeated qubit {}", g[0]));
            }
        }
        for g in &self.ccz {
            if g[0] == g[1] || g[0] == g[2] || g[1] == g[2] {
                return Err(format!("CCZ on repeated qubits {g:?}"));
            }
        }
        Ok(())
    }
}

/// A layered circuit on `n` qubits. Gates in one layer commute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    n: usize,
    layers: Vec<Layer>,
}

impl Circuit {
    pub fn new(n: usize, layers: Vec<Layer>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("a circuit needs at least one qubit"));
        }
        for (i, l) in layers.iter().enumerate() {
            l.validate(n).map_err(|e| invalid(format!("layer {i}: {e}")))?;
        }
        Ok(Self { n, layers })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Random layers: each qubit is Hadamarded with probability 1/2, and the
    /// rest receive random CZ and CCZ gates.
    pub fn random<R: Rng + ?Sized>(n: usize, depth: usize, rng: &mut R) -> Self {
        let layers = (0..depth)
            .map(|_| {
                let hadamards: BTreeSet<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
                let rest: Vec<usize> = (0..n).filter(|q| !hadamards.contains(q)).collect();
                let mut layer = Layer { hadamards, ..Layer::default() };
                if rest.len() >= 2 {
                    for _ in 0..rng.random_range(0..=2) {
                        let p = rand::seq::index::sample(rng, rest.len(), 2);
                        layer.cz.push([rest[p.index(0)], rest[p.index(1)]]);
                    }
                }
                if rest.len() >= 3 && rng.random_bool(0.5) {
                    let p = rand::seq::index::sample(rng, rest.len(), 3);
                    layer.ccz.push([rest[p.index(0)], rest[p.index(1)], rest[p.index(2)]]);
                }
                layer
            })
            .collect();
        Self::new(n, layers).expect("valid by construction")
    }

    /// Final state `Q|0>` by dense simulation; bit `q` of the index is qubit `q`.
    pub fn simulate(&self) -> Result<Vec<f64>> {
        if self.n > VERIFY_MAX_QUBITS {
            return Err(Error::ResourceGuard(format!("{} qubits exceed {VERIFY_MAX_QUBITS}", self.n)));
        }
        let mut state = vec![0.0; 1 << self.n];
        state[0] = 1.0;
        let s = 1.0 / 2f64.sqrt();
        for layer in &self.layers {
            for (x, amp) in state.iter_mut().enumerate() {
                let bit = |q: usize| x >> q & 1 == 1;
                let flips = layer.cz.iter().filter(|g| g.iter().all(|&q| bit(q))).count()
                    + layer.ccz.iter().filter(|g| g.iter().all(|&q| bit(q))).count();
                if flips % 2 == 1 {
                    *amp = -*amp;
                }
            }
            for &q in &layer.hadamards {
                let m = 1usize << q;
                for x in 0..state.len() {
                    if x & m == 0 {
                        let (a, b) = (state[x], state[x | m]);
                        state[x] = (a + b) * s;
                        state[x | m] = (a - b) * s;
                    }
                }
            }
        }
        Ok(state)
    }

    /// `<0|Q|0>`.
    pub fn amplitude(&self) -> Result<f64> {
        Ok(self.simulate()?[0])
    }
}

fn gate_qubits(name: &str, line: usize, operands: &[usize], arity: usize) -> Result<Vec<Vec<usize>>> {
    if operands.is_empty() || !operands.len().is_multiple_of(arity) {
        return Err(Error::Parse { line, msg: format!("{name} takes operands in groups of {arity}") });
    }
    Ok(operands.chunks(arity).map(<[usize]>::to_vec).collect())
}

impl FromStr for Circuit {
    type Err = Error;

    /// One layer per line, gate groups separated by `|`:
    /// `H 0 2 | CCZ 0 1 2 | CZ 1 3`. `CSIGN`/`CCSIGN` are aliases, `I` is an
    /// empty layer, `CCX c1 c2 t` (or `TOFFOLI`) expands to
    /// `H t`, `CCZ c1 c2 t`, `H t` across three layers. An optional
    /// `qubits N` line fixes the width; `#` starts a comment.
    fn from_str(s: &str) -> Result<Self> {
        let mut width = None;
        let mut layers = Vec::new();
        let mut max_qubit = None;
        for (no, raw) in s.lines().enumerate() {
            let line = no + 1;
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let mut words = text.split_whitespace();
            if words.clone().next().is_some_and(|w| w.eq_ignore_ascii_case("qubits")) {
                let n = words
                    .nth(1)
                    .and_then(|w| w.parse::<usize>().ok())
                    .ok_or_else(|| Error::Parse { line, msg: "expected `qubits N`".into() })?;
                width = Some(n);
                continue;
            }
            // groups apply left to right; a group touching a qubit that the
            // current layer handles with the other gate kind opens a new layer
            let mut line_layers = vec![Layer::default()];
            let mut targets = BTreeSet::new();
            for group in text.split('|') {
                let mut tokens = group.split_whitespace();
                let Some(name) = tokens.next() else {
                    return Err(Error::Parse { line, msg: "empty gate group".into() });
                };
                let operands: Vec<usize> = tokens
                    .map(|t| t.parse().map_err(|_| Error::Parse { line, msg: format!("bad qubit `{t}`") }))
                    .collect::<Result<_>>()?;
                if let Some(&m) = operands.iter().max() {
                    max_qubit = max_qubit.max(Some(m));
                }
                let upper = name.to_ascii_uppercase();
                let is_h = upper == "H";
                let current = line_layers.last().expect("nonempty");
                let clash = if is_h {
                    current.diagonal_support().any(|q| operands.contains(&q))
                } else {
                    operands.iter().any(|q| current.hadamards.contains(q))
                };
                if clash {
                    line_layers.push(Layer::default());
                }
                let layer = line_layers.last_mut().expect("nonempty");
                match upper.as_str() {
                    "I" if operands.is_empty() => {}
                    "H" => {
                        for q in gate_qubits(name, line, &operands, 1)? {
                            if !layer.hadamards.insert(q[0]) {
                                return Err(Error::Parse { line, msg: format!("qubit {} Hadamarded twice", q[0]) });
                            }
                        }
                    }
                    "CZ" | "CSIGN" => {
                        layer.cz.extend(gate_qubits(name, line, &operands, 2)?.into_iter().map(|g| [g[0], g[1]]));
                    }
                    "CCZ" | "CCSIGN" => {
                        layer.ccz.extend(gate_qubits(name, line, &operands, 3)?.into_iter().map(|g| [g[0], g[1], g[2]]));
                    }
                    "CCX" | "TOFFOLI" => {
                        for g in gate_qubits(name, line, &operands, 3)? {
                            targets.insert(g[2]);
                            layer.ccz.push([g[0], g[1], g[2]]);
                        }
                    }
                    other => return Err(Error::Parse { line, msg: format!("unknown gate `{other}`") }),
                }
            }
            if targets.is_empty() {
                layers.extend(line_layers);
            } else {
                let flank = Layer { hadamards: targets, ..Layer::default() };
                layers.push(flank.clone());
                layers.extend(line_layers);
                layers.push(flank);
            }
        }
        let n = match (width, max_qubit) {
            (Some(n), _) => n,
            (None, Some(m)) => m + 1,
            (None, None) => 1,
        };
        Circuit::new(n, layers)
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "qubits {}", self.n)?;
        for layer in &self.layers {
            let mut groups = Vec::new();
            let join = |qs: &mut dyn Iterator<Item = usize>| qs.map(|q| q.to_string()).collect::<Vec<_>>().join(" ");
            if !layer.hadamards.is_empty() {
                groups.push(format!("H {}", join(&mut layer.hadamards.iter().copied())));
            }
            if !layer.cz.is_empty() {
                groups.push(format!("CZ {}", join(&mut layer.cz.iter().flatten().copied())));
            }
            if !layer.ccz.is_empty() {
                groups.push(format!("CCZ {}", join(&mut layer.ccz.iter().flatten().copied())));
            }
            if groups.is_empty() {
                groups.push("I".into());
            }
            writeln!(f, "{}", groups.join(" | "))?;
        }
        Ok(())
    }
}

/// `f(z) = (-1)^{sum_m prod_{i in m} z_i}` over GF(2).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhasePolyFunction {
    pub n_bits: usize,
    pub monomials: BTreeSet<Vec<usize>>,
}

impl PhasePolyFunction {
    pub fn constant(n_bits: usize) -> Self {
        Self { n_bits, monomials: BTreeSet::new() }
    }

    pub fn is_constant(&self) -> bool {
        self.monomials.is_empty()
    }

    /// Adds a monomial mod 2: adding it twice removes it.
    pub fn toggle(&mut self, mut monomial: Vec<usize>) {
        monomial.sort_unstable();
        if !self.monomials.remove(&monomial) {
            self.monomials.insert(monomial);
        }
    }

    /// Pointwise product.
    pub fn multiply(&mut self, other: &PhasePolyFunction) {
        for m in &other.monomials {
            self.toggle(m.clone());
        }
    }

    pub fn degree(&self) -> usize {
        self.monomials.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn value(&self, z: usize) -> i8 {
        let odd = self.monomials.iter().filter(|m| m.iter().all(|&i| z >> i & 1 == 1)).count() % 2 == 1;
        if odd {
            -1
        } else {
            1
        }
    }

    pub fn to_truth_table(&self) -> TruthTable {
        TruthTable::new(self.n_bits as u32, (0..1usize << self.n_bits).map(|z| self.value(z)).collect())
            .expect("length is a power of two")
    }

    fn check(&self) -> Result<()> {
        if let Some(m) = self.monomials.iter().find(|m| m.iter().any(|&i| i >= self.n_bits)) {
            return Err(invalid(format!("monomial {m:?} exceeds {} bits", self.n_bits)));
        }
        Ok(())
    }
}

/// The gadget's three functions `(-1)^{z_a z_b}` on `n_bits` wires.
pub fn hadamard_gadget(n_bits: usize, a: usize, b: usize) -> Result<[PhasePolyFunction; 3]> {
    if a == b {
        return Err(invalid(format!("gadget needs two distinct wires, got {a} twice")));
    }
    if a.max(b) >= n_bits {
        return Err(invalid(format!("wire {} out of range for {n_bits}", a.max(b))));
    }
    let mut f = PhasePolyFunction::constant(n_bits);
    f.toggle(vec![a, b]);
    Ok([f.clone(), f.clone(), f])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileResult {
    pub n_bits: usize,
    pub functions: Vec<PhasePolyFunction>,
    /// `qubit_relabeling[q]` is the wire holding logical qubit `q` at the
    /// end; index `n` is the dummy when present.
    pub qubit_relabeling: Vec<usize>,
    pub scale: f64,
    pub dummy_count: usize,
}

impl CompileResult {
    pub fn k(&self) -> usize {
        self.functions.len()
    }

    pub fn to_instance(&self) -> Result<InstanceTuple> {
        for f in &self.functions {
            if f.n_bits != self.n_bits {
                return Err(Error::LengthMismatch { expected: self.n_bits, got: f.n_bits });
            }
            f.check()?;
        }
        InstanceTuple::boolean(self.functions.iter().map(PhasePolyFunction::to_truth_table).collect())
    }
}

/// Ascending pairs of an H-set; an odd leftover is paired with the dummy.
fn pairs(set: &BTreeSet<usize>, dummy: usize) -> Vec<(usize, usize)> {
    let qs: Vec<usize> = set.iter().copied().collect();
    qs.chunks(2).map(|c| (c[0], if c.len() == 2 { c[1] } else { dummy })).collect()
}

fn needs_dummy(c: &Circuit) -> bool {
    c.layers.iter().any(|l| l.hadamards.len() % 2 == 1)
}

fn dummy_uses(c: &Circuit) -> usize {
    c.layers.iter().filter(|l| l.hadamards.len() % 2 == 1).count()
}

struct Wires {
    sigma: Vec<usize>,
    n_bits: usize,
}

impl Wires {
    fn new(c: &Circuit) -> Self {
        let n_bits = c.n + usize::from(needs_dummy(c));
        Self { sigma: (0..n_bits).collect(), n_bits }
    }

    fn diagonal(&self, qubits: &[usize], f: &mut PhasePolyFunction) {
        f.toggle(qubits.iter().map(|&q| self.sigma[q]).collect());
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.sigma.swap(a, b);
    }

    fn finish(self, c: &Circuit, functions: Vec<PhasePolyFunction>) -> CompileResult {
        let parity = dummy_uses(c) % 2;
        CompileResult {
            n_bits: self.n_bits,
            functions,
            qubit_relabeling: self.sigma,
            scale: if parity == 1 { 1.0 / 2f64.sqrt() } else { 1.0 },
            dummy_count: self.n_bits - c.n,
        }
    }
}

/// One function per diagonal gate, three per Hadamard pair.
pub fn compile_gatewise(c: &Circuit) -> CompileResult {
    enum Element {
        Diagonal(PhasePolyFunction),
        Gadget([PhasePolyFunction; 3]),
    }

    let mut wires = Wires::new(c);
    let n_bits = wires.n_bits;
    let mut elements = Vec::new();
    for layer in &c.layers {
        for g in &layer.cz {
            let mut f = PhasePolyFunction::constant(n_bits);
            wires.diagonal(g, &mut f);
            elements.push(Element::Diagonal(f));
        }
        for g in &layer.ccz {
            let mut f = PhasePolyFunction::constant(n_bits);
            wires.diagonal(g, &mut f);
            elements.push(Element::Diagonal(f));
        }
        for (a, b) in pairs(&layer.hadamards, c.n) {
            let gadget = hadamard_gadget(n_bits, wires.sigma[a], wires.sigma[b]).expect("distinct wires");
            elements.push(Element::Gadget(gadget));
            wires.swap(a, b);
        }
    }

    let one = PhasePolyFunction::constant(n_bits);
    let mut functions = Vec::new();
    let mut last_diagonal = None;
    for e in elements {
        let diagonal = matches!(e, Element::Diagonal(_));
        match last_diagonal {
            None if diagonal => functions.push(one.clone()),
            Some(prev) if prev == diagonal => functions.push(one.clone()),
            _ => {}
        }
        match e {
            Element::Diagonal(f) => functions.push(f),
            Element::Gadget(g) => functions.extend(g),
        }
        last_diagonal = Some(diagonal);
    }
    if last_diagonal != Some(false) {
        functions.push(one);
    }
    wires.finish(c, functions)
}

/// Three functions per layer joined by constants, then every interior
/// constant is removed by merging its neighbours; at most `2d + 1` remain.
pub fn compile_layers(c: &Circuit) -> CompileResult {
    let mut wires = Wires::new(c);
    let n_bits = wires.n_bits;
    let mut functions = Vec::with_capacity(4 * c.depth());
    for (i, layer) in c.layers.iter().enumerate() {
        if i > 0 {
            functions.push(PhasePolyFunction::constant(n_bits));
        }
        let mut outer = PhasePolyFunction::constant(n_bits);
        for (a, b) in pairs(&layer.hadamards, c.n) {
            outer.toggle(vec![wires.sigma[a], wires.sigma[b]]);
        }
        let mut middle = outer.clone();
        for g in &layer.cz {
            wires.diagonal(g, &mut middle);
        }
        for g in &layer.ccz {
            wires.diagonal(g, &mut middle);
        }
        for (a, b) in pairs(&layer.hadamards, c.n) {
            wires.swap(a, b);
        }
        functions.extend([outer.clone(), middle, outer]);
    }
    if functions.is_empty() {
        functions.push(PhasePolyFunction::constant(n_bits));
    }
    let functions = eliminate_constants(functions);
    wires.finish(c, functions)
}

/// `... g H 1 H h ...` equals `... (g h) ...`, so an interior constant
/// and its two neighbours collapse to one function.
pub fn eliminate_constants(mut functions: Vec<PhasePolyFunction>) -> Vec<PhasePolyFunction> {
    let mut i = 1;
    while i + 1 < functions.len() {
        if functions[i].is_constant() {
            let right = functions.remove(i + 1);
            functions.remove(i);
            functions[i - 1].multiply(&right);
            i = i.saturating_sub(1).max(1);
        } else {
            i += 1;
        }
    }
    functions
}

/// Applies `H f_k H ... H f_1 H` to `state` in place.
pub fn apply_compiled(functions: &[PhasePolyFunction], state: &mut [f64]) {
    fwht_in_place(state);
    for f in functions {
        for (z, amp) in state.iter_mut().enumerate() {
            if f.value(z) < 0 {
                *amp = -*amp;
            }
        }
        fwht_in_place(state);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub phi: f64,
    pub amplitude: f64,
    pub scale: f64,
    pub residual: f64,
    /// Largest entrywise gap between the compiled final state and `Q|0>`
    /// placed on the relabeled wires.
    pub state_residual: f64,
}

/// Compares the compiled `Phi` with `scale * <0|Q|0>`.
pub fn verify_compilation(c: &Circuit, r: &CompileResult) -> Result<Verification> {
    if r.n_bits > VERIFY_MAX_QUBITS {
        return Err(Error::ResourceGuard(format!("{} wires exceed {VERIFY_MAX_QUBITS}", r.n_bits)));
    }
    if r.n_bits < c.n || r.qubit_relabeling.len() != r.n_bits {
        return Err(invalid("compile result does not match the circuit width"));
    }
    let tuple = r.to_instance()?;
    let phi = phi(&tuple).phi;
    let logical = c.simulate()?;
    let amplitude = logical[0];

    let mut compiled = vec![0.0; 1 << r.n_bits];
    compiled[0] = 1.0;
    apply_compiled(&r.functions, &mut compiled);
    let dummy = (r.n_bits > c.n).then(|| r.qubit_relabeling[c.n]);
    let mut state_residual: f64 = 0.0;
    for (wire_index, &got) in compiled.iter().enumerate() {
        let mut x = 0;
        for (q, &w) in r.qubit_relabeling.iter().take(c.n).enumerate() {
            x |= (wire_index >> w & 1) << q;
        }
        let mut expected = logical[x];
        if let Some(w) = dummy {
            // the dummy ends in |0> or |+>
            if r.scale < 1.0 {
                expected *= 1.0 / 2f64.sqrt();
            } else if wire_index >> w & 1 == 1 {
                expected = 0.0;
            }
        }
        state_residual = state_residual.max((got - expected).abs());
    }

    Ok(Verification { phi, amplitude, scale: r.scale, residual: (phi - r.scale * amplitude).abs(), state_residual })
}

//! Netlists of self-organizing AND/OR/XOR gates.
//!
//! Registers are stored least-significant bit first. Clamped nodes encode
//! known bits; every other node floats and is resolved by the dynamics.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{uint_to_bits_lsb, EmbeddedInstance, EmbeddingLayout};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is already clamped")]
    DuplicateClamp(NodeId),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("empty operand")]
    EmptyOperand,
    #[error("clamps contradict each other at node {0}")]
    Contradiction(NodeId),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T, E = CircuitError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    And,
    Or,
    Xor,
}

impl GateKind {
    pub const ALL: [GateKind; 3] = [GateKind::And, GateKind::Or, GateKind::Xor];

    pub fn eval(self, x: bool, y: bool) -> bool {
        match self {
            GateKind::And => x && y,
            GateKind::Or => x || y,
            GateKind::Xor => x ^ y,
        }
    }

    pub fn satisfied(self, x: bool, y: bool, out: bool) -> bool {
        self.eval(x, y) == out
    }

    /// The four satisfying `(in1, in2, out)` corners as Boolean triples.
    pub fn truth_table(self) -> [[bool; 3]; 4] {
        let mut rows = [[false; 3]; 4];
        for (i, row) in rows.iter_mut().enumerate() {
            let (x, y) = (i & 2 != 0, i & 1 != 0);
            *row = [x, y, self.eval(x, y)];
        }
        rows
    }

    /// Satisfying corners as voltages (Boolean 1 ↦ +1, 0 ↦ −1).
    pub fn corners(self) -> [[f64; 3]; 4] {
        self.truth_table()
            .map(|row| row.map(|b| if b { 1.0 } else { -1.0 }))
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Xor => "XOR",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "AND" => Some(GateKind::And),
            "OR" => Some(GateKind::Or),
            "XOR" => Some(GateKind::Xor),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub in1: NodeId,
    pub in2: NodeId,
    pub out: NodeId,
}

impl Gate {
    pub fn terminals(&self) -> [NodeId; 3] {
        [self.in1, self.in2, self.out]
    }
}

/// Logic level held by a clamp: `High` is +1 (Boolean 1), `Low` is −1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    High,
    Low,
}

impl Level {
    pub fn from_bool(bit: bool) -> Self {
        if bit {
            Level::High
        } else {
            Level::Low
        }
    }

    pub fn as_bool(self) -> bool {
        self == Level::High
    }

    pub fn voltage(self) -> f64 {
        match self {
            Level::High => 1.0,
            Level::Low => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clamp {
    pub node: NodeId,
    pub level: Level,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCensus {
    pub and: usize,
    pub or: usize,
    pub xor: usize,
}

impl GateCensus {
    pub fn total(&self) -> usize {
        self.and + self.or + self.xor
    }
}

/// A self-organizing logic circuit: nodes `0..node_count`, gates, clamps,
/// and named registers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Netlist {
    node_count: u32,
    gates: Vec<Gate>,
    clamps: Vec<Clamp>,
    registers: BTreeMap<String, Vec<NodeId>>,
}

impl Netlist {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.node_count as usize
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_count).map(NodeId)
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn clamps(&self) -> &[Clamp] {
        &self.clamps
    }

    pub fn registers(&self) -> &BTreeMap<String, Vec<NodeId>> {
        &self.registers
    }

    pub fn register(&self, name: &str) -> Option<&[NodeId]> {
        self.registers.get(name).map(Vec::as_slice)
    }

    pub fn clamp_of(&self, node: NodeId) -> Option<Level> {
        self.clamps.iter().find(|c| c.node == node).map(|c| c.level)
    }

    /// Per-node clamp lookup table.
    pub fn clamp_table(&self) -> Vec<Option<Level>> {
        let mut table = vec![None; self.node_count()];
        for c in &self.clamps {
            table[c.node.index()] = Some(c.level);
        }
        table
    }

    pub fn add_node(&mut self) -> NodeId {
        let id = NodeId(self.node_count);
        self.node_count += 1;
        id
    }

    pub fn add_nodes(&mut self, count: usize) -> Vec<NodeId> {
        (0..count).map(|_| self.add_node()).collect()
    }

    fn check(&self, node: NodeId) -> Result<()> {
        if node.0 < self.node_count {
            Ok(())
        } else {
            Err(CircuitError::UnknownNode(node))
        }
    }

    /// Adds a gate driving a fresh output node.
    pub fn add_gate(&mut self, kind: GateKind, in1: NodeId, in2: NodeId) -> Result<NodeId> {
        self.check(in1)?;
        self.check(in2)?;
        let out = self.add_node();
        self.gates.push(Gate {
            kind,
            in1,
            in2,
            out,
        });
        Ok(out)
    }

    /// Adds a gate between three existing nodes.
    pub fn connect(&mut self, kind: GateKind, in1: NodeId, in2: NodeId, out: NodeId) -> Result<()> {
        for n in [in1, in2, out] {
            self.check(n)?;
        }
        self.gates.push(Gate {
            kind,
            in1,
            in2,
            out,
        });
        Ok(())
    }

    pub fn clamp(&mut self, node: NodeId, level: Level) -> Result<()> {
        self.check(node)?;
        if self.clamp_of(node).is_some() {
            return Err(CircuitError::DuplicateClamp(node));
        }
        self.clamps.push(Clamp { node, level });
        Ok(())
    }

    /// Clamps `nodes` (LSB first) to the bits of `value`.
    pub fn clamp_bits(&mut self, nodes: &[NodeId], value: &BigUint) -> Result<()> {
        if value.bits() as usize > nodes.len() {
            return Err(CircuitError::LayoutMismatch(format!(
                "{value} does not fit in {} clamped bits",
                nodes.len()
            )));
        }
        for (&node, bit) in nodes.iter().zip(uint_to_bits_lsb(value, nodes.len())) {
            self.clamp(node, Level::from_bool(bit))?;
        }
        Ok(())
    }

    pub fn set_register(&mut self, name: impl Into<String>, nodes: Vec<NodeId>) -> Result<()> {
        for &n in &nodes {
            self.check(n)?;
        }
        self.registers.insert(name.into(), nodes);
        Ok(())
    }

    /// Half adder: `sum = x ⊕ y`, `carry = x ∧ y`.
    pub fn build_half_adder(&mut self, x: NodeId, y: NodeId) -> Result<(NodeId, NodeId)> {
        let sum = self.add_gate(GateKind::Xor, x, y)?;
        let carry = self.add_gate(GateKind::And, x, y)?;
        Ok((sum, carry))
    }

    /// Full adder from two half adders and an OR: `x + y + cin = 2·cout + sum`.
    pub fn build_full_adder(
        &mut self,
        x: NodeId,
        y: NodeId,
        cin: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        self.check(cin)?;
        let (t, c1) = self.build_half_adder(x, y)?;
        let (sum, c2) = self.build_half_adder(t, cin)?;
        let cout = self.add_gate(GateKind::Or, c1, c2)?;
        Ok((sum, cout))
    }

    /// Adds up to three bits present in one column.
    fn add_column(&mut self, bits: &[NodeId]) -> Result<(NodeId, Option<NodeId>)> {
        match *bits {
            [x] => Ok((x, None)),
            [x, y] => self.build_half_adder(x, y).map(|(s, c)| (s, Some(c))),
            [x, y, z] => self.build_full_adder(x, y, z).map(|(s, c)| (s, Some(c))),
            _ => unreachable!("column holds 1..=3 bits"),
        }
    }

    /// Schoolbook array multiplier. Partial products `x_i ∧ y_j` are formed
    /// row by row (one row per bit of `x`) and ripple-added into the
    /// accumulator, least-significant column first. Returns
    /// `x.len() + y.len()` product bits, LSB first; `None` marks a column
    /// that is structurally zero.
    pub fn build_multiplier(&mut self, x: &[NodeId], y: &[NodeId]) -> Result<Vec<Option<NodeId>>> {
        if x.is_empty() || y.is_empty() {
            return Err(CircuitError::EmptyOperand);
        }
        let width = x.len() + y.len();
        let mut acc: Vec<Option<NodeId>> = vec![None; width];
        for (i, &xi) in x.iter().enumerate() {
            let row = y
                .iter()
                .map(|&yj| self.add_gate(GateKind::And, xi, yj))
                .collect::<Result<Vec<_>>>()?;
            let mut carry = None;
            let mut pos = i;
            while pos < width {
                let pp = row.get(pos - i).copied();
                if pp.is_none() && carry.is_none() {
                    break;
                }
                let column: Vec<NodeId> = [acc[pos], pp, carry].into_iter().flatten().collect();
                let (sum, c) = self.add_column(&column)?;
                acc[pos] = Some(sum);
                carry = c;
                pos += 1;
            }
            debug_assert!(carry.is_none(), "product overflowed its width");
        }
        Ok(acc)
    }

    /// Ripple-carry sum of two equal-width words modulo `2^width`.
    pub fn build_ripple_adder(&mut self, x: &[NodeId], y: &[NodeId]) -> Result<Vec<NodeId>> {
        if x.len() != y.len() {
            return Err(CircuitError::LayoutMismatch(format!(
                "adder operands of width {} and {}",
                x.len(),
                y.len()
            )));
        }
        let mut carry = None;
        let mut out = Vec::with_capacity(x.len());
        for (&xi, &yi) in x.iter().zip(y) {
            let column: Vec<NodeId> = [Some(xi), Some(yi), carry].into_iter().flatten().collect();
            let (sum, c) = self.add_column(&column)?;
            out.push(sum);
            carry = c;
        }
        Ok(out)
    }

    /// Conditional negation of a word: each bit is XORed with `sign` and
    /// `sign` is then added as the carry into bit 0, giving the two's
    /// complement when `sign` is 1 and the word unchanged when it is 0.
    /// The result has the same width; the final carry is discarded.
    pub fn build_twos_complement_stage(
        &mut self,
        magnitude: &[NodeId],
        sign: NodeId,
    ) -> Result<Vec<NodeId>> {
        if magnitude.is_empty() {
            return Err(CircuitError::EmptyOperand);
        }
        self.check(sign)?;
        let flipped = magnitude
            .iter()
            .map(|&m| self.add_gate(GateKind::Xor, m, sign))
            .collect::<Result<Vec<_>>>()?;
        let mut carry = sign;
        let mut out = Vec::with_capacity(flipped.len());
        for (i, &f) in flipped.iter().enumerate() {
            if i + 1 == flipped.len() {
                out.push(self.add_gate(GateKind::Xor, f, carry)?);
            } else {
                let (s, c) = self.build_half_adder(f, carry)?;
                out.push(s);
                carry = c;
            }
        }
        Ok(out)
    }

    pub fn count_gates(&self) -> GateCensus {
        let mut census = GateCensus::default();
        for g in &self.gates {
            match g.kind {
                GateKind::And => census.and += 1,
                GateKind::Or => census.or += 1,
                GateKind::Xor => census.xor += 1,
            }
        }
        census
    }

    /// Nodes that appear on at least one gate terminal.
    pub fn terminal_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.node_count()];
        for g in &self.gates {
            for t in g.terminals() {
                mask[t.index()] = true;
            }
        }
        mask
    }

    /// Checks that every node of every gate passes the given Boolean
    /// assignment.
    pub fn is_consistent(&self, bits: &[bool]) -> bool {
        self.gates
            .iter()
            .all(|g| g.kind.satisfied(bits[g.in1.index()], bits[g.in2.index()], bits[g.out.index()]))
            && self
                .clamps
                .iter()
                .all(|c| bits[c.node.index()] == c.level.as_bool())
    }

    /// Clamps every node whose value is forced by a gate whose other known
    /// terminals leave only one possibility, repeating until nothing changes.
    /// The satisfying assignments are unchanged. Returns the number of new
    /// clamps, or `Contradiction` if some gate admits no value at all, in
    /// which case the netlist is left as it was.
    pub fn propagate_clamps(&mut self) -> Result<usize> {
        let mut known = self.clamp_table();
        let before = self.clamps.len();
        let mut added = Vec::new();
        let mut changed = true;
        while changed {
            changed = false;
            for g in &self.gates {
                let t = g.terminals();
                let rows = admissible_rows(g, &known);
                let Some(first) = rows.first() else {
                    return Err(CircuitError::Contradiction(g.out));
                };
                for k in 0..3 {
                    if known[t[k].index()].is_none() && rows.iter().all(|r| r[k] == first[k]) {
                        let level = Level::from_bool(first[k]);
                        known[t[k].index()] = Some(level);
                        added.push(Clamp { node: t[k], level });
                        changed = true;
                    }
                }
            }
        }
        self.clamps.extend(added);
        Ok(self.clamps.len() - before)
    }

    /// Removes gates that only copy a signal: AND with an input clamped
    /// high, OR or XOR with an input clamped low, and AND/OR with both inputs
    /// on one node. The copied node is merged into its source everywhere,
    /// implied clamps are propagated between merges, gates that no longer
    /// constrain anything are dropped, and finally nodes that
    /// are neither gate terminals nor register bits are dropped and the rest
    /// renumbered densely. Register values of satisfying assignments are
    /// unchanged. Returns the number of gates removed.
    pub fn simplify(&mut self) -> Result<usize> {
        let gates_before = self.gates.len();
        loop {
            self.propagate_clamps()?;
            let known = self.clamp_table();
            let is = |n: NodeId, level: bool| known[n.index()].is_some_and(|l| l.as_bool() == level);
            let copy = self.gates.iter().enumerate().find_map(|(gi, g)| {
                let pass = match g.kind {
                    GateKind::And => true,
                    GateKind::Or | GateKind::Xor => false,
                };
                if g.in1 == g.in2 && g.kind != GateKind::Xor {
                    Some((gi, g.in1))
                } else if is(g.in1, pass) {
                    Some((gi, g.in2))
                } else if is(g.in2, pass) {
                    Some((gi, g.in1))
                } else {
                    None
                }
            });
            if let Some((gi, source)) = copy {
                let gate = self.gates.remove(gi);
                self.merge(gate.out, source)?;
                continue;
            }
            let before = self.gates.len();
            self.gates.retain(|g| !is_vacuous(g, &known));
            if self.gates.len() == before {
                break;
            }
        }
        self.compact();
        Ok(gates_before - self.gates.len())
    }

    /// Replaces every use of `drop` by `keep`.
    fn merge(&mut self, drop: NodeId, keep: NodeId) -> Result<()> {
        if drop == keep {
            return Ok(());
        }
        let swap = |n: &mut NodeId| {
            if *n == drop {
                *n = keep;
            }
        };
        for g in &mut self.gates {
            swap(&mut g.in1);
            swap(&mut g.in2);
            swap(&mut g.out);
        }
        for nodes in self.registers.values_mut() {
            nodes.iter_mut().for_each(swap);
        }
        match (self.clamp_of(drop), self.clamp_of(keep)) {
            (Some(a), Some(b)) if a != b => return Err(CircuitError::Contradiction(keep)),
            _ => {}
        }
        let kept_clamped = self.clamp_of(keep).is_some();
        self.clamps.retain(|c| !(c.node == drop && kept_clamped));
        self.clamps.iter_mut().for_each(|c| swap(&mut c.node));
        Ok(())
    }

    /// Drops nodes used by no gate and no register, renumbering the rest in
    /// their original order.
    fn compact(&mut self) {
        let mut used = self.terminal_mask();
        for nodes in self.registers.values() {
            for n in nodes {
                used[n.index()] = true;
            }
        }
        let mut map = vec![None; used.len()];
        let mut next = 0u32;
        for (i, u) in used.iter().enumerate() {
            if *u {
                map[i] = Some(NodeId(next));
                next += 1;
            }
        }
        let at = |n: NodeId| map[n.index()].expect("used node");
        for g in &mut self.gates {
            g.in1 = at(g.in1);
            g.in2 = at(g.in2);
            g.out = at(g.out);
        }
        for nodes in self.registers.values_mut() {
            nodes.iter_mut().for_each(|n| *n = at(*n));
        }
        self.clamps = self
            .clamps
            .iter()
            .filter_map(|c| map[c.node.index()].map(|node| Clamp { node, level: c.level }))
            .collect();
        self.node_count = next;
    }

    /// Reads a register (LSB first) from a Boolean assignment.
    pub fn read_register(&self, name: &str, bits: &[bool]) -> Option<BigUint> {
        let nodes = self.register(name)?;
        Some(
            nodes
                .iter()
                .enumerate()
                .filter(|(_, n)| bits[n.index()])
                .fold(BigUint::default(), |acc, (i, _)| acc | (BigUint::from(1u32) << i)),
        )
    }
}

/// Truth-table rows of a gate compatible with the known node values and
/// with terminals that share a node.
fn admissible_rows(g: &Gate, known: &[Option<Level>]) -> Vec<[bool; 3]> {
    let t = g.terminals();
    g.kind
        .truth_table()
        .into_iter()
        .filter(|row| {
            (0..3).all(|k| {
                known[t[k].index()].is_none_or(|l| l.as_bool() == row[k])
                    && (0..k).all(|j| t[j] != t[k] || row[j] == row[k])
            })
        })
        .collect()
}

/// Whether a gate is satisfied by every assignment of its unknown nodes.
fn is_vacuous(g: &Gate, known: &[Option<Level>]) -> bool {
    let t = g.terminals();
    let mut free: Vec<NodeId> = t.iter().copied().filter(|n| known[n.index()].is_none()).collect();
    free.sort();
    free.dedup();
    let rows = admissible_rows(g, known);
    rows.len() == 1 << free.len()
}

/// Register names used by the inversion circuit.
pub mod reg {
    pub const A: &str = "a";
    pub const B: &str = "b";
    pub const B_F: &str = "b_f";
    pub const C: &str = "c";
    pub const CONSISTENCY: &str = "consistency";
    pub const C_F: &str = "c_f";
    pub const PRODUCT: &str = "product";
}

/// Builds the unclamped inversion circuit `a × b̂ = c ‖ 0…0 ‖ c_f` for a
/// reduced layout.
///
/// The product of the `n`-bit register `a` with the `(n + n_b)`-bit
/// register `b ‖ b_f` is laid out LSB first as `c_f` (low `n_b` bits), the
/// `n` consistency bits, then `c` (top `n` bits). When `n = 1` the top
/// product column has no driving gate; its node stays unconnected and is
/// fixed only by its clamp.
pub fn build_inversion_circuit(layout: EmbeddingLayout) -> Result<Netlist> {
    if layout.n_a != 0 {
        return Err(CircuitError::InvalidLayout(
            "precision register must be reduced (n_a = 0)".into(),
        ));
    }
    layout
        .validate()
        .map_err(|e| CircuitError::InvalidLayout(e.to_string()))?;
    let (n, n_b) = (layout.n, layout.n_b);
    let mut net = Netlist::new();
    let a = net.add_nodes(n);
    let b_hat = net.add_nodes(n + n_b);
    let product = net.build_multiplier(&a, &b_hat)?;
    let product: Vec<NodeId> = product
        .into_iter()
        .map(|p| p.unwrap_or_else(|| net.add_node()))
        .collect();

    net.set_register(reg::A, a)?;
    net.set_register(reg::B_F, b_hat[..n_b].to_vec())?;
    net.set_register(reg::B, b_hat[n_b..].to_vec())?;
    net.set_register(reg::C_F, product[..n_b].to_vec())?;
    net.set_register(reg::CONSISTENCY, product[n_b..n_b + n].to_vec())?;
    net.set_register(reg::C, product[n_b + n..].to_vec())?;
    net.set_register(reg::PRODUCT, product)?;
    Ok(net)
}

/// Closed-form gate census of [`build_inversion_circuit`].
///
/// With `m = n + n_b` and `n ≥ 2`, the multiplier uses `n·m` partial-product
/// ANDs, `n` half adders and `(n−1)(m−1) − 1` full adders:
///
/// ```text
/// AND = n·m + n + 2·((n−1)(m−1) − 1)
/// XOR =       n + 2·((n−1)(m−1) − 1)
/// OR  =             (n−1)(m−1) − 1
/// total = 6·n·m − 3·n − 5·m
/// ```
///
/// For `n = 1` there are only the `m` partial-product ANDs. Along the
/// diagonal `n_b = n` (so `m = 2n`) the total is `3·m² − 6.5·m`.
pub fn inversion_gate_census(n: usize, n_b: usize) -> GateCensus {
    let m = n + n_b;
    if n == 1 {
        return GateCensus {
            and: m,
            or: 0,
            xor: 0,
        };
    }
    let full = (n - 1) * (m - 1) - 1;
    GateCensus {
        and: n * m + n + 2 * full,
        xor: n + 2 * full,
        or: full,
    }
}

/// Clamps `a`, `c` and the consistency bits of an inversion circuit to an
/// instance. The upper `2n` product bits hold `c_int · 2^(n − shift)`, which
/// is `c` followed by zeros when the dividend shift is zero.
pub fn clamp_instance(netlist: &Netlist, instance: &EmbeddedInstance) -> Result<Netlist> {
    let l = instance.layout;
    let width = |name: &str| netlist.register(name).map(<[NodeId]>::len);
    let expected = [
        (reg::A, l.n),
        (reg::B, l.n),
        (reg::B_F, l.n_b),
        (reg::C, l.n),
        (reg::CONSISTENCY, l.n),
        (reg::C_F, l.n_b),
    ];
    for (name, w) in expected {
        if width(name) != Some(w) {
            return Err(CircuitError::LayoutMismatch(format!(
                "register {name} has width {:?}, layout needs {w}",
                width(name)
            )));
        }
    }
    if l.n_a != 0 {
        return Err(CircuitError::LayoutMismatch("instance layout is not reduced".into()));
    }
    let mut net = netlist.clone();
    let a = net.register(reg::A).unwrap().to_vec();
    net.clamp_bits(&a, &instance.a_int)?;
    let mut upper = net.register(reg::CONSISTENCY).unwrap().to_vec();
    upper.extend_from_slice(net.register(reg::C).unwrap());
    net.clamp_bits(&upper, &instance.upper_product())?;
    Ok(net)
}

/// Text serialization.
///
/// ```text
/// solc v1
/// node <id>
/// gate <AND|OR|XOR> <in1> <in2> <out>
/// clamp <id> <+1|-1>
/// reg <name> <id>...
/// ```
///
/// Sections appear in that order; nodes are listed `0..count`, gates and
/// clamps in insertion order, registers sorted by name with their bits LSB
/// first. Blank lines and lines starting with `#` are ignored on import.
pub mod format {
    use super::*;
    use std::fmt::Write as _;

    pub const HEADER: &str = "solc v1";

    pub fn export_netlist(net: &Netlist) -> String {
        let mut s = String::new();
        s.push_str(HEADER);
        s.push('\n');
        for n in net.nodes() {
            writeln!(s, "node {n}").unwrap();
        }
        for g in &net.gates {
            writeln!(s, "gate {} {} {} {}", g.kind.name(), g.in1, g.in2, g.out).unwrap();
        }
        for c in &net.clamps {
            let lvl = match c.level {
                Level::High => "+1",
                Level::Low => "-1",
            };
            writeln!(s, "clamp {} {lvl}", c.node).unwrap();
        }
        for (name, nodes) in &net.registers {
            s.push_str("reg ");
            s.push_str(name);
            for n in nodes {
                write!(s, " {n}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn import_netlist(text: &str) -> Result<Netlist> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let err = |line: usize, msg: &str| CircuitError::Parse {
            line,
            msg: msg.to_string(),
        };
        match lines.next() {
            Some((_, HEADER)) => {}
            Some((line, _)) => return Err(err(line, "expected header `solc v1`")),
            None => return Err(err(0, "empty document")),
        }
        let mut net = Netlist::new();
        for (line, text) in lines {
            let mut words = text.split_whitespace();
            let keyword = words.next().unwrap_or_default();
            let rest: Vec<&str> = words.collect();
            let node = |s: &str| -> Result<NodeId> {
                s.parse::<u32>()
                    .map(NodeId)
                    .map_err(|_| err(line, &format!("bad node id `{s}`")))
            };
            match (keyword, rest.as_slice()) {
                ("node", [id]) => {
                    let id = node(id)?;
                    if id.0 != net.node_count {
                        return Err(err(line, "node ids must be dense and ascending"));
                    }
                    net.add_node();
                }
                ("gate", [kind, i1, i2, o]) => {
                    let kind = GateKind::from_name(kind)
                        .ok_or_else(|| err(line, &format!("unknown gate kind `{kind}`")))?;
                    net.connect(kind, node(i1)?, node(i2)?, node(o)?)
                        .map_err(|e| err(line, &e.to_string()))?;
                }
                ("clamp", [id, lvl]) => {
                    let level = match *lvl {
                        "+1" => Level::High,
                        "-1" => Level::Low,
                        _ => return Err(err(line, "clamp level must be +1 or -1")),
                    };
                    net.clamp(node(id)?, level)
                        .map_err(|e| err(line, &e.to_string()))?;
                }
                ("reg", [name, ids @ ..]) => {
                    let ids = ids.iter().map(|s| node(s)).collect::<Result<Vec<_>>>()?;
                    net.set_register(*name, ids)
                        .map_err(|e| err(line, &e.to_string()))?;
                }
                _ => return Err(err(line, &format!("unrecognized line `{text}`"))),
            }
        }
        Ok(net)
    }
}

pub use format::{export_netlist, import_netlist};

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustively evaluates a netlist whose free inputs are `inputs`,
    /// propagating through gates in insertion order.
    fn simulate(net: &Netlist, inputs: &[(NodeId, bool)]) -> Vec<bool> {
        let mut bits = vec![false; net.node_count()];
        for &(n, b) in inputs {
            bits[n.index()] = b;
        }
        for g in net.gates() {
            bits[g.out.index()] = g.kind.eval(bits[g.in1.index()], bits[g.in2.index()]);
        }
        bits
    }

    #[test]
    fn truth_tables_have_four_corners() {
        for kind in GateKind::ALL {
            let mut count = 0;
            for i in 0..8 {
                let (x, y, o) = (i & 4 != 0, i & 2 != 0, i & 1 != 0);
                if kind.satisfied(x, y, o) {
                    count += 1;
                    assert!(kind.truth_table().contains(&[x, y, o]));
                }
            }
            assert_eq!(count, 4);
        }
    }

    #[test]
    fn half_adder_table() {
        let mut net = Netlist::new();
        let (x, y) = (net.add_node(), net.add_node());
        let (s, c) = net.build_half_adder(x, y).unwrap();
        assert_eq!(net.gates().len(), 2);
        for (xv, yv, sv, cv) in [
            (true, true, false, true),
            (false, false, false, false),
            (true, false, true, false),
            (false, true, true, false),
        ] {
            let bits = simulate(&net, &[(x, xv), (y, yv)]);
            assert_eq!((bits[s.index()], bits[c.index()]), (sv, cv));
        }
    }

    #[test]
    fn full_adder_matches_integer_addition() {
        let mut net = Netlist::new();
        let (x, y, ci) = (net.add_node(), net.add_node(), net.add_node());
        let (s, co) = net.build_full_adder(x, y, ci).unwrap();
        assert_eq!(net.gates().len(), 5);
        for i in 0..8u32 {
            let (xv, yv, cv) = (i & 4 != 0, i & 2 != 0, i & 1 != 0);
            let bits = simulate(&net, &[(x, xv), (y, yv), (ci, cv)]);
            let total = xv as u32 + yv as u32 + cv as u32;
            assert_eq!(bits[s.index()] as u32 + 2 * bits[co.index()] as u32, total);
        }
    }

    #[test]
    fn unknown_node_is_rejected() {
        let mut net = Netlist::new();
        let x = net.add_node();
        assert_eq!(
            net.build_half_adder(x, NodeId(7)),
            Err(CircuitError::UnknownNode(NodeId(7)))
        );
        assert_eq!(
            net.build_full_adder(x, x, NodeId(9)),
            Err(CircuitError::UnknownNode(NodeId(9)))
        );
    }

    fn twos_complement(width: usize, magnitude: u32, sign: bool) -> u32 {
        let mut net = Netlist::new();
        let m = net.add_nodes(width);
        let s = net.add_node();
        let out = net.build_twos_complement_stage(&m, s).unwrap();
        let mut inputs: Vec<_> = m
            .iter()
            .enumerate()
            .map(|(i, &n)| (n, magnitude >> i & 1 == 1))
            .collect();
        inputs.push((s, sign));
        let bits = simulate(&net, &inputs);
        out.iter()
            .enumerate()
            .map(|(i, n)| (bits[n.index()] as u32) << i)
            .sum()
    }

    #[test]
    fn twos_complement_examples() {
        assert_eq!(twos_complement(3, 0b101, false), 0b101);
        assert_eq!(twos_complement(3, 0b011, true), 0b101);
        assert_eq!(twos_complement(3, 0b000, true), 0b000);
    }

    #[test]
    fn twos_complement_exhaustive() {
        for width in 1..=8usize {
            for magnitude in 0..=(1u32 << (width - 1)) {
                for sign in [false, true] {
                    let raw = twos_complement(width, magnitude, sign) as i64;
                    let signed = if raw >= 1 << (width - 1) {
                        raw - (1 << width)
                    } else {
                        raw
                    };
                    let expected = if sign { -(magnitude as i64) } else { magnitude as i64 };
                    // +2^(w-1) is only representable as its negation
                    if !sign && magnitude == 1 << (width - 1) {
                        continue;
                    }
                    assert_eq!(signed, expected, "w={width} m={magnitude} s={sign}");
                }
            }
        }
    }

    #[test]
    fn multiplier_computes_products() {
        for (wx, wy) in [(1, 1), (1, 3), (2, 2), (3, 4), (4, 3)] {
            let mut net = Netlist::new();
            let x = net.add_nodes(wx);
            let y = net.add_nodes(wy);
            let p = net.build_multiplier(&x, &y).unwrap();
            for xv in 0..(1u32 << wx) {
                for yv in 0..(1u32 << wy) {
                    let mut inputs: Vec<_> =
                        x.iter().enumerate().map(|(i, &n)| (n, xv >> i & 1 == 1)).collect();
                    inputs.extend(y.iter().enumerate().map(|(i, &n)| (n, yv >> i & 1 == 1)));
                    let bits = simulate(&net, &inputs);
                    let got: u32 = p
                        .iter()
                        .enumerate()
                        .map(|(i, n)| n.map_or(0, |n| (bits[n.index()] as u32) << i))
                        .sum();
                    assert_eq!(got, xv * yv);
                }
            }
        }
    }

    #[test]
    fn two_bit_circuit_census() {
        let net = build_inversion_circuit(EmbeddingLayout::new(2, 0)).unwrap();
        let census = net.count_gates();
        assert_eq!(census.and, 4 + 2);
        assert_eq!(census.total(), 8);
        for (name, w) in [("a", 2), ("b", 2), ("c", 2), ("consistency", 2), ("b_f", 0), ("c_f", 0)] {
            assert_eq!(net.register(name).unwrap().len(), w, "{name}");
        }
    }

    #[test]
    fn one_bit_circuit_is_a_single_and() {
        let net = build_inversion_circuit(EmbeddingLayout::new(1, 0)).unwrap();
        assert_eq!(
            net.count_gates(),
            GateCensus {
                and: 1,
                or: 0,
                xor: 0
            }
        );
        let g = net.gates()[0];
        assert_eq!(g.in1, net.register("a").unwrap()[0]);
        assert_eq!(g.in2, net.register("b").unwrap()[0]);
        assert_eq!(net.register("consistency").unwrap(), &[g.out]);
    }

    #[test]
    fn inversion_circuit_rejects_unreduced_layout() {
        assert!(matches!(
            build_inversion_circuit(EmbeddingLayout::with_precision_bits(3, 1, 3)),
            Err(CircuitError::InvalidLayout(_))
        ));
    }

    #[test]
    fn census_matches_closed_form() {
        for n in 1..=6 {
            for n_b in 0..=n {
                let net = build_inversion_circuit(EmbeddingLayout::new(n, n_b)).unwrap();
                assert_eq!(net.count_gates(), inversion_gate_census(n, n_b), "n={n} n_b={n_b}");
            }
        }
    }

    #[test]
    fn clamp_counts() {
        let inst = EmbeddedInstance::from_ints(10u32, 1u32, EmbeddingLayout::new(5, 5)).unwrap();
        let net = build_inversion_circuit(inst.layout).unwrap();
        let clamped = clamp_instance(&net, &inst).unwrap();
        assert_eq!(clamped.clamps().len(), 15);
        for name in ["b", "b_f", "c_f"] {
            for &n in clamped.register(name).unwrap() {
                assert!(clamped.clamp_of(n).is_none());
            }
        }
        for &n in clamped.register("consistency").unwrap() {
            assert_eq!(clamped.clamp_of(n), Some(Level::Low));
        }
        let c: Vec<_> = clamped
            .register("c")
            .unwrap()
            .iter()
            .map(|&n| clamped.clamp_of(n).unwrap().as_bool())
            .collect();
        assert_eq!(c, vec![true, false, false, false, false]);

        let inst = EmbeddedInstance::unshifted(1, 1, EmbeddingLayout::new(1, 1));
        let net = build_inversion_circuit(inst.layout).unwrap();
        assert_eq!(clamp_instance(&net, &inst).unwrap().clamps().len(), 3);
    }

    #[test]
    fn clamp_rejects_mismatched_layout() {
        let net = build_inversion_circuit(EmbeddingLayout::new(3, 3)).unwrap();
        let inst = EmbeddedInstance::from_ints(3u32, 1u32, EmbeddingLayout::new(3, 2)).unwrap();
        assert!(matches!(
            clamp_instance(&net, &inst),
            Err(CircuitError::LayoutMismatch(_))
        ));
    }

    #[test]
    fn no_orphan_floating_nodes() {
        for n in 1..=4 {
            for n_b in 0..=n {
                let net = build_inversion_circuit(EmbeddingLayout::new(n, n_b)).unwrap();
                let a = (1u32 << n) - 1;
                let inst = EmbeddedInstance::from_ints(a, 1u32, net_layout(n, n_b)).unwrap();
                let clamped = clamp_instance(&net, &inst).unwrap();
                let mask = clamped.terminal_mask();
                let clamps = clamped.clamp_table();
                for node in clamped.nodes() {
                    assert!(mask[node.index()] || clamps[node.index()].is_some());
                }
            }
        }
    }

    fn net_layout(n: usize, n_b: usize) -> EmbeddingLayout {
        EmbeddingLayout::new(n, n_b)
    }

    #[test]
    fn export_empty_netlist_is_header_only() {
        assert_eq!(export_netlist(&Netlist::new()), "solc v1\n");
        assert_eq!(import_netlist("solc v1\n").unwrap(), Netlist::new());
    }

    #[test]
    fn import_errors_carry_line_numbers() {
        let e = import_netlist("solc v1\nnode 0\ngate NAND 0 0 0\n").unwrap_err();
        assert!(matches!(e, CircuitError::Parse { line: 3, .. }));
        assert!(import_netlist("solc v2\n").is_err());
        assert!(import_netlist("solc v1\nnode 1\n").is_err());
        assert!(import_netlist("solc v1\nnode 0\nclamp 0 +1\nclamp 0 -1\n").is_err());
        assert!(import_netlist("solc v1\ngate AND 0 1 2\n").is_err());
    }

    #[test]
    fn propagation_forces_and_inputs() {
        let mut net = Netlist::new();
        let [x, y] = [net.add_node(), net.add_node()];
        let out = net.add_gate(GateKind::And, x, y).unwrap();
        net.clamp(out, Level::High).unwrap();
        assert_eq!(net.propagate_clamps().unwrap(), 2);
        assert_eq!(net.clamp_of(x), Some(Level::High));
        assert_eq!(net.clamp_of(y), Some(Level::High));
        assert_eq!(net.propagate_clamps().unwrap(), 0);
    }

    #[test]
    fn propagation_reports_contradiction_untouched() {
        let mut net = Netlist::new();
        let [x, y, z] = [net.add_node(), net.add_node(), net.add_node()];
        let w = net.add_gate(GateKind::Xor, x, y).unwrap();
        let out = net.add_gate(GateKind::Or, w, z).unwrap();
        net.clamp(x, Level::High).unwrap();
        net.clamp(y, Level::Low).unwrap();
        net.clamp(out, Level::Low).unwrap();
        let before = net.clone();
        assert!(matches!(net.propagate_clamps(), Err(CircuitError::Contradiction(_))));
        assert_eq!(net, before);
    }

    #[test]
    fn simplify_merges_copies() {
        let mut net = Netlist::new();
        let [x, one, z] = [net.add_node(), net.add_node(), net.add_node()];
        net.clamp(one, Level::High).unwrap();
        let y = net.add_gate(GateKind::And, x, one).unwrap();
        let y2 = net.add_gate(GateKind::Or, y, y).unwrap();
        let w = net.add_gate(GateKind::Xor, y2, z).unwrap();
        net.set_register("x", vec![x]).unwrap();
        net.set_register("z", vec![z]).unwrap();
        net.set_register("w", vec![w]).unwrap();

        assert_eq!(net.simplify().unwrap(), 2);
        assert_eq!(net.gates().len(), 1);
        assert_eq!(net.node_count(), 3);
        let g = net.gates()[0];
        assert_eq!(g.kind, GateKind::Xor);
        for bits in [[false, false], [true, false], [false, true], [true, true]] {
            let mut v = vec![false; 3];
            v[net.register("x").unwrap()[0].index()] = bits[0];
            v[net.register("z").unwrap()[0].index()] = bits[1];
            v[net.register("w").unwrap()[0].index()] = bits[0] ^ bits[1];
            assert!(net.is_consistent(&v));
        }
    }

    #[test]
    fn simplify_drops_vacuous_gates() {
        let mut net = Netlist::new();
        let [x, y, zero] = [net.add_node(), net.add_node(), net.add_node()];
        net.clamp(zero, Level::Low).unwrap();
        let a = net.add_gate(GateKind::And, x, zero).unwrap();
        net.add_gate(GateKind::Or, a, y).unwrap();
        net.set_register("y", vec![y]).unwrap();
        net.simplify().unwrap();
        assert!(net.gates().is_empty());
        assert_eq!(net.node_count(), 1);
    }
}

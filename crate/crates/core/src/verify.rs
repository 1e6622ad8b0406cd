//! Ground-truth oracles: exhaustive Boolean satisfiability of small netlists
//! and the cross-check against the arithmetic enumeration.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use thiserror::Error;

use crate::circuit::{reg, Netlist, NodeId};
use crate::embedding::{enumerate_solutions, DecodedSolution, EmbeddedInstance, EmbeddingError};

/// Maximum number of undetermined free inputs the propagating search branches on.
pub const MAX_DECISION_NODES: usize = 26;
/// Maximum number of floating nodes for the propagation-free enumeration.
pub const MAX_EXHAUSTIVE_NODES: usize = 22;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error("{nodes} undetermined nodes exceed the search limit of {limit}")]
    TooLarge { nodes: usize, limit: usize },
    #[error("netlist is missing register `{0}`")]
    MissingRegister(String),
    #[error("circuit and arithmetic solution sets differ")]
    Mismatch {
        circuit: Vec<(BigUint, BigUint)>,
        arithmetic: Vec<(BigUint, BigUint)>,
    },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// Boolean values of every floating (unclamped) node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SatAssignment {
    pub bits: BTreeMap<NodeId, bool>,
}

impl SatAssignment {
    /// Full per-node assignment including clamped values.
    pub fn expand(&self, netlist: &Netlist) -> Vec<bool> {
        let mut bits = vec![false; netlist.node_count()];
        for c in netlist.clamps() {
            bits[c.node.index()] = c.level.as_bool();
        }
        for (n, &b) in &self.bits {
            bits[n.index()] = b;
        }
        bits
    }
}

struct Search<'a> {
    net: &'a Netlist,
    gates_of: Vec<Vec<usize>>,
    order: Vec<NodeId>,
    floating: Vec<NodeId>,
    found: BTreeSet<SatAssignment>,
}

impl Search<'_> {
    /// Filters a gate's satisfying rows against the partial assignment and
    /// fixes any terminal on which all surviving rows agree. Returns false
    /// on conflict.
    fn propagate(&self, values: &mut [Option<bool>], start: &[usize]) -> bool {
        let mut queue: Vec<usize> = start.to_vec();
        let mut queued = vec![false; self.net.gates().len()];
        for &g in &queue {
            queued[g] = true;
        }
        while let Some(gi) = queue.pop() {
            queued[gi] = false;
            let gate = self.net.gates()[gi];
            let terms = gate.terminals();
            let mut agree: [Option<bool>; 3] = [None; 3];
            let mut mixed = [false; 3];
            let mut any = false;
            for row in gate.kind.truth_table() {
                let compatible = (0..3).all(|k| {
                    values[terms[k].index()].is_none_or(|v| v == row[k])
                        && (0..3).all(|j| terms[j] != terms[k] || row[j] == row[k])
                });
                if !compatible {
                    continue;
                }
                any = true;
                for k in 0..3 {
                    match agree[k] {
                        None if !mixed[k] => agree[k] = Some(row[k]),
                        Some(v) if v != row[k] => {
                            agree[k] = None;
                            mixed[k] = true;
                        }
                        _ => {}
                    }
                }
            }
            if !any {
                return false;
            }
            for k in 0..3 {
                let node = terms[k].index();
                if let (Some(v), None) = (agree[k], values[node]) {
                    values[node] = Some(v);
                    for &other in &self.gates_of[node] {
                        if !queued[other] {
                            queued[other] = true;
                            queue.push(other);
                        }
                    }
                }
            }
        }
        true
    }

    fn dfs(&mut self, values: &mut Vec<Option<bool>>) {
        let Some(&next) = self.order.iter().find(|n| values[n.index()].is_none()) else {
            let bits = self
                .floating
                .iter()
                .map(|&n| (n, values[n.index()].unwrap()))
                .collect();
            self.found.insert(SatAssignment { bits });
            return;
        };
        for choice in [false, true] {
            let mut trial = values.clone();
            trial[next.index()] = Some(choice);
            if self.propagate(&mut trial, &self.gates_of[next.index()].clone()) {
                self.dfs(&mut trial);
            }
        }
    }
}

/// All assignments of the floating nodes that satisfy every gate and clamp,
/// sorted.
///
/// Clamped values are first propagated through the gates. The search then
/// branches on the remaining undriven nodes (free inputs) and propagates
/// after each decision; nodes still open after that are branched on in id
/// order. Fails with `TooLarge` when more than [`MAX_DECISION_NODES`] free
/// inputs remain undetermined after the initial propagation.
pub fn brute_force_sat(netlist: &Netlist) -> Result<Vec<SatAssignment>, VerifyError> {
    let n = netlist.node_count();
    let mut gates_of = vec![Vec::new(); n];
    let mut driven = vec![false; n];
    for (gi, g) in netlist.gates().iter().enumerate() {
        for t in g.terminals() {
            if gates_of[t.index()].last() != Some(&gi) {
                gates_of[t.index()].push(gi);
            }
        }
        driven[g.out.index()] = true;
    }
    let clamps = netlist.clamp_table();
    let floating: Vec<NodeId> = netlist.nodes().filter(|n| clamps[n.index()].is_none()).collect();
    let mut order: Vec<NodeId> = floating.iter().copied().filter(|n| !driven[n.index()]).collect();
    order.extend(floating.iter().copied().filter(|n| driven[n.index()]));

    let mut search = Search {
        net: netlist,
        gates_of,
        order,
        floating,
        found: BTreeSet::new(),
    };
    let mut values: Vec<Option<bool>> = clamps.iter().map(|c| c.map(|l| l.as_bool())).collect();
    let all_gates: Vec<usize> = (0..netlist.gates().len()).collect();
    if !search.propagate(&mut values, &all_gates) {
        return Ok(Vec::new());
    }
    let open_inputs = search
        .order
        .iter()
        .filter(|n| !driven[n.index()] && values[n.index()].is_none())
        .count();
    if open_inputs > MAX_DECISION_NODES {
        return Err(VerifyError::TooLarge {
            nodes: open_inputs,
            limit: MAX_DECISION_NODES,
        });
    }
    search.dfs(&mut values);
    Ok(search.found.into_iter().collect())
}

/// Plain enumeration over every floating node with no propagation. Only for
/// tiny netlists; used to check that propagation never changes the result.
pub fn brute_force_sat_exhaustive(netlist: &Netlist) -> Result<Vec<SatAssignment>, VerifyError> {
    let clamps = netlist.clamp_table();
    let floating: Vec<NodeId> = netlist.nodes().filter(|n| clamps[n.index()].is_none()).collect();
    if floating.len() > MAX_EXHAUSTIVE_NODES {
        return Err(VerifyError::TooLarge {
            nodes: floating.len(),
            limit: MAX_EXHAUSTIVE_NODES,
        });
    }
    let mut bits: Vec<bool> = clamps.iter().map(|c| c.is_some_and(|l| l.as_bool())).collect();
    let mut out = Vec::new();
    for pattern in 0u64..(1u64 << floating.len()) {
        for (k, n) in floating.iter().enumerate() {
            bits[n.index()] = pattern >> k & 1 == 1;
        }
        if netlist.is_consistent(&bits) {
            out.push(SatAssignment {
                bits: floating.iter().map(|&n| (n, bits[n.index()])).collect(),
            });
        }
    }
    out.sort();
    Ok(out)
}

/// Reads `(b̂, c_f)` off a full node assignment of an inversion circuit.
pub fn project_quotient(
    netlist: &Netlist,
    bits: &[bool],
    n_b: usize,
) -> Result<(BigUint, BigUint), VerifyError> {
    let read = |name: &str| {
        netlist
            .read_register(name, bits)
            .ok_or_else(|| VerifyError::MissingRegister(name.to_string()))
    };
    let b_hat = (read(reg::B)? << n_b) + read(reg::B_F)?;
    Ok((b_hat, read(reg::C_F)?))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossCheckReport {
    pub circuit: Vec<(BigUint, BigUint)>,
    pub arithmetic: Vec<(BigUint, BigUint)>,
}

/// Confirms that the circuit's satisfying assignments, projected onto
/// `(b̂, c_f)`, are in bijection with [`enumerate_solutions`].
pub fn cross_check(
    netlist: &Netlist,
    instance: &EmbeddedInstance,
) -> Result<CrossCheckReport, VerifyError> {
    let sats = brute_force_sat(netlist)?;
    let mut circuit = sats
        .iter()
        .map(|s| project_quotient(netlist, &s.expand(netlist), instance.layout.n_b))
        .collect::<Result<Vec<_>, _>>()?;
    circuit.sort();
    let arithmetic: Vec<_> = enumerate_solutions(instance)?
        .into_iter()
        .map(|s: DecodedSolution| (s.b_hat, s.c_f))
        .collect();
    // Duplicated projections would break injectivity even when the sets agree.
    let injective = circuit.windows(2).all(|w| w[0] != w[1]);
    if !injective || circuit != arithmetic {
        return Err(VerifyError::Mismatch {
            circuit,
            arithmetic,
        });
    }
    Ok(CrossCheckReport {
        circuit,
        arithmetic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_inversion_circuit, clamp_instance, GateKind, Level};
    use crate::embedding::EmbeddingLayout;

    fn single(kind: GateKind, out: Level) -> (Netlist, [NodeId; 3]) {
        let mut net = Netlist::new();
        let (x, y) = (net.add_node(), net.add_node());
        let o = net.add_gate(kind, x, y).unwrap();
        net.clamp(o, out).unwrap();
        (net, [x, y, o])
    }

    fn input_pairs(sats: &[SatAssignment], x: NodeId, y: NodeId) -> Vec<(bool, bool)> {
        sats.iter().map(|s| (s.bits[&x], s.bits[&y])).collect()
    }

    #[test]
    fn and_with_high_output_has_unique_preimage() {
        let (net, [x, y, _]) = single(GateKind::And, Level::High);
        let sats = brute_force_sat(&net).unwrap();
        assert_eq!(input_pairs(&sats, x, y), vec![(true, true)]);
    }

    #[test]
    fn xor_with_high_output() {
        let (net, [x, y, _]) = single(GateKind::Xor, Level::High);
        let sats = brute_force_sat(&net).unwrap();
        assert_eq!(input_pairs(&sats, x, y), vec![(false, true), (true, false)]);
    }

    #[test]
    fn repeated_terminal_is_handled() {
        // XOR(x, x) can only output 0
        let mut net = Netlist::new();
        let x = net.add_node();
        let o = net.add_gate(GateKind::Xor, x, x).unwrap();
        net.clamp(o, Level::High).unwrap();
        assert!(brute_force_sat(&net).unwrap().is_empty());
        assert!(brute_force_sat_exhaustive(&net).unwrap().is_empty());
    }

    fn instance(a: u64, c: u64, n: usize, n_b: usize) -> (Netlist, EmbeddedInstance) {
        let inst = EmbeddedInstance::from_ints(a, c, EmbeddingLayout::new(n, n_b)).unwrap();
        let net = build_inversion_circuit(inst.layout).unwrap();
        (clamp_instance(&net, &inst).unwrap(), inst)
    }

    fn pairs(v: &[(u64, u64)]) -> Vec<(BigUint, BigUint)> {
        v.iter().map(|&(b, c)| (b.into(), c.into())).collect()
    }

    #[test]
    fn two_bit_projection() {
        let (net, inst) = instance(2, 1, 2, 2);
        let report = cross_check(&net, &inst).unwrap();
        assert_eq!(report.circuit, pairs(&[(8, 0), (9, 2)]));
    }

    #[test]
    fn cross_check_examples() {
        let (net, inst) = instance(3, 2, 3, 3);
        assert_eq!(
            cross_check(&net, &inst).unwrap().circuit,
            pairs(&[(43, 1), (44, 4), (45, 7)])
        );
        let (net, inst) = instance(4, 2, 3, 3);
        assert_eq!(cross_check(&net, &inst).unwrap().circuit, pairs(&[(32, 0), (33, 4)]));
        let (net, inst) = instance(3, 1, 3, 0);
        let report = cross_check(&net, &inst).unwrap();
        assert!(report.circuit.is_empty() && report.arithmetic.is_empty());
    }

    #[test]
    fn mismatch_is_reported() {
        // clamp a different divisor than the instance claims
        let (net, _) = instance(3, 2, 3, 3);
        let other = EmbeddedInstance::from_ints(5u32, 2u32, EmbeddingLayout::new(3, 3)).unwrap();
        assert!(matches!(
            cross_check(&net, &other),
            Err(VerifyError::Mismatch { .. })
        ));
    }

    #[test]
    fn propagation_does_not_change_solution_set() {
        for (a, c, n, n_b) in [(2, 1, 2, 0), (2, 1, 2, 1), (3, 1, 2, 2), (3, 2, 2, 1), (1, 1, 1, 1)] {
            let (net, _) = instance(a, c, n, n_b);
            assert_eq!(
                brute_force_sat(&net).unwrap(),
                brute_force_sat_exhaustive(&net).unwrap(),
                "a={a} c={c} n={n} n_b={n_b}"
            );
        }
    }

    #[test]
    fn too_large_is_reported() {
        let net = build_inversion_circuit(EmbeddingLayout::new(14, 14)).unwrap();
        assert!(matches!(brute_force_sat(&net), Err(VerifyError::TooLarge { .. })));
        let (net, _) = instance(7, 3, 3, 3);
        assert!(matches!(
            brute_force_sat_exhaustive(&net),
            Err(VerifyError::TooLarge { .. })
        ));
    }
}

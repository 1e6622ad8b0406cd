//! Vector fields for self-organizing circuits.

use serde::{Deserialize, Serialize};

use crate::circuit::{GateKind, Netlist};

/// Penalty of one gate: `¼·‖v − s‖²` for the nearest satisfying corner `s`.
pub fn gate_penalty(kind: GateKind, v: [f64; 3]) -> f64 {
    gate_penalty_and_gradient(kind, v).0
}

/// Penalty and its gradient `½·(v − s)`. Ties between corners resolve to
/// the first corner in truth-table order.
pub fn gate_penalty_and_gradient(kind: GateKind, v: [f64; 3]) -> (f64, [f64; 3]) {
    let mut best = f64::INFINITY;
    let mut corner = [0.0; 3];
    for s in kind.corners() {
        let d = (v[0] - s[0]).powi(2) + (v[1] - s[1]).powi(2) + (v[2] - s[2]).powi(2);
        if d < best {
            best = d;
            corner = s;
        }
    }
    (
        0.25 * best,
        [
            0.5 * (v[0] - corner[0]),
            0.5 * (v[1] - corner[1]),
            0.5 * (v[2] - corner[2]),
        ],
    )
}

/// Vector field of a self-organizing circuit.
///
/// A model owns whatever memory variables it needs; the engine stores them
/// as one flat vector and takes care of clamps, voltage caps and step
/// control. Derivatives for clamped nodes are discarded by the engine.
pub trait DynamicsModel: Sync {
    fn initial_memory(&self) -> Vec<f64>;

    /// Writes `dv/dt` and `dx/dt` for the state `(v, x)`.
    fn rates(&self, v: &[f64], x: &[f64], dv: &mut [f64], dx: &mut [f64]);

    /// Projects memory back onto its admissible box after a step.
    fn clip_memory(&self, x: &mut [f64]);

    /// Largest explicit step allowed from this state, given the voltage
    /// rates with clamped entries already zeroed.
    fn step_limit(&self, v: &[f64], x: &[f64], dv: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy)]
struct CompiledGate {
    kind: GateKind,
    nodes: [usize; 3],
}

fn compile_gates(netlist: &Netlist) -> Vec<CompiledGate> {
    netlist
        .gates()
        .iter()
        .map(|g| CompiledGate {
            kind: g.kind,
            nodes: [g.in1.index(), g.in2.index(), g.out.index()],
        })
        .collect()
}

#[inline]
fn gather(v: &[f64], nodes: &[usize; 3]) -> [f64; 3] {
    [v[nodes[0]], v[nodes[1]], v[nodes[2]]]
}

/// Memory-weighted gradient flow on the gate penalties, one memory per gate:
///
/// ```text
/// dv_i/dt = −Σ_g x_g · ∂E_g/∂v_i
/// dx_g/dt = γ · x_g · E_g,   1 ≤ x_g ≤ x_cap
/// ```
///
/// Steps are limited to the inverse of the largest node curvature so the
/// explicit update never overshoots a corner.
#[derive(Debug, Clone)]
pub struct GradientFlow {
    gates: Vec<CompiledGate>,
    node_count: usize,
    pub gamma: f64,
    pub x_cap: f64,
}

impl GradientFlow {
    pub fn new(netlist: &Netlist, gamma: f64, x_cap: f64) -> Self {
        Self {
            gates: compile_gates(netlist),
            node_count: netlist.node_count(),
            gamma,
            x_cap,
        }
    }
}

impl DynamicsModel for GradientFlow {
    fn initial_memory(&self) -> Vec<f64> {
        vec![1.0; self.gates.len()]
    }

    fn rates(&self, v: &[f64], x: &[f64], dv: &mut [f64], dx: &mut [f64]) {
        dv.fill(0.0);
        for (gi, g) in self.gates.iter().enumerate() {
            let (e, grad) = gate_penalty_and_gradient(g.kind, gather(v, &g.nodes));
            for (k, &node) in g.nodes.iter().enumerate() {
                dv[node] -= x[gi] * grad[k];
            }
            dx[gi] = self.gamma * x[gi] * e;
        }
    }

    fn clip_memory(&self, x: &mut [f64]) {
        for w in x {
            *w = w.clamp(1.0, self.x_cap);
        }
    }

    fn step_limit(&self, _v: &[f64], x: &[f64], _dv: &[f64]) -> f64 {
        let mut load = vec![0.0; self.node_count];
        for (gi, g) in self.gates.iter().enumerate() {
            for &node in &g.nodes {
                load[node] += 0.5 * x[gi];
            }
        }
        let stiffness = load.into_iter().fold(0.0, f64::max);
        if stiffness > 0.0 {
            1.0 / stiffness
        } else {
            f64::INFINITY
        }
    }
}

/// Parameters of [`MemcomputingFlow`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemcomputingParams {
    /// Long-term memory growth rate.
    pub alpha: f64,
    /// Short-term memory rate.
    pub beta: f64,
    /// Clause-violation level above which short-term memory grows.
    pub gamma: f64,
    /// Clause-violation level above which long-term memory grows.
    pub delta: f64,
    /// Keeps short-term memory from sticking at zero.
    pub epsilon: f64,
    /// Coupling of long-term memory into the rigidity term.
    pub zeta: f64,
    /// Weight of the corner-relaxation term built from the gate penalties.
    pub kappa: f64,
    /// Long-term memory is capped at this multiple of the clause count.
    pub x_long_scale: f64,
    /// Largest voltage change allowed in one step.
    pub dv_max: f64,
    /// Smallest step taken regardless of `dv_max`.
    pub dt_min: f64,
}

impl MemcomputingParams {
    /// Defaults for the signed-arithmetic column circuits of a linear
    /// system, which settle more reliably with a stronger rigidity coupling.
    pub fn linear() -> Self {
        Self {
            zeta: 3.0,
            ..Self::default()
        }
    }
}

impl Default for MemcomputingParams {
    fn default() -> Self {
        Self {
            alpha: 5.0,
            beta: 20.0,
            gamma: 0.25,
            delta: 0.05,
            epsilon: 1e-3,
            zeta: 1.0,
            kappa: 1.0,
            x_long_scale: 1e4,
            dv_max: 0.1,
            dt_min: 1.0 / 128.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Clause {
    len: usize,
    nodes: [usize; 3],
    /// Literal polarity: +1 for `v`, −1 for `¬v`.
    q: [f64; 3],
}

/// Clause expansion of one gate over its terminals `(x, y, o)`.
fn gate_clauses(kind: GateKind, [x, y, o]: [usize; 3]) -> Vec<Clause> {
    let c2 = |a: (usize, f64), b: (usize, f64)| Clause {
        len: 2,
        nodes: [a.0, b.0, 0],
        q: [a.1, b.1, 0.0],
    };
    let c3 = |a: (usize, f64), b: (usize, f64), c: (usize, f64)| Clause {
        len: 3,
        nodes: [a.0, b.0, c.0],
        q: [a.1, b.1, c.1],
    };
    let (p, n) = (1.0, -1.0);
    match kind {
        // o → x, o → y, x ∧ y → o
        GateKind::And => vec![c2((o, n), (x, p)), c2((o, n), (y, p)), c3((o, p), (x, n), (y, n))],
        // x → o, y → o, o → x ∨ y
        GateKind::Or => vec![c2((o, p), (x, n)), c2((o, p), (y, n)), c3((o, n), (x, p), (y, p))],
        GateKind::Xor => vec![
            c3((x, n), (y, n), (o, n)),
            c3((x, p), (y, p), (o, n)),
            c3((x, p), (y, n), (o, p)),
            c3((x, n), (y, p), (o, p)),
        ],
    }
}

/// Clause-level memcomputing dynamics with a corner-relaxation term.
///
/// Each gate is expanded into the CNF clauses of its truth table. For a
/// clause `m` with literals `q_j·v_j`, let `s_j = 1 − q_j·v_j` and
/// `C_m = ½·min_j s_j`. Then
///
/// ```text
/// dv_n/dt  = Σ_m [ x_l,m · x_s,m · G_n,m + (1 + ζ·x_l,m)(1 − x_s,m) · R_n,m ]
///            − κ · Σ_g ∂E_g/∂v_n
/// dx_s,m/dt = β · (x_s,m + ε) · (C_m − γ),   0 ≤ x_s ≤ 1
/// dx_l,m/dt = α · (C_m − δ),                 1 ≤ x_l ≤ x_long_scale·M
/// ```
///
/// with `G_n,m = ½·q_n·min_{j≠n} s_j` and `R_n,m = ½·(q_n − v_n)` when `n`
/// attains the minimum in `C_m`, zero otherwise. Memory is laid out as all
/// short-term entries followed by all long-term entries, and `M` is the
/// number of clauses. The κ term pulls
/// every terminal toward the nearest satisfying corner of its gates, which
/// is the sign pattern itself once every gate is satisfied.
#[derive(Debug, Clone)]
pub struct MemcomputingFlow {
    clauses: Vec<Clause>,
    gates: Vec<CompiledGate>,
    params: MemcomputingParams,
    x_long_cap: f64,
}

impl MemcomputingFlow {
    pub fn new(netlist: &Netlist, params: MemcomputingParams) -> Self {
        let clamps = netlist.clamp_table();
        let gates = compile_gates(netlist);
        // clauses already satisfied by a clamp never contribute
        let clauses = gates
            .iter()
            .flat_map(|g| gate_clauses(g.kind, g.nodes))
            .filter(|c| {
                !(0..c.len).any(|j| {
                    clamps[c.nodes[j]].is_some_and(|l| (l.voltage() > 0.0) == (c.q[j] > 0.0))
                })
            })
            .collect::<Vec<_>>();
        let x_long_cap = (params.x_long_scale * clauses.len() as f64).max(1.0);
        Self {
            clauses,
            gates,
            params,
            x_long_cap,
        }
    }

    pub fn clause_count(&self) -> usize {
        self.clauses.len()
    }

    pub fn params(&self) -> &MemcomputingParams {
        &self.params
    }
}

impl DynamicsModel for MemcomputingFlow {
    fn initial_memory(&self) -> Vec<f64> {
        let m = self.clauses.len();
        let mut x = vec![0.5; m];
        x.resize(2 * m, 1.0);
        x
    }

    fn rates(&self, v: &[f64], x: &[f64], dv: &mut [f64], dx: &mut [f64]) {
        let p = &self.params;
        let m = self.clauses.len();
        let (xs, xl) = x.split_at(m);
        let (dxs, dxl) = dx.split_at_mut(m);
        dv.fill(0.0);
        for (ci, c) in self.clauses.iter().enumerate() {
            let mut s = [f64::INFINITY; 3];
            let mut arg = 0;
            for j in 0..c.len {
                s[j] = 1.0 - c.q[j] * v[c.nodes[j]];
                if s[j] < s[arg] {
                    arg = j;
                }
            }
            let c_m = 0.5 * s[arg];
            let grad_w = xl[ci] * xs[ci];
            let rigid_w = (1.0 + p.zeta * xl[ci]) * (1.0 - xs[ci]);
            for j in 0..c.len {
                let others = (0..c.len)
                    .filter(|&k| k != j)
                    .map(|k| s[k])
                    .fold(f64::INFINITY, f64::min);
                let node = c.nodes[j];
                let mut rate = grad_w * 0.5 * c.q[j] * others;
                if j == arg {
                    rate += rigid_w * 0.5 * (c.q[j] - v[node]);
                }
                dv[node] += rate;
            }
            dxs[ci] = p.beta * (xs[ci] + p.epsilon) * (c_m - p.gamma);
            dxl[ci] = p.alpha * (c_m - p.delta);
        }
        if p.kappa > 0.0 {
            for g in &self.gates {
                let (_, grad) = gate_penalty_and_gradient(g.kind, gather(v, &g.nodes));
                for (k, &node) in g.nodes.iter().enumerate() {
                    dv[node] -= p.kappa * grad[k];
                }
            }
        }
    }

    fn clip_memory(&self, x: &mut [f64]) {
        let m = self.clauses.len();
        let (xs, xl) = x.split_at_mut(m);
        for w in xs {
            *w = w.clamp(0.0, 1.0);
        }
        for w in xl {
            *w = w.clamp(1.0, self.x_long_cap);
        }
    }

    fn step_limit(&self, _v: &[f64], _x: &[f64], dv: &[f64]) -> f64 {
        let fastest = dv.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
        if fastest > 0.0 {
            (self.params.dv_max / fastest).max(self.params.dt_min)
        } else {
            f64::INFINITY
        }
    }
}

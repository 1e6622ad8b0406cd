//! Continuous-time dynamics of a clamped netlist.
//!
//! Node voltages are driven by the clauses of the gates they touch, with
//! short- and long-term memory variables that grow for as long as a clause
//! stays violated. Gates are constraints rather than directed functions, so a
//! circuit built for the forward product runs equally well "backwards" from a
//! clamped output. The engine is generic over the vector field; see [`model`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod model;

pub use model::{
    gate_penalty, gate_penalty_and_gradient, DynamicsModel, GradientFlow, MemcomputingFlow,
    MemcomputingParams,
};

use crate::circuit::{reg, Netlist};
use crate::embedding::{
    classify_readout, verify_identity, DecodedSolution, EmbeddedInstance, EmbeddingLayout,
    ReadoutFlag,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("netlist has no register `{0}`")]
    MissingRegister(String),
}


/// Vector field selected by a [`SimConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    Memcomputing(MemcomputingParams),
    Gradient { gamma: f64, x_cap: f64 },
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Memcomputing(MemcomputingParams::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Convergence threshold on C(t).
    pub epsilon: f64,
    /// Simulated-time budget.
    pub t_max: f64,
    /// Upper bound on the step size.
    pub dt_initial: f64,
    pub seed: u64,
    /// Record every k-th accepted step in the trace.
    pub record_every: usize,
    /// Store the full voltage vector with each trace sample.
    pub record_voltages: bool,
    pub v_cap: f64,
    pub model: ModelConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            t_max: 1.0e5,
            dt_initial: 1.0,
            seed: 0,
            record_every: 20,
            record_voltages: false,
            v_cap: 1.0,
            model: ModelConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let mut checks = vec![
            (self.epsilon > 0.0, "epsilon must be positive"),
            (self.t_max > 0.0, "t_max must be positive"),
            (self.dt_initial > 0.0, "dt_initial must be positive"),
            (self.record_every >= 1, "record_every must be at least 1"),
            (self.v_cap >= 1.0, "v_cap must be at least 1"),
        ];
        match self.model {
            ModelConfig::Memcomputing(p) => checks.extend([
                (p.alpha > 0.0 && p.beta > 0.0, "memory rates must be positive"),
                (p.epsilon > 0.0, "short-term floor must be positive"),
                (p.kappa >= 0.0 && p.zeta >= 0.0, "couplings must be non-negative"),
                (p.x_long_scale > 0.0, "long-term memory scale must be positive"),
                (p.dv_max > 0.0 && p.dt_min > 0.0, "step bounds must be positive"),
            ]),
            ModelConfig::Gradient { gamma, x_cap } => checks.extend([
                (gamma >= 0.0, "gamma must be non-negative"),
                (x_cap >= 1.0, "x_cap must be at least 1"),
            ]),
        }
        match checks.into_iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(DynamicsError::InvalidConfig(msg.into())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    /// Per-node voltage.
    pub v: Vec<f64>,
    /// Memory variables; layout is up to the model.
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub c: f64,
    pub voltages: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub samples: Vec<TraceSample>,
}

impl Trace {
    fn push(&mut self, state: &SimState, c: f64, record_voltages: bool) {
        if self.samples.last().is_some_and(|s| s.t >= state.t) {
            return;
        }
        self.samples.push(TraceSample {
            t: state.t,
            c,
            voltages: record_voltages.then(|| state.v.clone()),
        });
    }
}

/// Either built-in model, chosen at runtime.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Memcomputing(MemcomputingFlow),
    Gradient(GradientFlow),
}

impl AnyModel {
    pub fn build(netlist: &Netlist, config: &ModelConfig) -> Self {
        match *config {
            ModelConfig::Memcomputing(p) => AnyModel::Memcomputing(MemcomputingFlow::new(netlist, p)),
            ModelConfig::Gradient { gamma, x_cap } => {
                AnyModel::Gradient(GradientFlow::new(netlist, gamma, x_cap))
            }
        }
    }

    fn inner(&self) -> &dyn DynamicsModel {
        match self {
            AnyModel::Memcomputing(m) => m,
            AnyModel::Gradient(m) => m,
        }
    }
}

impl DynamicsModel for AnyModel {
    fn initial_memory(&self) -> Vec<f64> {
        self.inner().initial_memory()
    }

    fn rates(&self, v: &[f64], x: &[f64], dv: &mut [f64], dx: &mut [f64]) {
        match self {
            AnyModel::Memcomputing(m) => m.rates(v, x, dv, dx),
            AnyModel::Gradient(m) => m.rates(v, x, dv, dx),
        }
    }

    fn clip_memory(&self, x: &mut [f64]) {
        self.inner().clip_memory(x)
    }

    fn step_limit(&self, v: &[f64], x: &[f64], dv: &[f64]) -> f64 {
        self.inner().step_limit(v, x, dv)
    }
}

/// Integrates one netlist under a dynamics model.
pub struct Simulator<'a, M: DynamicsModel = AnyModel> {
    netlist: &'a Netlist,
    model: M,
    config: SimConfig,
    clamp: Vec<Option<f64>>,
    terminal: Vec<bool>,
}

/// Outcome of integrating a netlist, before any register decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub converged: bool,
    pub t_c: Option<f64>,
    pub final_c: f64,
    pub steps: u64,
    pub state: SimState,
}

impl<'a> Simulator<'a, AnyModel> {
    pub fn new(netlist: &'a Netlist, config: SimConfig) -> Result<Self, DynamicsError> {
        config.validate()?;
        let model = AnyModel::build(netlist, &config.model);
        Self::with_model(netlist, config, model)
    }
}

impl<'a, M: DynamicsModel> Simulator<'a, M> {
    pub fn with_model(netlist: &'a Netlist, config: SimConfig, model: M) -> Result<Self, DynamicsError> {
        config.validate()?;
        Ok(Self {
            netlist,
            model,
            clamp: netlist
                .clamp_table()
                .into_iter()
                .map(|c| c.map(|l| l.voltage()))
                .collect(),
            terminal: netlist.terminal_mask(),
            config,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    /// Clamped nodes at their level, floating nodes uniform on (−1, 1),
    /// memories at the model's initial values.
    pub fn init_state(&self) -> SimState {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let v = self
            .clamp
            .iter()
            .map(|c| match c {
                Some(level) => *level,
                None => rng.gen_range(-1.0..1.0),
            })
            .collect();
        SimState {
            t: 0.0,
            v,
            x: self.model.initial_memory(),
        }
    }

    /// One explicit Euler step of size `dt`, ignoring the step limit.
    pub fn step(&self, state: &SimState, dt: f64) -> Result<SimState, DynamicsError> {
        let mut next = state.clone();
        let mut dv = vec![0.0; state.v.len()];
        let mut dx = vec![0.0; state.x.len()];
        self.rates(&next, &mut dv, &mut dx);
        self.apply(&mut next, dt, &dv, &dx)?;
        Ok(next)
    }

    /// Model rates with clamped nodes held still.
    fn rates(&self, state: &SimState, dv: &mut [f64], dx: &mut [f64]) {
        self.model.rates(&state.v, &state.x, dv, dx);
        for (d, c) in dv.iter_mut().zip(&self.clamp) {
            if c.is_some() {
                *d = 0.0;
            }
        }
    }

    /// Applies an Euler update. The state is left untouched if the update
    /// would be non-finite.
    fn apply(&self, state: &mut SimState, dt: f64, dv: &[f64], dx: &[f64]) -> Result<(), DynamicsError> {
        if dt == 0.0 {
            return Ok(());
        }
        let finite = state.v.iter().zip(dv).all(|(v, d)| (v + dt * d).is_finite())
            && state.x.iter().zip(dx).all(|(x, d)| (x + dt * d).is_finite());
        if !finite {
            return Err(DynamicsError::NonFinite { t: state.t });
        }
        let cap = self.config.v_cap;
        for (i, v) in state.v.iter_mut().enumerate() {
            *v = match self.clamp[i] {
                Some(level) => level,
                None => (*v + dt * dv[i]).clamp(-cap, cap),
            };
        }
        for (x, d) in state.x.iter_mut().zip(dx) {
            *x += dt * d;
        }
        self.model.clip_memory(&mut state.x);
        state.t += dt;
        Ok(())
    }

    /// `C = max_i min_{l ∈ {±1}} |v_i − l|` over gate-terminal nodes.
    pub fn convergence_metric(&self, state: &SimState) -> f64 {
        state
            .v
            .iter()
            .zip(&self.terminal)
            .filter(|(_, &t)| t)
            .map(|(v, _)| (v - 1.0).abs().min((v + 1.0).abs()))
            .fold(0.0, f64::max)
    }

    /// Whether thresholding every node gives an assignment that satisfies
    /// all gates and clamps.
    pub fn is_logically_consistent(&self, state: &SimState) -> bool {
        self.netlist.is_consistent(&threshold(&state.v))
    }

    /// Integrates until `C ≤ ε` with a logically consistent thresholded
    /// state, or until `t_max`.
    ///
    /// Each step is the smaller of `dt_initial`, the model's step limit and the
    /// remaining budget. A step that would turn the state non-finite is
    /// retried with half the size, and that reduced bound regrows by 10% per
    /// accepted step.
    pub fn run(&self) -> Result<(Trace, RunOutcome), DynamicsError> {
        let cfg = &self.config;
        let mut state = self.init_state();
        let mut trace = Trace::default();
        let mut dv = vec![0.0; state.v.len()];
        let mut dx = vec![0.0; state.x.len()];
        let mut bound = cfg.dt_initial;
        let mut steps: u64 = 0;
        let mut c = self.convergence_metric(&state);
        trace.push(&state, c, cfg.record_voltages);
        loop {
            let converged = c <= cfg.epsilon && self.is_logically_consistent(&state);
            if converged || state.t >= cfg.t_max {
                trace.push(&state, c, cfg.record_voltages);
                return Ok((
                    trace,
                    RunOutcome {
                        converged,
                        t_c: converged.then_some(state.t),
                        final_c: c,
                        steps,
                        state,
                    },
                ));
            }
            self.rates(&state, &mut dv, &mut dx);
            let limit = self.model.step_limit(&state.v, &state.x, &dv);
            let mut h = bound.min(limit).min(cfg.t_max - state.t);
            loop {
                match self.apply(&mut state, h, &dv, &dx) {
                    Ok(()) => break,
                    Err(DynamicsError::NonFinite { .. }) => {
                        h *= 0.5;
                        bound = h;
                        if h < 1e-12 {
                            return Err(DynamicsError::StepUnderflow { t: state.t });
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
            steps += 1;
            bound = (bound * 1.1).min(cfg.dt_initial);
            c = self.convergence_metric(&state);
            if steps.is_multiple_of(cfg.record_every as u64) {
                trace.push(&state, c, cfg.record_voltages);
            }
        }
    }
}

/// Boolean reading of voltages: strictly positive is 1, everything else
/// (including exactly 0) is 0.
pub fn threshold(v: &[f64]) -> Vec<bool> {
    v.iter().map(|&x| x > 0.0).collect()
}

/// Reads `b`, `b_f` and `c_f` off the thresholded state of an inversion circuit.
pub fn decode(
    state: &SimState,
    netlist: &Netlist,
    layout: &EmbeddingLayout,
) -> Result<DecodedSolution, DynamicsError> {
    let bits = threshold(&state.v);
    let read = |name: &str| {
        netlist
            .read_register(name, &bits)
            .ok_or_else(|| DynamicsError::MissingRegister(name.to_string()))
    };
    let b_hat = (read(reg::B)? << layout.n_b) + read(reg::B_F)?;
    Ok(DecodedSolution::from_parts(b_hat, read(reg::C_F)?, layout))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub t_c: Option<f64>,
    pub final_c: f64,
    pub decoded: Option<DecodedReport>,
    pub identity_ok: Option<bool>,
    pub readout_flag: Option<ReadoutFlag>,
    pub steps: u64,
    pub seed: u64,
}

/// Serializable view of a [`DecodedSolution`]; integers are decimal strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodedReport {
    pub b_hat: String,
    pub b_bits: String,
    pub b_f: String,
    pub c_f: String,
}

impl From<&DecodedSolution> for DecodedReport {
    fn from(s: &DecodedSolution) -> Self {
        Self {
            b_hat: s.b_hat.to_string(),
            b_bits: s.b_string(),
            b_f: s.b_f.to_string(),
            c_f: s.c_f.to_string(),
        }
    }
}

/// Full scalar solve: integrate, decode and check against the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Solve {
    pub trace: Trace,
    pub report: SolveReport,
    pub decoded: Option<DecodedSolution>,
    pub state: SimState,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Integrates a clamped inversion circuit and cross-checks the readout.
pub fn run(
    netlist: &Netlist,
    instance: &EmbeddedInstance,
    config: &SimConfig,
) -> Result<Solve, DynamicsError> {
    let sim = Simulator::new(netlist, config.clone())?;
    let (trace, outcome) = sim.run()?;
    let decoded = if outcome.converged {
        Some(decode(&outcome.state, netlist, &instance.layout)?)
    } else {
        None
    };
    let report = SolveReport {
        converged: outcome.converged,
        t_c: outcome.t_c,
        final_c: outcome.final_c,
        decoded: decoded.as_ref().map(DecodedReport::from),
        identity_ok: decoded.as_ref().map(|d| verify_identity(d, instance)),
        readout_flag: decoded.as_ref().and_then(|d| classify_readout(d, instance)),
        steps: outcome.steps,
        seed: config.seed,
    };
    Ok(Solve {
        trace,
        report,
        decoded,
        state: outcome.state,
    })
}

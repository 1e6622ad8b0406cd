//! 2×2 matrix inversion as two linear systems `A·x = e_j`.
//!
//! Every unknown is a sign bit plus an `n`-bit magnitude read as a fixed
//! point number `±X·2^−F`. The matrix entries are scaled to integers sharing
//! one exponent, so each equation becomes an integer identity
//!
//! ```text
//! Σ_l (±A_il)·(±X_l) = δ_ij·2^R + slack_i,    0 ≤ slack_i < 2^n_b
//! ```
//!
//! Each signed product is an array multiplier on the magnitudes, an XOR of
//! the two sign bits and a two's-complement stage; a ripple adder forms the
//! sum, whose low `n_b` bits are the slack register and whose remaining bits
//! are clamped to the right-hand side.

use num_bigint::{BigInt, BigUint, Sign as BigSign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{CircuitError, GateKind, Level, Netlist, NodeId};
use crate::dynamics::{threshold, DynamicsError, SimConfig, Simulator};
use crate::embedding::{pow2_rational, EmbeddingLayout, FixedPointScalar, Sign};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearError {
    #[error("matrix is singular")]
    Singular,
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

pub type Result<T> = std::result::Result<T, LinearError>;

type Rat2 = [[BigRational; 2]; 2];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix2 {
    pub entries: [[FixedPointScalar; 2]; 2],
}

impl Matrix2 {
    pub fn new(entries: [[FixedPointScalar; 2]; 2]) -> Self {
        Self { entries }
    }

    /// Integer matrix with every entry stored at the width of the largest
    /// magnitude.
    pub fn from_ints(m: [[i64; 2]; 2]) -> Self {
        let width = m
            .iter()
            .flatten()
            .map(|v| 64 - v.unsigned_abs().leading_zeros() as usize)
            .max()
            .unwrap_or(0)
            .max(1);
        Self::new(m.map(|row| row.map(|v| FixedPointScalar::from_integer(v, width))))
    }

    pub fn identity() -> Self {
        Self::from_ints([[1, 0], [0, 1]])
    }

    pub fn values(&self) -> Rat2 {
        self.entries.clone().map(|row| row.map(|e| e.value()))
    }

    pub fn determinant(&self) -> BigRational {
        let v = self.values();
        &v[0][0] * &v[1][1] - &v[0][1] * &v[1][0]
    }

    /// Exact inverse, or `None` when singular.
    pub fn inverse(&self) -> Option<Rat2> {
        let det = self.determinant();
        if det.is_zero() {
            return None;
        }
        let [[a, b], [c, d]] = self.values();
        Some([[&d / &det, -&b / &det], [-&c / &det, &a / &det]])
    }
}

/// Max absolute row sum.
pub fn inf_norm(m: &Rat2) -> BigRational {
    m.iter()
        .map(|row| row[0].abs() + row[1].abs())
        .max()
        .expect("two rows")
}

pub fn mat_mul(a: &Rat2, b: &Rat2) -> Rat2 {
    let cell = |i: usize, j: usize| &a[i][0] * &b[0][j] + &a[i][1] * &b[1][j];
    [[cell(0, 0), cell(0, 1)], [cell(1, 0), cell(1, 1)]]
}

fn identity_rat() -> Rat2 {
    let (o, z) = (BigRational::one(), BigRational::zero());
    [[o.clone(), z.clone()], [z, o]]
}

/// Integer form of a matrix: `value_ij = ints_ij · 2^exponent` with the
/// integers sharing no common factor of two.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegerScaling {
    pub ints: [[BigInt; 2]; 2],
    pub exponent: i64,
    /// Bits needed for the largest magnitude.
    pub width: usize,
}

impl IntegerScaling {
    pub fn of(a: &Matrix2) -> Self {
        let values = a.values();
        let mut exponent = a
            .entries
            .iter()
            .flatten()
            .filter(|e| !e.is_zero())
            .map(|e| e.exponent - e.width() as i64)
            .min()
            .unwrap_or(0);
        let scale = pow2_rational(-exponent);
        let mut ints = values.map(|row| {
            row.map(|v| {
                let s = v * &scale;
                debug_assert!(s.is_integer());
                s.to_integer()
            })
        });
        let two = BigInt::from(2);
        while ints.iter().flatten().any(|v| !v.is_zero())
            && ints.iter().flatten().all(|v| (v % &two).is_zero())
        {
            ints = ints.map(|row| row.map(|v| v / &two));
            exponent += 1;
        }
        let width = ints
            .iter()
            .flatten()
            .map(|v| v.magnitude().bits() as usize)
            .max()
            .unwrap_or(0)
            .max(1);
        Self {
            ints,
            exponent,
            width,
        }
    }
}

/// Smallest `k` with `|m_ij| < 2^k` for every entry.
fn magnitude_exponent(m: &Rat2) -> i64 {
    let max = m.iter().flatten().map(|v| v.abs()).max().expect("four entries");
    if max.is_zero() {
        return 0;
    }
    let mut k = 0i64;
    while max >= pow2_rational(k) {
        k += 1;
    }
    while max < pow2_rational(k - 1) {
        k -= 1;
    }
    k
}

/// Register names of a column system.
pub mod reg {
    pub const X_SIGN: [&str; 2] = ["x1_sign", "x2_sign"];
    pub const X: [&str; 2] = ["x1", "x2"];
    pub const SLACK: [&str; 2] = ["slack1", "slack2"];
}

/// Sign-magnitude product `(±a)·(±x)` as a two's-complement word of the
/// given width. `zero` must be a node clamped low; it fills structurally
/// empty product columns and the sign extension.
pub fn build_signed_product(
    net: &mut Netlist,
    a_mag: &[NodeId],
    a_sign: NodeId,
    x_mag: &[NodeId],
    x_sign: NodeId,
    width: usize,
    zero: NodeId,
) -> std::result::Result<Vec<NodeId>, CircuitError> {
    if width < a_mag.len() + x_mag.len() {
        return Err(CircuitError::LayoutMismatch(format!(
            "product of {}×{} bits does not fit in {width}",
            a_mag.len(),
            x_mag.len()
        )));
    }
    let mut product: Vec<NodeId> = net
        .build_multiplier(a_mag, x_mag)?
        .into_iter()
        .map(|b| b.unwrap_or(zero))
        .collect();
    product.resize(width, zero);
    let sign = net.add_gate(GateKind::Xor, a_sign, x_sign)?;
    net.build_twos_complement_stage(&product, sign)
}

/// The clamped circuit for one column of the inverse.
#[derive(Debug, Clone)]
pub struct ColumnSystem {
    pub column: usize,
    pub netlist: Netlist,
    pub scaling: IntegerScaling,
    /// Fractional bits of the unknowns: `x = ±X·2^−F`.
    pub frac_bits: i64,
    /// Right-hand side is `2^rhs_shift` in integer units.
    pub rhs_shift: i64,
    /// Two's-complement word width of the equation sums.
    pub sum_width: usize,
    pub layout: EmbeddingLayout,
}

/// Chooses `F` so the exact inverse fits the `n`-bit magnitudes.
fn fractional_bits(a: &Matrix2, layout: &EmbeddingLayout) -> Result<(IntegerScaling, i64, i64)> {
    let inv = a.inverse().ok_or(LinearError::Singular)?;
    let scaling = IntegerScaling::of(a);
    let frac_bits = layout.n as i64 - magnitude_exponent(&inv);
    let rhs_shift = frac_bits - scaling.exponent;
    if rhs_shift < layout.n_b as i64 {
        return Err(LinearError::LayoutMismatch(format!(
            "right-hand side needs {} low zero bits but the layout has {} slack bits; increase n",
            rhs_shift, layout.n_b
        )));
    }
    Ok((scaling, frac_bits, rhs_shift))
}

pub fn build_column_system(a: &Matrix2, column: usize, layout: EmbeddingLayout) -> Result<ColumnSystem> {
    if column > 1 {
        return Err(LinearError::LayoutMismatch(format!("column index {column} out of range")));
    }
    layout
        .validate()
        .map_err(|e| LinearError::LayoutMismatch(e.to_string()))?;
    let (scaling, frac_bits, rhs_shift) = fractional_bits(a, &layout)?;
    let (n, n_b) = (layout.n, layout.n_b);
    let sum_width = (scaling.width + n + 2).max(rhs_shift as usize + 2);

    let mut net = Netlist::new();
    let zero = net.add_node();
    net.clamp(zero, Level::Low)?;
    let mut unknowns = Vec::new();
    for l in 0..2 {
        let sign = net.add_node();
        let mag = net.add_nodes(n);
        net.set_register(reg::X_SIGN[l], vec![sign])?;
        net.set_register(reg::X[l], mag.clone())?;
        unknowns.push((sign, mag));
    }
    for i in 0..2 {
        let mut terms = Vec::new();
        for (l, (x_sign, x_mag)) in unknowns.iter().enumerate() {
            let entry = &scaling.ints[i][l];
            if entry.is_zero() {
                continue;
            }
            let a_mag = net.add_nodes(scaling.width);
            net.clamp_bits(&a_mag, entry.magnitude())?;
            let a_sign = net.add_node();
            net.clamp(a_sign, Level::from_bool(entry.sign() == BigSign::Minus))?;
            terms.push(build_signed_product(
                &mut net, &a_mag, a_sign, x_mag, *x_sign, sum_width, zero,
            )?);
        }
        let sum = match terms.as_slice() {
            [t] => t.clone(),
            [t, u] => net.build_ripple_adder(t, u)?,
            _ => unreachable!("a non-singular row has a non-zero entry"),
        };
        let rhs = if i == column {
            BigUint::one() << (rhs_shift as usize - n_b)
        } else {
            BigUint::zero()
        };
        net.clamp_bits(&sum[n_b..], &rhs)?;
        net.set_register(reg::SLACK[i], sum[..n_b].to_vec())?;
    }
    // a contradiction means no solution; leave it for the dynamics to find out
    let mut folded = net.clone();
    if folded.simplify().is_ok() {
        net = folded;
    }
    Ok(ColumnSystem {
        column,
        netlist: net,
        scaling,
        frac_bits,
        rhs_shift,
        sum_width,
        layout,
    })
}

/// Signed unknowns and slacks read off a Boolean assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnReadout {
    pub x: [FixedPointScalar; 2],
    pub slack: [BigUint; 2],
}

impl ColumnReadout {
    pub fn values(&self) -> [BigRational; 2] {
        self.x.clone().map(|e| e.value())
    }
}

impl ColumnSystem {
    pub fn read(&self, bits: &[bool]) -> ColumnReadout {
        let n = self.layout.n;
        let reg = |name: &str| {
            self.netlist
                .read_register(name, bits)
                .expect("column registers exist")
        };
        let x = [0, 1].map(|l| {
            let mag = reg(reg::X[l]);
            let sign = if mag.is_zero() {
                Sign::Pos
            } else {
                Sign::from_bit(!reg(reg::X_SIGN[l]).is_zero())
            };
            FixedPointScalar::from_mantissa_int(sign, n as i64 - self.frac_bits, &mag, n)
        });
        ColumnReadout {
            x,
            slack: [0, 1].map(|i| reg(reg::SLACK[i])),
        }
    }

    /// The exact solution as sign-magnitude registers, when representable.
    pub fn exact_readout(&self, inverse: &Rat2) -> Option<ColumnReadout> {
        let n = self.layout.n;
        let scale = pow2_rational(self.frac_bits);
        let x = [0, 1].map(|l| {
            let s = &inverse[l][self.column] * &scale;
            s.is_integer().then(|| {
                let mag = s.to_integer().magnitude().clone();
                let sign = if s.is_negative() { Sign::Neg } else { Sign::Pos };
                FixedPointScalar::from_mantissa_int(sign, n as i64 - self.frac_bits, &mag, n)
            })
        });
        let [Some(x0), Some(x1)] = x else { return None };
        Some(ColumnReadout {
            x: [x0, x1],
            slack: [BigUint::zero(), BigUint::zero()],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnReport {
    pub column: usize,
    pub converged: bool,
    pub t_c: Option<f64>,
    pub final_c: f64,
    pub steps: u64,
    /// Seed of the reported run.
    pub seed: u64,
    /// Runs made, the reported one included.
    pub attempts: u32,
    pub readout: Option<ColumnReadout>,
}

/// How the two column systems are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixInversion {
    pub columns: [ColumnReport; 2],
    /// Decoded inverse, present when both columns converged.
    pub x: Option<Matrix2>,
    /// `‖A·X − I‖∞` in exact arithmetic.
    pub residual: Option<BigRational>,
    /// `‖A‖∞·‖A⁻¹‖∞`.
    pub kappa_bound: BigRational,
    /// `2^(1−n)·κ_bound`.
    pub residual_bound: BigRational,
    pub frac_bits: i64,
}

impl MatrixInversion {
    pub fn converged(&self) -> bool {
        self.columns.iter().all(|c| c.converged)
    }

    pub fn within_bound(&self) -> Option<bool> {
        self.residual.as_ref().map(|r| r <= &self.residual_bound)
    }

    pub fn slack_is_zero(&self) -> bool {
        self.columns.iter().all(|c| {
            c.readout
                .as_ref()
                .is_some_and(|r| r.slack.iter().all(|s| s.is_zero()))
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rat = |r: &BigRational| r.to_string();
        let columns: Vec<_> = self
            .columns
            .iter()
            .map(|c| {
                serde_json::json!({
                    "column": c.column + 1,
                    "converged": c.converged,
                    "t_c": c.t_c,
                    "final_c": c.final_c,
                    "steps": c.steps,
                    "seed": c.seed,
                    "attempts": c.attempts,
                    "x": c.readout.as_ref().map(|r| r.values().iter().map(rat).collect::<Vec<_>>()),
                    "slack": c.readout.as_ref().map(|r| r.slack.iter().map(|s| s.to_string()).collect::<Vec<_>>()),
                })
            })
            .collect();
        serde_json::json!({
            "converged": self.converged(),
            "x": self.x.as_ref().map(|m| m.values().iter().map(|row| row.iter().map(rat).collect::<Vec<_>>()).collect::<Vec<_>>()),
            "residual": self.residual.as_ref().map(rat),
            "kappa_bound": rat(&self.kappa_bound),
            "residual_bound": rat(&self.residual_bound),
            "within_bound": self.within_bound(),
            "frac_bits": self.frac_bits,
            "columns": columns,
        })
    }
}

/// Runs the column with seeds `seed, seed + 1, …` until one converges or
/// `attempts` runs have been made.
fn solve_column(system: &ColumnSystem, config: &SimConfig, attempts: u32) -> Result<ColumnReport> {
    let mut tries = 0;
    loop {
        let seed = config.seed.wrapping_add(u64::from(tries));
        tries += 1;
        let sim = Simulator::new(&system.netlist, config.clone().with_seed(seed))?;
        let (_, outcome) = sim.run()?;
        if outcome.converged || tries >= attempts.max(1) {
            let readout = outcome
                .converged
                .then(|| system.read(&threshold(&outcome.state.v)));
            return Ok(ColumnReport {
                column: system.column,
                converged: outcome.converged,
                t_c: outcome.t_c,
                final_c: outcome.final_c,
                steps: outcome.steps,
                seed,
                attempts: tries,
                readout,
            });
        }
    }
}

/// Solves both columns, each with up to `attempts` seeds starting from the
/// configured one, and assembles the inverse.
pub fn invert_matrix(
    a: &Matrix2,
    layout: EmbeddingLayout,
    config: &SimConfig,
    execution: Execution,
    attempts: u32,
) -> Result<MatrixInversion> {
    let inverse = a.inverse().ok_or(LinearError::Singular)?;
    let systems = [
        build_column_system(a, 0, layout)?,
        build_column_system(a, 1, layout)?,
    ];
    let (r0, r1) = match execution {
        Execution::Parallel => rayon::join(
            || solve_column(&systems[0], config, attempts),
            || solve_column(&systems[1], config, attempts),
        ),
        Execution::Sequential => (
            solve_column(&systems[0], config, attempts),
            solve_column(&systems[1], config, attempts),
        ),
    };
    let columns = [r0?, r1?];
    let x = match (&columns[0].readout, &columns[1].readout) {
        (Some(c0), Some(c1)) => Some(Matrix2::new([
            [c0.x[0].clone(), c1.x[0].clone()],
            [c0.x[1].clone(), c1.x[1].clone()],
        ])),
        _ => None,
    };
    let values = a.values();
    let residual = x.as_ref().map(|x| {
        let mut r = mat_mul(&values, &x.values());
        for (i, row) in identity_rat().iter().enumerate() {
            for j in 0..2 {
                r[i][j] -= &row[j];
            }
        }
        inf_norm(&r)
    });
    let kappa_bound = inf_norm(&values) * inf_norm(&inverse);
    let residual_bound = pow2_rational(1 - layout.n as i64) * &kappa_bound;
    Ok(MatrixInversion {
        columns,
        x,
        residual,
        kappa_bound,
        residual_bound,
        frac_bits: systems[0].frac_bits,
    })
}

/// Decimal rendering of an exact rational, falling back to `p/q` when the
/// expansion does not terminate quickly.
pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        return r.to_integer().to_string();
    }
    match r.to_f64() {
        Some(f) if BigRational::from_float(f).as_ref() == Some(r) => f.to_string(),
        _ => r.to_string(),
    }
}

//! Exact integer embedding of fixed-point scalar inversion.
//!
//! A fixed-point quotient `b = c / a` is recast as the integer identity
//!
//! ```text
//! a · (b·2^n_b + b_f) = c·2^(n + n_b) + c_f
//! ```
//!
//! where `b_f` and `c_f` are free "satisfiability" registers of width `n_b`
//! and the `n` bits between `c` and `c_f` are the zero "consistency" bits.
//! Every check in this module runs on arbitrary-width integers.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmbeddingError {
    #[error("mantissa is all zeros and has no normalized form")]
    ZeroMantissa,
    #[error("divisor mantissa is zero")]
    DivisorZero,
    #[error("dividend mantissa is zero")]
    DividendZero,
    #[error("mantissa width {found} does not match layout width {expected}")]
    LayoutMismatch { expected: usize, found: usize },
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("operand is not normalized (leading mantissa bit must be 1)")]
    NotNormalized,
    #[error("slack c_f = {c_f} does not fit in {bits} satisfiability bits")]
    SlackOverflow { c_f: BigUint, bits: usize },
    #[error("quotient {b_hat} does not fit in {bits} bits")]
    QuotientOverflow { b_hat: BigUint, bits: usize },
    #[error("search space of {bits} bits exceeds the enumeration bound of {limit}")]
    TooLarge { bits: usize, limit: usize },
}

/// Sign of a fixed-point value; `Neg` is the set sign bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Sign::Neg
        } else {
            Sign::Pos
        }
    }

    pub fn bit(self) -> bool {
        self == Sign::Neg
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Pos => 1,
            Sign::Neg => -1,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Pos => "+",
            Sign::Neg => "-",
        })
    }
}

/// `sign · 2^exponent · 0.m_{n-1}…m_0`, mantissa stored most-significant bit first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FixedPointScalar {
    pub sign: Sign,
    pub exponent: i64,
    pub mantissa: Vec<bool>,
}

impl FixedPointScalar {
    pub fn new(sign: Sign, exponent: i64, mantissa: Vec<bool>) -> Self {
        Self {
            sign,
            exponent,
            mantissa,
        }
    }

    /// Builds a raw scalar whose mantissa is the `width`-bit pattern of `value`.
    ///
    /// Panics if `value` does not fit in `width` bits.
    pub fn from_mantissa_int(sign: Sign, exponent: i64, value: &BigUint, width: usize) -> Self {
        assert!(
            value.bits() as usize <= width,
            "{value} does not fit in {width} bits"
        );
        Self::new(sign, exponent, uint_to_bits_msb(value, width))
    }

    /// Parses a mantissa written as a string of `0`/`1` characters.
    pub fn from_bit_str(sign: Sign, exponent: i64, bits: &str) -> Option<Self> {
        let mantissa = bits
            .chars()
            .map(|ch| match ch {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Self::new(sign, exponent, mantissa))
    }

    /// An integer-valued scalar with the smallest exponent that keeps the
    /// `width`-bit mantissa exact. Panics if `|value| >= 2^width`.
    pub fn from_integer(value: i64, width: usize) -> Self {
        let sign = if value < 0 { Sign::Neg } else { Sign::Pos };
        let magnitude = BigUint::from(value.unsigned_abs());
        Self::from_mantissa_int(sign, width as i64, &magnitude, width)
    }

    pub fn width(&self) -> usize {
        self.mantissa.len()
    }

    /// The mantissa read as an unsigned integer.
    pub fn mantissa_int(&self) -> BigUint {
        bits_msb_to_uint(&self.mantissa)
    }

    pub fn is_normalized(&self) -> bool {
        self.mantissa.first().copied().unwrap_or(false)
    }

    pub fn is_zero(&self) -> bool {
        !self.mantissa.iter().any(|&b| b)
    }

    /// Exact rational value `sign · 2^exponent · mantissa_int / 2^n`.
    pub fn value(&self) -> BigRational {
        let shift = self.exponent - self.width() as i64;
        let mut v = BigRational::from_integer(self.mantissa_int().into());
        v *= pow2_rational(shift);
        if self.sign == Sign::Neg {
            -v
        } else {
            v
        }
    }

    pub fn mantissa_string(&self) -> String {
        self.mantissa
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Display for FixedPointScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}2^{}·0.{}",
            self.sign,
            self.exponent,
            self.mantissa_string()
        )
    }
}

/// Shifts the mantissa left until its leading bit is 1, lowering the
/// exponent by the shift count. The represented value is unchanged.
pub fn normalize(
    sign: Sign,
    exponent: i64,
    raw_mantissa: &[bool],
) -> Result<FixedPointScalar, EmbeddingError> {
    let lead = raw_mantissa
        .iter()
        .position(|&b| b)
        .ok_or(EmbeddingError::ZeroMantissa)?;
    let mut mantissa = raw_mantissa[lead..].to_vec();
    mantissa.resize(raw_mantissa.len(), false);
    Ok(FixedPointScalar::new(sign, exponent - lead as i64, mantissa))
}

/// Exponent of the quotient: `m_a + m_b = m_c`.
pub fn solve_exponent(m_a: i64, m_c: i64) -> i64 {
    m_c - m_a
}

/// Sign of `c / a`: the XOR of the two sign bits.
pub fn sign_of_quotient(s_a: Sign, s_c: Sign) -> Sign {
    Sign::from_bit(s_a.bit() ^ s_c.bit())
}

/// Register widths of the embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmbeddingLayout {
    /// Mantissa width.
    pub n: usize,
    /// Enhanced-precision zero padding on `a`; zero after reduction.
    pub n_a: usize,
    /// Satisfiability (floating) bits on `b` and `c`.
    pub n_b: usize,
}

impl EmbeddingLayout {
    pub fn new(n: usize, n_b: usize) -> Self {
        Self { n, n_a: 0, n_b }
    }

    pub fn with_precision_bits(n: usize, n_a: usize, n_b: usize) -> Self {
        Self { n, n_a, n_b }
    }

    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.n == 0 {
            return Err(EmbeddingError::InvalidLayout("n must be at least 1".into()));
        }
        if self.n_b > self.n {
            return Err(EmbeddingError::InvalidLayout(format!(
                "n_b = {} exceeds n = {}; n bits always suffice",
                self.n_b, self.n
            )));
        }
        Ok(())
    }

    /// Width of the unknown `b̂ = b·2^n_b + b_f`.
    pub fn quotient_bits(&self) -> usize {
        self.n + self.n_b
    }

    /// Width of the product register `c ‖ 0…0 ‖ c_f`.
    pub fn product_bits(&self) -> usize {
        2 * self.n + self.n_b
    }
}

/// Drops the enhanced-precision register; it never contributes significant
/// digits to `b`.
pub fn reduce_precision_bits(layout: EmbeddingLayout) -> EmbeddingLayout {
    EmbeddingLayout { n_a: 0, ..layout }
}

/// Whether operands must carry a leading one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OperandMode {
    Strict,
    #[default]
    Raw,
}

/// The integer problem `a_int · b̂ = c_int · 2^(n + n_b − dividend_shift) + c_f`.
///
/// `dividend_shift` is the number of places the dividend sits below the top
/// of the product register. It is zero whenever `c_int < a_int` and is chosen
/// minimal otherwise, so the quotient always fits in `n + n_b` bits. The
/// readout then carries an extra factor `2^dividend_shift`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddedInstance {
    pub a_int: BigUint,
    pub c_int: BigUint,
    pub dividend_shift: usize,
    pub layout: EmbeddingLayout,
}

impl EmbeddedInstance {
    /// Builds an instance directly from mantissa integers with the minimal
    /// dividend shift.
    pub fn from_ints(
        a_int: impl Into<BigUint>,
        c_int: impl Into<BigUint>,
        layout: EmbeddingLayout,
    ) -> Result<Self, EmbeddingError> {
        let (a_int, c_int) = (a_int.into(), c_int.into());
        layout.validate()?;
        if a_int.is_zero() {
            return Err(EmbeddingError::DivisorZero);
        }
        if c_int.is_zero() {
            return Err(EmbeddingError::DividendZero);
        }
        for v in [&a_int, &c_int] {
            if v.bits() as usize > layout.n {
                return Err(EmbeddingError::LayoutMismatch {
                    expected: layout.n,
                    found: v.bits() as usize,
                });
            }
        }
        let mut dividend_shift = 0;
        while c_int >= (&a_int << dividend_shift) {
            dividend_shift += 1;
        }
        Ok(Self {
            a_int,
            c_int,
            dividend_shift,
            layout,
        })
    }

    /// Same as [`EmbeddedInstance::from_ints`] but without the automatic
    /// dividend shift; used to exercise the oracle's overflow path.
    pub fn unshifted(a_int: u64, c_int: u64, layout: EmbeddingLayout) -> Self {
        Self {
            a_int: a_int.into(),
            c_int: c_int.into(),
            dividend_shift: 0,
            layout,
        }
    }

    /// `a · 2^n_a`, the divisor as it appears in the (possibly unreduced) product.
    pub fn divisor(&self) -> BigUint {
        &self.a_int << self.layout.n_a
    }

    /// Right-hand side constant `c · 2^(n + n_a + n_b − shift)`.
    pub fn dividend(&self) -> BigUint {
        let l = &self.layout;
        &self.c_int << (l.n + l.n_a + l.n_b - self.dividend_shift)
    }

    /// Width of `c_f` for this layout (`n_a + n_b` before reduction).
    pub fn slack_bits(&self) -> usize {
        self.layout.n_a + self.layout.n_b
    }

    /// The upper `2n` product bits: `c` followed by the consistency bits.
    pub fn upper_product(&self) -> BigUint {
        &self.c_int << (self.layout.n - self.dividend_shift)
    }

    /// Exponent of the quotient mantissa relative to the plain `m_c − m_a`.
    pub fn exponent_adjust(&self) -> i64 {
        self.dividend_shift as i64
    }
}

/// Reinterprets the mantissas of `a` and `c` as integers and forms the
/// embedded instance. In strict mode both operands must be normalized.
pub fn build_embedding(
    a: &FixedPointScalar,
    c: &FixedPointScalar,
    layout: EmbeddingLayout,
    mode: OperandMode,
) -> Result<EmbeddedInstance, EmbeddingError> {
    layout.validate()?;
    for operand in [a, c] {
        if operand.width() != layout.n {
            return Err(EmbeddingError::LayoutMismatch {
                expected: layout.n,
                found: operand.width(),
            });
        }
    }
    if a.is_zero() {
        return Err(EmbeddingError::DivisorZero);
    }
    if mode == OperandMode::Strict && !(a.is_normalized() && c.is_normalized()) {
        return Err(EmbeddingError::NotNormalized);
    }
    EmbeddedInstance::from_ints(a.mantissa_int(), c.mantissa_int(), layout)
}

/// A candidate assignment of the unknown registers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DecodedSolution {
    pub b_hat: BigUint,
    /// Top `n` bits of `b̂`, most significant first.
    pub b_bits: Vec<bool>,
    pub b_f: BigUint,
    pub c_f: BigUint,
}

impl DecodedSolution {
    /// Splits `b̂` into its readout and floating parts. Panics if `b̂` is
    /// wider than `n + n_b` bits.
    pub fn from_parts(b_hat: BigUint, c_f: BigUint, layout: &EmbeddingLayout) -> Self {
        let b_int = &b_hat >> layout.n_b;
        let b_f = &b_hat - (&b_int << layout.n_b);
        Self {
            b_bits: uint_to_bits_msb(&b_int, layout.n),
            b_hat,
            b_f,
            c_f,
        }
    }

    pub fn b_int(&self) -> BigUint {
        bits_msb_to_uint(&self.b_bits)
    }

    pub fn b_string(&self) -> String {
        self.b_bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// Minimal satisfying `b̂ = ⌈c·2^(n+n_b) / a⌉` together with its slack.
pub fn oracle_divide(instance: &EmbeddedInstance) -> Result<DecodedSolution, EmbeddingError> {
    let divisor = instance.divisor();
    if divisor.is_zero() {
        return Err(EmbeddingError::DivisorZero);
    }
    if instance.c_int.is_zero() {
        return Err(EmbeddingError::DividendZero);
    }
    let dividend = instance.dividend();
    let b_hat = Integer::div_ceil(&dividend, &divisor);
    let c_f = &divisor * &b_hat - &dividend;

    let q_bits = instance.layout.quotient_bits();
    if b_hat.bits() as usize > q_bits {
        return Err(EmbeddingError::QuotientOverflow {
            b_hat,
            bits: q_bits,
        });
    }
    let slack_bits = instance.slack_bits();
    if c_f.bits() as usize > slack_bits {
        return Err(EmbeddingError::SlackOverflow {
            c_f,
            bits: slack_bits,
        });
    }
    Ok(DecodedSolution::from_parts(b_hat, c_f, &instance.layout))
}

/// Checks `a·b̂ = c·2^(n+n_b) + c_f` exactly and that `b_f`, `c_f` fit their registers.
pub fn verify_identity(sol: &DecodedSolution, instance: &EmbeddedInstance) -> bool {
    let l = &instance.layout;
    let b_parts_ok = sol.b_bits.len() == l.n
        && (sol.b_int() << l.n_b) + &sol.b_f == sol.b_hat
        && (sol.b_f.bits() as usize) <= l.n_b;
    let c_f_ok = (sol.c_f.bits() as usize) <= instance.slack_bits();
    b_parts_ok && c_f_ok && instance.divisor() * &sol.b_hat == instance.dividend() + &sol.c_f
}

/// Tractability bound for [`enumerate_solutions`].
pub const ENUMERATION_LIMIT_BITS: usize = 24;

/// Every `(b̂, c_f)` pair satisfying the identity, by brute force over `b̂`.
pub fn enumerate_solutions(
    instance: &EmbeddedInstance,
) -> Result<BTreeSet<DecodedSolution>, EmbeddingError> {
    let l = &instance.layout;
    let q_bits = l.quotient_bits();
    if q_bits > ENUMERATION_LIMIT_BITS {
        return Err(EmbeddingError::TooLarge {
            bits: q_bits,
            limit: ENUMERATION_LIMIT_BITS,
        });
    }
    let a = instance.divisor();
    let rhs = instance.dividend();
    let slack_limit = BigUint::one() << instance.slack_bits();
    let mut out = BTreeSet::new();
    for b in 0u64..(1u64 << q_bits) {
        let b_hat = BigUint::from(b);
        let lhs = &a * &b_hat;
        if lhs < rhs {
            continue;
        }
        let c_f = lhs - &rhs;
        if c_f < slack_limit {
            out.insert(DecodedSolution::from_parts(b_hat, c_f, l));
        }
    }
    Ok(out)
}

/// How a readout relates to the exact truncated quotient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutFlag {
    Exact,
    PlusOneUlp,
}

impl fmt::Display for ReadoutFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReadoutFlag::Exact => "exact",
            ReadoutFlag::PlusOneUlp => "plus-one-ulp",
        })
    }
}

/// `⌊c · 2^(n − shift) / a⌋`: the exact quotient truncated to `n` bits.
pub fn truncated_quotient(instance: &EmbeddedInstance) -> BigUint {
    (&instance.c_int << (instance.layout.n - instance.dividend_shift)) / &instance.a_int
}

/// Compares the readout against the truncated quotient. `None` means the
/// readout is off by more than one unit in the last place.
pub fn classify_readout(sol: &DecodedSolution, instance: &EmbeddedInstance) -> Option<ReadoutFlag> {
    let exact = truncated_quotient(instance);
    let got = sol.b_int();
    if got == exact {
        Some(ReadoutFlag::Exact)
    } else if got == exact + 1u32 {
        Some(ReadoutFlag::PlusOneUlp)
    } else {
        None
    }
}

/// The quotient as a fixed-point scalar: mantissa `b_bits`, exponent
/// `m_c − m_a + dividend_shift`, sign from the operand signs.
pub fn quotient_scalar(
    sol: &DecodedSolution,
    instance: &EmbeddedInstance,
    a: &FixedPointScalar,
    c: &FixedPointScalar,
) -> FixedPointScalar {
    FixedPointScalar::new(
        sign_of_quotient(a.sign, c.sign),
        solve_exponent(a.exponent, c.exponent) + instance.exponent_adjust(),
        sol.b_bits.clone(),
    )
}

pub fn pow2_rational(exp: i64) -> BigRational {
    let p = BigRational::from_integer((BigUint::one() << exp.unsigned_abs()).into());
    if exp >= 0 {
        p
    } else {
        p.recip()
    }
}

/// `width` bits of `value`, most significant first.
pub fn uint_to_bits_msb(value: &BigUint, width: usize) -> Vec<bool> {
    (0..width).rev().map(|i| value.bit(i as u64)).collect()
}

pub fn bits_msb_to_uint(bits: &[bool]) -> BigUint {
    bits.iter().fold(BigUint::zero(), |acc, &b| {
        let acc = acc << 1;
        if b {
            acc + 1u32
        } else {
            acc
        }
    })
}

/// `width` bits of `value`, least significant first.
pub fn uint_to_bits_lsb(value: &BigUint, width: usize) -> Vec<bool> {
    (0..width).map(|i| value.bit(i as u64)).collect()
}

pub fn bits_lsb_to_uint(bits: &[bool]) -> BigUint {
    bits_msb_to_uint(&bits.iter().rev().copied().collect::<Vec<_>>())
}

/// Lossy conversion used only for reporting.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

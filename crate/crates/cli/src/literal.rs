//! Number literals accepted on the command line.

use std::ops::RangeInclusive;

use anyhow::{bail, Context, Result};

/// A signed integer written in decimal (`10`, `-3`) or binary (`0b01010`).
/// Binary literals also fix a width: the number of digits written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Literal {
    pub negative: bool,
    pub magnitude: u64,
    pub digits: Option<usize>,
}

impl Literal {
    pub fn parse(text: &str) -> Result<Self> {
        let (negative, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text.strip_prefix('+').unwrap_or(text)),
        };
        let (magnitude, digits) = match body.strip_prefix("0b").or_else(|| body.strip_prefix("0B")) {
            Some(bits) => {
                if bits.is_empty() {
                    bail!("empty binary literal `{text}`");
                }
                let m = u64::from_str_radix(bits, 2)
                    .with_context(|| format!("invalid binary literal `{text}`"))?;
                (m, Some(bits.len()))
            }
            None => (
                body.parse::<u64>()
                    .with_context(|| format!("invalid decimal literal `{text}`"))?,
                None,
            ),
        };
        Ok(Self {
            negative,
            magnitude,
            digits,
        })
    }

    /// Checks that the magnitude is an `n`-bit mantissa. Binary literals must
    /// be written with exactly `n` digits or fewer.
    pub fn mantissa(&self, n: usize) -> Result<u64> {
        if let Some(d) = self.digits {
            if d > n {
                bail!("binary literal has {d} digits but the mantissa width is {n}");
            }
        }
        if n < 64 && self.magnitude >> n != 0 {
            bail!("{} does not fit in {n} bits", self.magnitude);
        }
        Ok(self.magnitude)
    }

    pub fn signed(&self) -> Result<i64> {
        let m = i64::try_from(self.magnitude).context("literal out of range")?;
        Ok(if self.negative { -m } else { m })
    }
}

impl std::str::FromStr for Literal {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// `2..6`, `2..=6` or `2,3,5`.
pub fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    let range = |a: &str, b: &str| -> Result<RangeInclusive<usize>> {
        Ok(a.trim().parse()?..=b.trim().parse()?)
    };
    let sizes: Vec<usize> = if let Some((a, b)) = text.split_once("..=") {
        range(a, b)?.collect()
    } else if let Some((a, b)) = text.split_once("..") {
        range(a, b)?.collect()
    } else {
        text.split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("invalid size list `{text}`"))?
    };
    if sizes.is_empty() {
        bail!("size list `{text}` is empty");
    }
    Ok(sizes)
}

//! Reduced-precision arithmetic emulated inside host doubles.
//!
//! A [`Precision`] with `t` significand bits (implicit bit included) has
//! unit roundoff `u = 2^-t`, so numbers in `[1, 2)` are spaced `2u` apart.
//! The exponent range is unbounded: overflow, underflow and subnormals are
//! not modeled.
//!
//! Every operation rounds the *exact* result of the host operation (held as
//! an unevaluated `hi + lo` pair), so the recorded relative roundoff is the
//! true one even when the host sum itself would have been inexact.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::eft::{two_prod, two_sum};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FpError {
    #[error("significand bits must be in 1..=52, got {0}")]
    InvalidPrecision(u32),
    #[error("non-finite operand {0}")]
    NonFinite(f64),
    #[error("stochastic rounding requires a random stream")]
    MissingRng,
}

/// Emulated floating-point format, identified by its significand width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Precision {
    bits: u32,
}

impl Precision {
    pub const MAX_BITS: u32 = 52;
    /// bfloat16.
    pub const BFLOAT16: Precision = Precision { bits: 8 };
    /// IEEE binary16.
    pub const HALF: Precision = Precision { bits: 11 };
    /// IEEE binary32.
    pub const SINGLE: Precision = Precision { bits: 24 };

    pub fn new(bits: u32) -> Result<Self, FpError> {
        if bits == 0 || bits > Self::MAX_BITS {
            return Err(FpError::InvalidPrecision(bits));
        }
        Ok(Precision { bits })
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    /// `u = 2^-t`, exact.
    pub fn unit_roundoff(self) -> f64 {
        pow2(-(self.bits as i32))
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={}", self.bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RoundingMode {
    NearestTiesEven,
    Stochastic,
}

impl RoundingMode {
    /// Short tag used in CSV output.
    pub fn tag(self) -> &'static str {
        match self {
            RoundingMode::NearestTiesEven => "rtn",
            RoundingMode::Stochastic => "sr",
        }
    }

    /// Multiplier on `u` bounding a single roundoff: 1 for RTN, 2 for SR.
    pub fn bound_factor(self) -> f64 {
        match self {
            RoundingMode::NearestTiesEven => 1.0,
            RoundingMode::Stochastic => 2.0,
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag.trim().to_ascii_lowercase().as_str() {
            "rtn" | "nearest" => Some(RoundingMode::NearestTiesEven),
            "sr" | "stochastic" => Some(RoundingMode::Stochastic),
            _ => None,
        }
    }
}

impl fmt::Display for RoundingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Which arithmetic operation of which algorithm produced a roundoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpLabel {
    /// Internal tree node `k` (`2 ≤ k ≤ n`).
    NodeSum(usize),
    /// Shift subtraction `y_i = x_i - c` (`1 ≤ i ≤ n`).
    ShiftSub(usize),
    /// `y_{n+1} = n c`.
    ShiftMul,
    /// Final `t_n + y_{n+1}`.
    ShiftAdd,
    /// Compensated step `k`: `y_k = x_k - c_{k-1}` (roundoff η_k).
    CompY(usize),
    /// `s_k = s_{k-1} + y_k` (σ_k).
    CompS(usize),
    /// `z_k = s_k - s_{k-1}` (δ_k).
    CompZ(usize),
    /// `c_k = z_k - y_k` (β_k).
    CompC(usize),
}

impl fmt::Display for OpLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            OpLabel::NodeSum(k) => write!(f, "node{k}"),
            OpLabel::ShiftSub(i) => write!(f, "shift_sub{i}"),
            OpLabel::ShiftMul => f.write_str("shift_mul"),
            OpLabel::ShiftAdd => f.write_str("shift_add"),
            OpLabel::CompY(k) => write!(f, "y{k}"),
            OpLabel::CompS(k) => write!(f, "s{k}"),
            OpLabel::CompZ(k) => write!(f, "z{k}"),
            OpLabel::CompC(k) => write!(f, "c{k}"),
        }
    }
}

/// Realized relative error of one emulated operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundoffRecord {
    pub delta: f64,
    pub op: OpLabel,
    /// `u` under RTN, `2u` under SR.
    pub bound: f64,
}

impl RoundoffRecord {
    pub fn within_bound(&self) -> bool {
        self.delta.abs() <= self.bound
    }
}

/// Result of one emulated operation and its relative roundoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rounded {
    pub value: f64,
    pub delta: f64,
}

/// `2^k` for any `k` whose result is a normal double.
pub(crate) fn pow2(k: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&k));
    f64::from_bits(((k + 1023) as u64) << 52)
}

/// `x * 2^k`, exact whenever the result is normal.
fn scale(x: f64, k: i32) -> f64 {
    let mut x = x;
    let mut k = k;
    while k > 1000 {
        x *= pow2(1000);
        k -= 1000;
    }
    while k < -1000 {
        x *= pow2(-1000);
        k += 1000;
    }
    x * pow2(k)
}

/// `floor(log2 |x|)` for finite nonzero `x`.
fn exponent(x: f64) -> i32 {
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    if biased == 0 {
        exponent(x * pow2(64)) - 64
    } else {
        biased - 1023
    }
}

fn is_power_of_two(x: f64) -> bool {
    let x = if exponent(x) < -1000 {
        scale(x, 128)
    } else {
        x
    };
    x.to_bits() & ((1u64 << 52) - 1) == 0
}

/// Rounds the exact value `hi + lo` (with `|lo| <= ulp(hi)/2`) to `p`.
fn round_pair<R: Rng + ?Sized>(
    hi: f64,
    lo: f64,
    p: Precision,
    mode: RoundingMode,
    rng: Option<&mut R>,
) -> Result<f64, FpError> {
    if mode == RoundingMode::Stochastic && rng.is_none() {
        return Err(FpError::MissingRng);
    }
    if hi == 0.0 {
        return Ok(0.0);
    }
    let negative = hi < 0.0;
    let (hi, lo) = if negative { (-hi, -lo) } else { (hi, lo) };

    let mut e = exponent(hi);
    if lo < 0.0 && is_power_of_two(hi) {
        e -= 1;
    }
    // Significand scaled to an integer grid: representable values are integers.
    let shift = p.bits as i32 - 1 - e;
    let m_hi = scale(hi, shift);
    let m_lo = scale(lo, shift);
    let floor = m_hi.floor();
    let frac = m_hi - floor;

    let q = match mode {
        RoundingMode::NearestTiesEven => {
            let exact_tie = frac == 0.5 && m_lo == 0.0;
            let up = frac > 0.5 || (frac == 0.5 && m_lo > 0.0) || (exact_tie && floor % 2.0 != 0.0);
            if up {
                floor + 1.0
            } else {
                floor
            }
        }
        RoundingMode::Stochastic => {
            if frac == 0.0 && m_lo == 0.0 {
                floor
            } else {
                let mut low = floor;
                let mut up_prob = frac + m_lo;
                if up_prob < 0.0 {
                    low -= 1.0;
                    up_prob += 1.0;
                }
                let draw: f64 = rng.expect("checked above").random();
                if draw < up_prob {
                    low + 1.0
                } else {
                    low
                }
            }
        }
    };
    let r = scale(q, -shift);
    Ok(if negative { -r } else { r })
}

fn relative_error(result: f64, hi: f64, lo: f64) -> f64 {
    if hi == 0.0 {
        0.0
    } else {
        ((result - hi) - lo) / hi
    }
}

/// Rounds `x` to `p` significand bits.
///
/// Stochastic mode consumes exactly one uniform draw unless `x` is already
/// representable.
pub fn round_value<R: Rng + ?Sized>(
    x: f64,
    p: Precision,
    mode: RoundingMode,
    rng: Option<&mut R>,
) -> Result<f64, FpError> {
    if !x.is_finite() {
        return Err(FpError::NonFinite(x));
    }
    round_pair(x, 0.0, p, mode, rng)
}

/// A rounding mode bound to the random stream it needs.
#[derive(Debug, Clone)]
pub struct Rounder<R> {
    mode: RoundingMode,
    rng: Option<R>,
}

impl<R: Rng> Rounder<R> {
    pub fn new(mode: RoundingMode, rng: Option<R>) -> Result<Self, FpError> {
        if mode == RoundingMode::Stochastic && rng.is_none() {
            return Err(FpError::MissingRng);
        }
        Ok(Rounder { mode, rng })
    }

    pub fn nearest() -> Self {
        Rounder {
            mode: RoundingMode::NearestTiesEven,
            rng: None,
        }
    }

    pub fn stochastic(rng: R) -> Self {
        Rounder {
            mode: RoundingMode::Stochastic,
            rng: Some(rng),
        }
    }

    pub fn mode(&self) -> RoundingMode {
        self.mode
    }

    /// Bound on a single roundoff in precision `p` under this mode.
    pub fn roundoff_bound(&self, p: Precision) -> f64 {
        self.mode.bound_factor() * p.unit_roundoff()
    }

    pub fn round(&mut self, x: f64, p: Precision) -> Result<f64, FpError> {
        round_value(x, p, self.mode, self.rng.as_mut())
    }

    fn finish(&mut self, hi: f64, lo: f64, p: Precision) -> Result<Rounded, FpError> {
        let value = round_pair(hi, lo, p, self.mode, self.rng.as_mut())?;
        Ok(Rounded {
            value,
            delta: relative_error(value, hi, lo),
        })
    }

    pub fn add(&mut self, x: f64, y: f64, p: Precision) -> Result<Rounded, FpError> {
        check_finite(x, y)?;
        let (hi, lo) = two_sum(x, y);
        self.finish(hi, lo, p)
    }

    pub fn sub(&mut self, x: f64, y: f64, p: Precision) -> Result<Rounded, FpError> {
        check_finite(x, y)?;
        let (hi, lo) = two_sum(x, -y);
        self.finish(hi, lo, p)
    }

    pub fn mul(&mut self, x: f64, y: f64, p: Precision) -> Result<Rounded, FpError> {
        check_finite(x, y)?;
        let (hi, lo) = two_prod(x, y);
        self.finish(hi, lo, p)
    }
}

fn check_finite(x: f64, y: f64) -> Result<(), FpError> {
    if !x.is_finite() {
        return Err(FpError::NonFinite(x));
    }
    if !y.is_finite() {
        return Err(FpError::NonFinite(y));
    }
    Ok(())
}

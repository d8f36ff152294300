//! Scalar abstraction over exact rationals and 64-bit floats.
//!
//! Everything structural (chains, Möbius inversion, the decomposition
//! algorithm) is generic over [`Scalar`] so that callers pick either exact
//! rational arithmetic or floating point with explicit tolerances. The LP
//! layer is rational-only by design.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Number type usable throughout the crate.
///
/// `EXACT` scalars compare exactly; inexact ones use the tolerance passed at
/// each comparison site.
pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Zero
    + One
    + Neg<Output = Self>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Send
    + Sync
    + 'static
{
    const EXACT: bool;

    fn ratio(num: i64, den: i64) -> Self;
    fn approx(&self) -> f64;
    fn abs_val(&self) -> Self;

    fn from_usize_ratio(num: usize, den: usize) -> Self {
        Self::ratio(num as i64, den as i64)
    }

    /// |self| <= tol, with tol ignored in exact mode.
    fn is_zero_tol(&self, tol: f64) -> bool {
        if Self::EXACT {
            self.is_zero()
        } else {
            self.abs_val().approx() <= tol
        }
    }

    fn eq_tol(&self, other: &Self, tol: f64) -> bool {
        (self.clone() - other.clone()).is_zero_tol(tol)
    }

    /// self >= 0 up to tol in float mode.
    fn is_nonneg_tol(&self, tol: f64) -> bool {
        if Self::EXACT {
            !self.is_negative_scalar()
        } else {
            self.approx() >= -tol
        }
    }

    fn is_negative_scalar(&self) -> bool;

    /// Fast exact solver hook: rational scalars clear denominators and run
    /// fraction-free elimination over integers. `None` falls back to the
    /// generic float path.
    fn try_exact_solve(
        a: &crate::mat::Mat<Self>,
        b: &[Self],
    ) -> Option<crate::mat::SolveOutcome<Self>> {
        let _ = (a, b);
        None
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn approx(&self) -> f64 {
        *self
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }

    fn is_negative_scalar(&self) -> bool {
        *self < 0.0
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn approx(&self) -> f64 {
        self.to_f64().unwrap_or_else(|| {
            // Falls back to a coarse quotient when the exact conversion
            // overflows; only the sign and magnitude order matter here.
            let n = self.numer().to_f64().unwrap_or(f64::MAX);
            let d = self.denom().to_f64().unwrap_or(f64::MAX);
            n / d
        })
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }

    fn is_negative_scalar(&self) -> bool {
        self.is_negative()
    }

    fn try_exact_solve(
        a: &crate::mat::Mat<Self>,
        b: &[Self],
    ) -> Option<crate::mat::SolveOutcome<Self>> {
        Some(crate::mat::solve_system_fraction_free(a, b))
    }
}

/// Shorthand for a small rational constant.
pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `"3/4"`, `"0.25"`, `"-1.5e-2"`, or `"2"` into an exact rational.
///
/// Decimal strings convert exactly (digits over a power of ten), so `"0.3"`
/// is 3/10 rather than the nearest double.
pub fn parse_probability(text: &str) -> Result<BigRational> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::BadProbability(text.to_string()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| Error::BadProbability(text.to_string()))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| Error::BadProbability(text.to_string()))?;
        if d.is_zero() {
            return Err(Error::BadProbability(text.to_string()));
        }
        return Ok(BigRational::new(n, d));
    }
    parse_decimal(s).ok_or_else(|| Error::BadProbability(text.to_string()))
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    if !all.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let numer: BigInt = if all.is_empty() {
        BigInt::zero()
    } else {
        all.parse().ok()?
    };
    let scale = frac_part.len() as i32 - exp;
    let ten = BigInt::from(10);
    let mut value = BigRational::from_integer(numer * BigInt::from(sign));
    if scale > 0 {
        value /= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else if scale < 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(value)
}

/// Best rational approximation of `x` with denominator at most `max_den`,
/// via continued fractions.
pub fn snap_to_rational(x: f64, max_den: u64) -> Result<BigRational> {
    if !x.is_finite() {
        return Err(Error::BadProbability(format!("{x}")));
    }
    let negative = x < 0.0;
    let mut target = x.abs();
    // Convergents p/q of the continued fraction expansion.
    let (mut p0, mut q0, mut p1, mut q1) = (0u128, 1u128, 1u128, 0u128);
    for _ in 0..64 {
        let a = target.floor();
        if a > u64::MAX as f64 {
            break;
        }
        let a_int = a as u128;
        let p2 = a_int.saturating_mul(p1).saturating_add(p0);
        let q2 = a_int.saturating_mul(q1).saturating_add(q0);
        if q2 > max_den as u128 {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let frac = target - a;
        if frac < 1e-15 {
            break;
        }
        target = 1.0 / frac;
    }
    if q1 == 0 {
        return Err(Error::BadProbability(format!("{x}")));
    }
    let mut r = BigRational::new(BigInt::from(p1), BigInt::from(q1));
    if negative {
        r = -r;
    }
    Ok(r)
}

/// Converts a rational to the nearest double.
pub fn to_f64(r: &BigRational) -> f64 {
    Scalar::approx(r)
}

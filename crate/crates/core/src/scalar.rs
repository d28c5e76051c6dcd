//! Dual-mode number type: exact rationals for reference computations,
//! 64-bit floats for fast approximate runs. Every engine routine is generic
//! over [`Scalar`] so both modes share one code path.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{FromPrimitive, Signed, ToPrimitive, Zero};

use crate::error::Error;

/// Field operations plus the comparison hooks the engine needs.
///
/// In exact mode equality is literal; in float mode the `eq_within` hook
/// applies a relative tolerance. All identity checks go through these hooks
/// so the same assertion code serves both modes.
pub trait Scalar:
    Clone
    + PartialEq
    + PartialOrd
    + fmt::Debug
    + fmt::Display
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    /// True when arithmetic is exact and equality checks may demand `==`.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_int(v: i64) -> Self;
    /// num/den as a scalar; den must be nonzero.
    fn ratio(num: i64, den: i64) -> Self;
    /// Parses "p/q", plain integers, and decimal literals ("0.25", "-1.5e-3").
    fn parse_str(s: &str) -> Result<Self, Error>;

    fn is_zero(&self) -> bool;
    fn is_positive(&self) -> bool;
    fn abs(&self) -> Self;
    fn to_f64(&self) -> f64;

    /// Equality up to `tol * max(|scale|, 1)`; exact `==` in rational mode.
    fn eq_within(&self, other: &Self, tol: f64, scale: &Self) -> bool;

    /// Canonical text form: "p/q" (or "p") in exact mode, shortest float otherwise.
    fn render(&self) -> String;

    /// True when `render`/decimal output loses no information.
    fn renders_exactly(&self) -> bool;
}

/// Exact rational scalar used by all reference computations and tests.
pub type Rational = BigRational;

fn parse_decimal_rational(s: &str) -> Option<BigRational> {
    // Decimal with optional exponent, e.g. "-1.25e-3" -> -125/100 * 10^-3.
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().ok()?),
        None => (s, 0i64),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    if frac_part.contains(['+', '-']) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    if digits.is_empty() || digits == "-" || digits == "+" {
        return None;
    }
    let numer: BigInt = digits.parse().ok()?;
    let shift = exp - frac_part.len() as i64;
    let ten = BigInt::from(10);
    let scale = ten.pow(shift.unsigned_abs() as u32);
    Some(if shift >= 0 {
        BigRational::from_integer(numer * scale)
    } else {
        BigRational::new(numer, scale)
    })
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        <BigRational as num::One>::one()
    }
    fn from_int(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "rational with zero denominator");
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn parse_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let numer: BigInt = p
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
            let denom: BigInt = q
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
            if denom.is_zero() {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            return Ok(BigRational::new(numer, denom));
        }
        if let Ok(i) = s.parse::<BigInt>() {
            return Ok(BigRational::from_integer(i));
        }
        parse_decimal_rational(s).ok_or_else(|| Error::Parse(format!("unreadable number {s:?}")))
    }

    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn eq_within(&self, other: &Self, _tol: f64, _scale: &Self) -> bool {
        self == other
    }
    fn render(&self) -> String {
        if self.denom() == &BigInt::from(1) {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }
    fn renders_exactly(&self) -> bool {
        true
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_int(v: i64) -> Self {
        v as f64
    }
    fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "ratio with zero denominator");
        num as f64 / den as f64
    }
    fn parse_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let num: f64 = p
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
            let den: f64 = q
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
            if den == 0.0 {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            return Ok(num / den);
        }
        s.parse()
            .map_err(|_| Error::Parse(format!("unreadable number {s:?}")))
    }

    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn is_positive(&self) -> bool {
        *self > 0.0
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn eq_within(&self, other: &Self, tol: f64, scale: &Self) -> bool {
        let bound = tol * f64::max(f64::abs(*scale), 1.0);
        f64::abs(self - other) <= bound
    }
    fn render(&self) -> String {
        format!("{self}")
    }
    fn renders_exactly(&self) -> bool {
        false
    }
}

/// Density convention for conditional-moment ratios: 0/0 -> 0.
/// A zero denominator with nonzero numerator cannot occur for the ratios the
/// engine forms (Cauchy-Schwarz forces the numerator to vanish first), so the
/// zero branch only ever maps 0/0 to 0.
pub fn ratio_or_zero<T: Scalar>(num: T, den: &T) -> T {
    if den.is_zero() {
        T::zero()
    } else {
        num / den.clone()
    }
}

/// Identity-check comparison: exact equality in rational mode, relative
/// tolerance 1e-9 against the larger magnitude (floored at 1) in float mode.
pub fn agree<T: Scalar>(a: &T, b: &T) -> bool {
    if T::EXACT {
        a == b
    } else {
        let mut scale = T::one();
        if a.abs() > scale {
            scale = a.abs();
        }
        if b.abs() > scale {
            scale = b.abs();
        }
        a.eq_within(b, 1e-9, &scale)
    }
}

/// Whether a rational converts to `f64` without rounding; used by the CSV
/// emitter's exactness flag.
pub fn rational_fits_f64(value: &Rational) -> bool {
    let approx = Scalar::to_f64(value);
    if !approx.is_finite() {
        return false;
    }
    match BigRational::from_f64(approx) {
        Some(back) => &back == value,
        None => false,
    }
}

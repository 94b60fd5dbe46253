//! Scalar abstraction for probability masses and real values.

use std::cmp::Ordering;
use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

/// Numeric type usable as a probability mass or a program real.
///
/// Exact types keep field operations exact; transcendental functions go through `f64`.
pub trait Scalar:
    Clone + Debug + Display + PartialEq + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Whether `+ - * /` are exact.
    const EXACT: bool;

    fn total_cmp(&self, other: &Self) -> Ordering;

    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(Self::zero)
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_rational(r: &BigRational) -> Self;

    fn to_rational(&self) -> Option<BigRational>;

    fn exp(&self) -> Self {
        Self::from_f64_lossy(self.to_f64_lossy().exp())
    }

    fn ln(&self) -> Self {
        Self::from_f64_lossy(self.to_f64_lossy().ln())
    }

    fn sqrt(&self) -> Self {
        Self::from_f64_lossy(self.to_f64_lossy().sqrt())
    }

    fn is_finite(&self) -> bool {
        true
    }

    /// Sum with error compensation for floating types.
    fn sum_all<I: IntoIterator<Item = Self>>(iter: I) -> Self {
        iter.into_iter().fold(Self::zero(), |acc, x| acc + x)
    }

    fn max_of(a: Self, b: Self) -> Self {
        if a.total_cmp(&b) == Ordering::Less {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if a.total_cmp(&b) == Ordering::Greater {
            b
        } else {
            a
        }
    }

    /// Decimal rendering that round-trips through [`parse_decimal`] for exact types.
    fn to_decimal_string(&self) -> String;
}

/// Neumaier compensated summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in iter {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const EXACT: bool = false;

            fn total_cmp(&self, other: &Self) -> Ordering {
                <$t>::total_cmp(self, other)
            }

            fn from_rational(r: &BigRational) -> Self {
                rational_to_f64(r) as $t
            }

            fn to_rational(&self) -> Option<BigRational> {
                BigRational::from_float(*self)
            }

            fn exp(&self) -> Self {
                <$t>::exp(*self)
            }

            fn ln(&self) -> Self {
                <$t>::ln(*self)
            }

            fn sqrt(&self) -> Self {
                <$t>::sqrt(*self)
            }

            fn is_finite(&self) -> bool {
                <$t>::is_finite(*self)
            }

            fn sum_all<I: IntoIterator<Item = Self>>(iter: I) -> Self {
                neumaier_sum(iter.into_iter().map(|x| x as f64)) as $t
            }

            fn to_decimal_string(&self) -> String {
                format!("{:?}", self)
            }
        }
    };
}

float_scalar!(f64);
float_scalar!(f32);

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn total_cmp(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }

    fn from_f64_lossy(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(BigRational::zero)
    }

    fn to_f64_lossy(&self) -> f64 {
        rational_to_f64(self)
    }

    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }

    fn to_rational(&self) -> Option<BigRational> {
        Some(self.clone())
    }

    fn to_decimal_string(&self) -> String {
        rational_to_decimal(self, 40)
    }
}

/// Converts a rational to the nearest-ish `f64`, robust to huge numerators/denominators.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift = nb - db - 60;
    let scaled = if shift > 0 {
        r / BigRational::from_integer(BigInt::one() << shift as usize)
    } else {
        r * BigRational::from_integer(BigInt::one() << (-shift) as usize)
    };
    let q = scaled.to_integer().to_f64().unwrap_or(0.0);
    q * 2f64.powi(shift as i32)
}

/// Renders a rational as a decimal string; terminating expansions are exact, others are
/// truncated after `max_digits` fractional digits.
pub fn rational_to_decimal(r: &BigRational, max_digits: usize) -> String {
    let neg = r.is_negative();
    let r = r.abs();
    let int = r.to_integer();
    let mut rem = r - BigRational::from_integer(int.clone());
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push_str(&int.to_string());
    if rem.is_zero() {
        return out;
    }
    out.push('.');
    let ten = BigRational::from_integer(BigInt::from(10));
    for _ in 0..max_digits {
        rem = rem * ten.clone();
        let digit = rem.to_integer();
        out.push_str(&digit.to_string());
        rem = rem - BigRational::from_integer(digit);
        if rem.is_zero() {
            break;
        }
    }
    out
}

/// Whether a rational has a terminating decimal expansion.
pub fn is_terminating_decimal(r: &BigRational) -> bool {
    let mut d = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&d % &two).is_zero() {
        d /= &two;
    }
    while (&d % &five).is_zero() {
        d /= &five;
    }
    d.is_one()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid decimal literal `{0}`")]
pub struct DecimalError(pub String);

/// Parses `[-]digits[.digits][e[+-]digits]` exactly.
pub fn parse_decimal(s: &str) -> Result<BigRational, DecimalError> {
    let err = || DecimalError(s.to_string());
    let t = s.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (mant, exp) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], body[i + 1..].parse::<i32>().map_err(|_| err())?),
        None => (body, 0),
    };
    let (ip, fp) = match mant.find('.') {
        Some(i) => (&mant[..i], &mant[i + 1..]),
        None => (mant, ""),
    };
    if ip.is_empty() && fp.is_empty() {
        return Err(err());
    }
    if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{}{}", ip, fp);
    let n = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| err())?;
    let scale = exp - fp.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(n);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -r } else { r })
}

/// Exact rational from a small integer ratio.
pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

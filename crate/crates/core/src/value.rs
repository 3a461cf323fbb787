//! Exact rational distances.
//!
//! Every distance in the crate is a [`Value`], an arbitrary-precision
//! rational. Text input is limited to finite decimals (optionally with an
//! exponent) and `p/q` fractions, so parsing never rounds.

use std::sync::LazyLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::Error;

pub type Value = BigRational;

static ZERO: LazyLock<Value> = LazyLock::new(Value::zero);

/// Shared zero, handed out for diagonal lookups.
pub fn zero() -> &'static Value {
    &ZERO
}

pub fn int(v: i64) -> Value {
    Value::from_integer(BigInt::from(v))
}

pub fn ratio(numer: i64, denom: i64) -> Value {
    Value::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn half(v: &Value) -> Value {
    v / int(2)
}

/// Parses `12`, `-0.25`, `1.5e3`, `3/8`.
pub fn parse_value(text: &str) -> Result<Value, Error> {
    let bad = || Error::BadNumber(text.to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.parse().map_err(|_| bad())?;
        let q: BigInt = q.parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Value::new(p, q));
    }

    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = s[pos + 1..].parse().map_err(|_| bad())?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first() {
        Some(b'-') => (true, &mantissa[1..]),
        Some(b'+') => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let all_digits = format!("{whole}{frac}");
    let mut numer: BigInt = all_digits.parse().map_err(|_| bad())?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac.len() as i32;
    let ten = BigInt::from(10);
    let v = if scale >= 0 {
        Value::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Value::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(v)
}

/// Renders a value as an exact decimal when its expansion terminates and
/// as `p/q` otherwise. `parse_value(&format_value(v)) == v` always holds.
pub fn format_value(v: &Value) -> String {
    if v.is_integer() {
        return v.numer().to_string();
    }
    let denom = v.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut rest = denom.clone();
    let mut twos = 0usize;
    let mut fives = 0usize;
    while rest.is_even() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    if !rest.is_one() {
        return format!("{}/{}", v.numer(), denom);
    }
    let places = twos.max(fives);
    let scaled = v.numer() * num_traits::pow(BigInt::from(10), places) / denom;
    let negative = scaled.is_negative();
    let digits = scaled.abs().to_string();
    let digits = format!("{digits:0>width$}", width = places + 1);
    let (int_part, frac_part) = digits.split_at(digits.len() - places);
    let frac_part = frac_part.trim_end_matches('0');
    let sign = if negative { "-" } else { "" };
    format!("{sign}{int_part}.{frac_part}")
}

/// Lossy conversion for display and tolerance checks only.
pub fn to_f64(v: &Value) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

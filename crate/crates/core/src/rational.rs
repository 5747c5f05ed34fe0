//! Exact rational helpers shared by every stage.
//!
//! All LP values, partition masses and costs are [`Rational`]s. Text form is
//! either a decimal integer (`"7"`, `"-3"`) or a reduced fraction (`"4/3"`).

use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serializer};

pub type Rational = BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// Parses `"p"`, `"p/q"` or a finite decimal such as `"1.575"`; surrounding
/// whitespace is ignored.
pub fn parse(text: &str) -> Result<Rational, String> {
    let text = text.trim();
    if text.is_empty() {
        return Err("empty rational".to_string());
    }
    if let Some((n, d)) = text.split_once('/') {
        let n =
            BigInt::from_str(n.trim()).map_err(|e| format!("bad numerator in {text:?}: {e}"))?;
        let d =
            BigInt::from_str(d.trim()).map_err(|e| format!("bad denominator in {text:?}: {e}"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in {text:?}"));
        }
        Ok(Rational::new(n, d))
    } else if let Some((whole, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("bad decimal {text:?}"));
        }
        let digits = match whole {
            "" | "+" | "-" => format!("{whole}0{frac}"),
            _ => format!("{whole}{frac}"),
        };
        let n = BigInt::from_str(&digits).map_err(|e| format!("bad decimal {text:?}: {e}"))?;
        Ok(Rational::new(n, BigInt::from(10u32).pow(frac.len() as u32)))
    } else {
        BigInt::from_str(text)
            .map(Rational::from_integer)
            .map_err(|e| format!("bad rational {text:?}: {e}"))
    }
}

/// Canonical text form: `"p"` for integers, `"p/q"` otherwise.
pub fn format(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or_else(|| {
        // Huge numerators and denominators; fall back on a scaled division.
        let n = value.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = value.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

/// Decimal rendering with 15 significant digits, used for CSV output.
pub fn to_decimal(value: &Rational) -> String {
    format_f64(to_f64(value))
}

pub fn format_f64(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.14e}");
    // Re-parse through f64 to drop trailing zeros of the mantissa.
    let parsed: f64 = s.parse().unwrap_or(v);
    format!("{parsed}")
}

/// Smallest integer `t` with `value * 2^64 <= t`, clamped to `[0, 2^64]`.
///
/// A 64-bit uniform draw `u` satisfies `u / 2^64 < value` exactly when
/// `u < threshold(value)`.
pub fn threshold_u64(value: &Rational) -> u128 {
    if !value.is_positive() {
        return 0;
    }
    let scaled = value * Rational::from_integer(BigInt::one() << 64u32);
    let ceil = scaled.ceil().to_integer();
    let cap = BigInt::one() << 64u32;
    let clamped = if ceil > cap { cap } else { ceil };
    clamped.to_u128().expect("threshold fits in u128")
}

pub fn floor(value: &Rational) -> BigInt {
    value.numer().div_floor(value.denom())
}

/// Rounds `sqrt(n)` to the nearest integer (ties up).
pub fn round_sqrt(n: u128) -> u128 {
    let mut r = isqrt(n);
    // (r + 1/2)^2 <= n  <=>  (2r + 1)^2 <= 4n
    if (2 * r + 1) * (2 * r + 1) <= 4 * n {
        r += 1;
    }
    r
}

fn isqrt(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

pub mod serde_str {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}

pub mod serde_vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(values: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(values.len()))?;
        for v in values {
            seq.serialize_element(&format(v))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let texts = Vec::<String>::deserialize(d)?;
        texts
            .iter()
            .map(|t| parse(t).map_err(serde::de::Error::custom))
            .collect()
    }
}

pub mod serde_matrix {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(rows: &[Vec<Rational>], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(rows.len()))?;
        for row in rows {
            let texts: Vec<String> = row.iter().map(format).collect();
            seq.serialize_element(&texts)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Rational>>, D::Error> {
        let rows = Vec::<Vec<String>>::deserialize(d)?;
        rows.iter()
            .map(|row| {
                row.iter()
                    .map(|t| parse(t).map_err(serde::de::Error::custom))
                    .collect()
            })
            .collect()
    }
}

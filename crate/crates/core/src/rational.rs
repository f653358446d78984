//! Thin conveniences over `num-rational` with a fixed "num/den" wire format.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational scalar used throughout the crate.
pub type Ratio = BigRational;

pub fn zero() -> Ratio {
    Ratio::zero()
}

pub fn one() -> Ratio {
    Ratio::one()
}

pub fn from_int(n: i64) -> Ratio {
    Ratio::from_integer(BigInt::from(n))
}

pub fn from_frac(num: i64, den: i64) -> Ratio {
    Ratio::new(BigInt::from(num), BigInt::from(den))
}

/// Nearest f64; rationals beyond f64 range saturate to +-inf.
pub fn to_f64(r: &Ratio) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Canonical wire format: `"num/den"` in lowest terms, den > 0.
/// Integers still carry the denominator: `"3/1"`.
pub fn format_ratio(r: &Ratio) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Serde adapter: a `Ratio` field as its `"num/den"` wire string.
pub fn serialize_ratio<S: serde::Serializer>(
    r: &Ratio,
    ser: S,
) -> std::result::Result<S::Ok, S::Error> {
    ser.serialize_str(&format_ratio(r))
}

/// Serde adapter: an `Option<Ratio>` field as `"num/den"` or null.
pub fn serialize_opt_ratio<S: serde::Serializer>(
    r: &Option<Ratio>,
    ser: S,
) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => ser.serialize_some(&format_ratio(r)),
        None => ser.serialize_none(),
    }
}

/// Serde adapter inverse of [`serialize_ratio`].
pub fn deserialize_ratio<'de, D: serde::Deserializer<'de>>(
    de: D,
) -> std::result::Result<Ratio, D::Error> {
    use serde::Deserialize;
    let s = String::deserialize(de)?;
    parse_ratio(&s).map_err(serde::de::Error::custom)
}

/// Parses `"num/den"` or a bare integer `"num"`.
pub fn parse_ratio(s: &str) -> Result<Ratio> {
    let s = s.trim();
    let (num_s, den_s) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num_s
        .parse()
        .map_err(|_| Error::Argument(format!("bad rational numerator in {s:?}")))?;
    let den: BigInt = den_s
        .parse()
        .map_err(|_| Error::Argument(format!("bad rational denominator in {s:?}")))?;
    if den.is_zero() {
        return Err(Error::Argument(format!("zero denominator in {s:?}")));
    }
    Ok(Ratio::new(num, den))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_format_round_trips() {
        let r = from_frac(-6, 4);
        let s = format_ratio(&r);
        assert_eq!(s, "-3/2");
        assert_eq!(parse_ratio(&s).unwrap(), r);
        assert_eq!(parse_ratio("7").unwrap(), from_int(7));
        assert_eq!(parse_ratio(" 7 / 2 ").unwrap(), from_frac(7, 2));
    }

    #[test]
    fn zero_denominator_rejected() {
        assert!(parse_ratio("1/0").is_err());
        assert!(parse_ratio("x/2").is_err());
    }

    #[test]
    fn f64_conversion() {
        assert_eq!(to_f64(&from_frac(1, 4)), 0.25);
        assert_eq!(to_f64(&from_frac(-1, 2)), -0.5);
    }
}

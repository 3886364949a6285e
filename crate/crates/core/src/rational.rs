//! Exact rational numbers and their textual form.
//!
//! Every value that crosses a file boundary is written as a rational string:
//! `"3/4"`, `"-2"`, or `"0"`. On input, decimal notation (`"0.5"`, `"-1.25"`)
//! is also accepted and converted exactly.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Arbitrary-precision rational, always kept in lowest terms with a positive
/// denominator.
pub type Rational = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational literal {literal:?}: {reason}")]
pub struct ParseRationalError {
    pub literal: String,
    pub reason: &'static str,
}

fn bad(literal: &str, reason: &'static str) -> ParseRationalError {
    ParseRationalError {
        literal: literal.to_string(),
        reason,
    }
}

fn parse_int(digits: &str, literal: &str) -> Result<BigInt, ParseRationalError> {
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad(literal, "expected decimal digits"));
    }
    digits
        .parse::<BigInt>()
        .map_err(|_| bad(literal, "expected decimal digits"))
}

fn split_sign(s: &str) -> (bool, &str) {
    match s.as_bytes().first() {
        Some(b'-') => (true, &s[1..]),
        Some(b'+') => (false, &s[1..]),
        _ => (false, s),
    }
}

/// Parses `"p/q"`, `"p"` or a finite decimal `"i.f"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(bad(text, "empty"));
    }
    if s.len() > 4096 {
        return Err(bad(text, "literal too long"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let (neg, num) = split_sign(num.trim());
        let mut numer = parse_int(num, text)?;
        let den = parse_int(den.trim(), text)?;
        if den.is_zero() {
            return Err(bad(text, "zero denominator"));
        }
        if neg {
            numer = -numer;
        }
        return Ok(Rational::new(numer, den));
    }
    let (neg, body) = split_sign(s);
    let value = match body.split_once('.') {
        Some((int_part, frac_part)) => {
            if int_part.is_empty() && frac_part.is_empty() {
                return Err(bad(text, "no digits"));
            }
            let int = if int_part.is_empty() {
                BigInt::zero()
            } else {
                parse_int(int_part, text)?
            };
            let frac = if frac_part.is_empty() {
                BigInt::zero()
            } else {
                parse_int(frac_part, text)?
            };
            let scale = num_traits::pow(BigInt::from(10u32), frac_part.len());
            Rational::new(int * &scale + frac, scale)
        }
        None => Rational::from_integer(parse_int(body, text)?),
    };
    Ok(if neg { -value } else { value })
}

/// Canonical string form: `"p/q"` or `"p"` when the denominator is one.
pub fn format_rational(value: &Rational) -> String {
    value.to_string()
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Smallest integer `>= value`.
pub fn ceil_to_int(value: &Rational) -> BigInt {
    value.ceil().to_integer()
}

/// Exact square root if `value` is the square of a rational.
pub fn exact_sqrt(value: &Rational) -> Option<Rational> {
    if value.is_negative() {
        return None;
    }
    let n = value.numer();
    let d = value.denom();
    let rn = n.sqrt();
    let rd = d.sqrt();
    if &(&rn * &rn) == n && &(&rd * &rd) == d {
        Some(Rational::new(rn, rd))
    } else {
        None
    }
}

/// Exact binary expansion of a finite `f64`.
pub fn from_f64_exact(value: f64) -> Option<Rational> {
    Rational::from_float(value)
}

/// Nearest `f64` to an exact rational.
pub fn to_f64(value: &Rational) -> f64 {
    // Scale both parts down together so huge operands stay finite.
    let n = value.numer();
    let d = value.denom();
    let bits = n.bits().max(d.bits());
    if bits <= 1000 {
        return bigint_to_f64(n) / bigint_to_f64(d);
    }
    let shift = bits - 900;
    bigint_to_f64(&(n >> shift)) / bigint_to_f64(&(d >> shift))
}

fn bigint_to_f64(value: &BigInt) -> f64 {
    use num_traits::ToPrimitive;
    value.to_f64().unwrap_or(match value.sign() {
        Sign::Minus => f64::NEG_INFINITY,
        _ => f64::INFINITY,
    })
}

/// `2^exp` as a rational; negative exponents give `1/2^-exp`.
pub fn pow2(exp: i64) -> Rational {
    let base = num_traits::pow(BigInt::from(2u32), exp.unsigned_abs() as usize);
    if exp >= 0 {
        Rational::from_integer(base)
    } else {
        Rational::new(BigInt::one(), base)
    }
}

/// Least common multiple of the denominators.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

/// Serde adapter writing a [`Rational`] as its canonical string.
pub mod serde_str {
    use super::{format_rational, parse_rational, Rational};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        parse_rational(&text).map_err(D::Error::custom)
    }
}

/// Serde adapter for `Vec<Rational>`.
pub mod serde_str_vec {
    use super::{format_rational, parse_rational, Rational};
    use serde::{de::Error, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(values: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(values.len()))?;
        for v in values {
            seq.serialize_element(&format_rational(v))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let texts = Vec::<String>::deserialize(d)?;
        texts
            .iter()
            .map(|t| parse_rational(t).map_err(D::Error::custom))
            .collect()
    }
}

/// Serde adapter for `Vec<Vec<Rational>>`.
pub mod serde_str_matrix {
    use super::{format_rational, parse_rational, Rational};
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(rows: &[Vec<Rational>], s: S) -> Result<S::Ok, S::Error> {
        let texts: Vec<Vec<String>> = rows
            .iter()
            .map(|r| r.iter().map(format_rational).collect())
            .collect();
        texts.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Rational>>, D::Error> {
        let texts = Vec::<Vec<String>>::deserialize(d)?;
        texts
            .iter()
            .map(|row| {
                row.iter()
                    .map(|t| parse_rational(t).map_err(D::Error::custom))
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_integers_and_decimals() {
        assert_eq!(parse_rational("3/4").unwrap(), ratio(3, 4));
        assert_eq!(parse_rational("6/8").unwrap(), ratio(3, 4));
        assert_eq!(parse_rational("-1/3").unwrap(), ratio(-1, 3));
        assert_eq!(parse_rational("0.5").unwrap(), ratio(1, 2));
        assert_eq!(parse_rational("-1.25").unwrap(), ratio(-5, 4));
        assert_eq!(parse_rational(".125").unwrap(), ratio(1, 8));
        assert_eq!(parse_rational("2.").unwrap(), int(2));
        assert_eq!(parse_rational(" 7 ").unwrap(), int(7));
        assert_eq!(parse_rational("+7").unwrap(), int(7));
    }

    #[test]
    fn rejects_garbage() {
        for s in ["", "/", "1/0", "a", "1/-2", "1.2.3", "--1", ".", "1e3", "0x10", "1/2/3"] {
            assert!(parse_rational(s).is_err(), "{s:?} accepted");
        }
    }

    #[test]
    fn formats_in_lowest_terms() {
        assert_eq!(format_rational(&ratio(6, 8)), "3/4");
        assert_eq!(format_rational(&ratio(4, 2)), "2");
        assert_eq!(format_rational(&ratio(-3, 9)), "-1/3");
        assert_eq!(format_rational(&int(0)), "0");
    }

    #[test]
    fn exact_sqrt_only_for_squares() {
        assert_eq!(exact_sqrt(&ratio(9, 16)), Some(ratio(3, 4)));
        assert_eq!(exact_sqrt(&ratio(2, 1)), None);
        assert_eq!(exact_sqrt(&ratio(-1, 4)), None);
        assert_eq!(exact_sqrt(&int(0)), Some(int(0)));
    }

    #[test]
    fn pow2_both_signs() {
        assert_eq!(pow2(3), int(8));
        assert_eq!(pow2(-3), ratio(1, 8));
        assert_eq!(pow2(0), int(1));
    }

    #[test]
    fn to_f64_handles_huge_operands() {
        let huge = Rational::new(num_traits::pow(BigInt::from(3), 2000), num_traits::pow(BigInt::from(3), 2000) * 2);
        assert_eq!(to_f64(&huge), 0.5);
    }

    proptest::proptest! {
        #[test]
        fn format_parse_round_trip(n in -1_000_000i64..1_000_000, d in 1i64..1_000_000) {
            let r = ratio(n, d);
            proptest::prop_assert_eq!(parse_rational(&format_rational(&r)).unwrap(), r);
        }
    }
}

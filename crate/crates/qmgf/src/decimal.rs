//! Exact conversion between decimal text and rationals.
//!
//! Instance files carry plain JSON numbers; those are ingested via their
//! literal text so `0.05` becomes exactly 1/20, never a binary float.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::Rat;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecimalError {
    pub text: String,
    pub reason: &'static str,
}

impl std::fmt::Display for DecimalError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "bad decimal literal {:?}: {}", self.text, self.reason)
    }
}

impl std::error::Error for DecimalError {}

/// Parses decimal text (optional sign, optional fraction, optional exponent)
/// into an exact rational.
pub fn parse_decimal(text: &str) -> Result<Rat, DecimalError> {
    let err = |reason| DecimalError { text: text.to_string(), reason };
    let s = text.trim();
    if s.is_empty() {
        return Err(err("empty"));
    }

    let (mantissa, exp_part) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], Some(&s[i + 1..])),
        None => (s, None),
    };
    let exp: i64 = match exp_part {
        Some("") => return Err(err("empty exponent")),
        Some(e) => e.parse().map_err(|_| err("bad exponent"))?,
        None => 0,
    };

    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.find('.') {
        Some(i) => (&digits[..i], &digits[i + 1..]),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err("no digits"));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(err("non-digit in mantissa"));
    }

    let joined = format!("{int_part}{frac_part}");
    let unsigned: BigInt = joined.parse().map_err(|_| err("bad digits"))?;
    let numer = BigInt::from(sign) * unsigned;

    // value = numer * 10^(exp - frac_len)
    let shift = exp - frac_part.len() as i64;
    let pow = BigInt::from(10u8).pow(shift.unsigned_abs() as u32);
    Ok(if shift >= 0 {
        Rat::new(numer * pow, BigInt::one())
    } else {
        Rat::new(numer, pow)
    })
}

/// Smallest k such that value * 10^k is an integer, or `None` when the
/// reduced denominator has a prime factor other than 2 or 5.
pub fn pow10_exponent(value: &Rat) -> Option<u32> {
    let mut d = value.denom().clone();
    let two = BigInt::from(2u8);
    let five = BigInt::from(5u8);
    let mut twos = 0u32;
    let mut fives = 0u32;
    while d.is_multiple_of(&two) {
        d /= &two;
        twos += 1;
    }
    while d.is_multiple_of(&five) {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return None;
    }
    Some(twos.max(fives))
}

/// Renders a rational as exact decimal text, or `None` when its reduced
/// denominator has a prime factor other than 2 or 5 (non-terminating).
pub fn format_exact(value: &Rat) -> Option<String> {
    if value.is_zero() {
        return Some("0".to_string());
    }
    let denom = value.denom();
    let k = pow10_exponent(value)?;
    // numer * 10^k / denom is integral by construction
    let scaled = (value.numer() * BigInt::from(10u8).pow(k)) / denom;
    let mag = scaled.magnitude().to_string();
    let sign = if value.is_negative() { "-" } else { "" };
    let k = k as usize;
    let text = if k == 0 {
        mag
    } else if mag.len() > k {
        let (int, frac) = mag.split_at(mag.len() - k);
        format!("{int}.{frac}")
    } else {
        format!("0.{}{}", "0".repeat(k - mag.len()), mag)
    };
    let text = if text.contains('.') {
        text.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        text
    };
    Some(format!("{sign}{text}"))
}

/// Exact decimal when terminating, `numer/denom` fraction text otherwise.
pub fn format_rat(value: &Rat) -> String {
    format_exact(value).unwrap_or_else(|| format!("{}/{}", value.numer(), value.denom()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::FromPrimitive;

    fn rat(n: i64, d: i64) -> Rat {
        Rat::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn parses_plain_decimals_exactly() {
        assert_eq!(parse_decimal("0.05").unwrap(), rat(1, 20));
        assert_eq!(parse_decimal("1.0").unwrap(), rat(1, 1));
        assert_eq!(parse_decimal("-2.5").unwrap(), rat(-5, 2));
        assert_eq!(parse_decimal("0").unwrap(), rat(0, 1));
        assert_eq!(parse_decimal("12").unwrap(), rat(12, 1));
    }

    #[test]
    fn parses_exponent_forms() {
        assert_eq!(parse_decimal("1e-3").unwrap(), rat(1, 1000));
        assert_eq!(parse_decimal("2.5E2").unwrap(), rat(250, 1));
        assert_eq!(parse_decimal("-4e0").unwrap(), rat(-4, 1));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", ".", "e5", "1.2.3", "--1", "0x10", "1e"] {
            assert!(parse_decimal(bad).is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn formats_terminating_values() {
        assert_eq!(format_exact(&rat(1, 20)).unwrap(), "0.05");
        assert_eq!(format_exact(&rat(-5, 2)).unwrap(), "-2.5");
        assert_eq!(format_exact(&rat(3, 1)).unwrap(), "3");
        assert_eq!(format_exact(&rat(0, 1)).unwrap(), "0");
        assert_eq!(format_exact(&rat(9, 1000)).unwrap(), "0.009");
    }

    #[test]
    fn non_terminating_reported() {
        assert_eq!(format_exact(&rat(1, 3)), None);
        assert_eq!(format_rat(&rat(1, 3)), "1/3");
    }

    #[test]
    fn parse_format_round_trip() {
        for text in ["0.05", "1.5", "-0.009", "2000", "0.000125"] {
            let r = parse_decimal(text).unwrap();
            assert_eq!(format_exact(&r).unwrap(), text.trim_end_matches(".0"));
        }
        // f64 would already have mangled this one
        let fine = parse_decimal("0.1").unwrap();
        assert_ne!(fine, Rat::from_f64(0.1).unwrap());
    }
}

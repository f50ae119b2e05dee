//! Exact rational arithmetic helpers.
//!
//! All welfare, bid and payment values are carried as [`Rational`]
//! (arbitrary-precision `num/den`). Text rendering uses the canonical
//! `num/den` form (`5`, `-1/3`), which [`parse_rational`] reads back exactly.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

/// Builds `num/den` from machine integers. Panics on a zero denominator.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal {literal:?}: {reason}")]
pub struct RationalParseError {
    pub literal: String,
    pub reason: &'static str,
}

/// Parses `"7"`, `"-2/3"` or an exact decimal such as `"0.25"`.
pub fn parse_rational(literal: &str) -> Result<Rational, RationalParseError> {
    let err = |reason| RationalParseError {
        literal: literal.to_string(),
        reason,
    };
    let s = literal.trim();
    if s.is_empty() {
        return Err(err("empty"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| err("bad numerator"))?;
        let den: BigInt = den.trim().parse().map_err(|_| err("bad denominator"))?;
        if den.is_zero() {
            return Err(err("zero denominator"));
        }
        return Ok(Rational::new(num, den));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let negative = whole.starts_with('-');
        let digits = whole.trim_start_matches(['-', '+']);
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err("bad decimal fraction"));
        }
        if !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err("bad decimal integer part"));
        }
        let combined: BigInt = format!("{digits}{frac}")
            .parse()
            .map_err(|_| err("bad decimal"))?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let value = Rational::new(combined, scale);
        return Ok(if negative { -value } else { value });
    }
    let value: BigInt = s.parse().map_err(|_| err("not a number"))?;
    Ok(Rational::from_integer(value))
}

/// Canonical exact rendering (`num/den`, or just `num` for integers).
pub fn render_rational(value: &Rational) -> String {
    value.to_string()
}

/// Approximate decimal rendering with six fractional digits.
pub fn render_approx(value: &Rational) -> String {
    format!("{:.6}", to_f64(value))
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or_else(|| {
        if value.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_exactly() {
        assert_eq!(parse_rational("1/3").unwrap(), ratio(1, 3));
        assert_eq!(parse_rational("4/6").unwrap(), ratio(2, 3));
        assert_eq!(parse_rational("-7").unwrap(), int(-7));
    }

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_rational("0.25").unwrap(), ratio(1, 4));
        assert_eq!(parse_rational("-1.5").unwrap(), ratio(-3, 2));
        assert_eq!(parse_rational("2.0").unwrap(), int(2));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_rational("").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1.").is_err());
        assert!(parse_rational("1.2.3").is_err());
    }

    #[test]
    fn render_is_canonical() {
        assert_eq!(render_rational(&ratio(2, 4)), "1/2");
        assert_eq!(render_rational(&int(5)), "5");
        assert_eq!(render_rational(&ratio(-1, 3)), "-1/3");
        assert_eq!(render_approx(&ratio(1, 3)), "0.333333");
    }
}

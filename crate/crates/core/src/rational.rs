//! Exact rational values and their text form.
//!
//! Values are read from integers, `"p/q"` fractions, or finite decimals such as
//! `"-0.25"`, always exactly. They are written back as lowest-terms `"p/q"`
//! strings, with integers printed without the `/1`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseRationalError {
    Syntax,
    ZeroDenominator,
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn frac(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num = parse_int(num.trim())?;
        let den = parse_int(den.trim())?;
        if den.is_zero() {
            return Err(ParseRationalError::ZeroDenominator);
        }
        return Ok(Rational::new(num, den));
    }
    if let Some((whole, fraction)) = text.split_once('.') {
        let (negative, whole) = match whole.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, whole.strip_prefix('+').unwrap_or(whole)),
        };
        if whole.is_empty() && fraction.is_empty() {
            return Err(ParseRationalError::Syntax);
        }
        if !whole.bytes().all(|b| b.is_ascii_digit())
            || !fraction.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(ParseRationalError::Syntax);
        }
        let digits = format!("{whole}{fraction}");
        let mantissa: BigInt = if digits.is_empty() {
            BigInt::zero()
        } else {
            digits.parse().map_err(|_| ParseRationalError::Syntax)?
        };
        let scale = num_traits::pow(BigInt::from(10), fraction.len());
        let value = Rational::new(mantissa, scale);
        return Ok(if negative { -value } else { value });
    }
    Ok(Rational::from_integer(parse_int(text)?))
}

fn parse_int(text: &str) -> Result<BigInt, ParseRationalError> {
    let digits = text.strip_prefix(['-', '+']).unwrap_or(text);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseRationalError::Syntax);
    }
    text.parse().map_err(|_| ParseRationalError::Syntax)
}

pub fn format_rational(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

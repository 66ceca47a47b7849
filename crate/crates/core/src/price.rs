//! Exact currency amounts with two fractional digits.

use core::fmt;
use core::ops::{Add, Sub};
use core::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A currency amount stored as whole cents.
///
/// Serialized as a decimal string (`"8.50"`) so transcripts keep the exact
/// value; deserialization also accepts JSON numbers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Price(i64);

/// Largest accepted magnitude, in cents. Keeps every amount exactly
/// representable as an `f64` number of dollars.
const MAX_CENTS: i64 = 1_000_000_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParsePriceError {
    #[error("empty amount")]
    Empty,
    #[error("`{0}` is not a number")]
    NotNumeric(alloc::string::String),
    #[error("amount out of range")]
    OutOfRange,
}

impl Price {
    pub const ZERO: Price = Price(0);

    pub const fn from_cents(cents: i64) -> Self {
        Price(cents)
    }

    pub const fn cents(self) -> i64 {
        self.0
    }

    /// Whole-dollar amount.
    pub const fn dollars(dollars: i64) -> Self {
        Price(dollars * 100)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }

    /// Rounds a dollar value to the nearest cent, half away from zero.
    pub fn from_f64(value: f64) -> Option<Self> {
        if !value.is_finite() {
            return None;
        }
        let cents = round_half_away(value * 100.0)?;
        Some(Price(cents))
    }

    /// `fraction` of this amount, rounded to the nearest cent.
    pub fn scale(self, fraction: f64) -> Price {
        round_half_away(self.0 as f64 * fraction)
            .map(Price)
            .unwrap_or(self)
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn abs_diff(self, other: Price) -> Price {
        Price((self.0 - other.0).abs())
    }
}

fn round_half_away(value: f64) -> Option<i64> {
    if !value.is_finite() || value.abs() > MAX_CENTS as f64 {
        return None;
    }
    let truncated = value as i64;
    let frac = value - truncated as f64;
    let rounded = if frac >= 0.5 {
        truncated + 1
    } else if frac <= -0.5 {
        truncated - 1
    } else {
        truncated
    };
    Some(rounded)
}

impl Add for Price {
    type Output = Price;
    fn add(self, rhs: Price) -> Price {
        Price(self.0 + rhs.0)
    }
}

impl Sub for Price {
    type Output = Price;
    fn sub(self, rhs: Price) -> Price {
        Price(self.0 - rhs.0)
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{}{}.{:02}", sign, abs / 100, abs % 100)
    }
}

impl FromStr for Price {
    type Err = ParsePriceError;

    /// Accepts `8`, `8.5`, `$8.50`, `1,200.00` and `-3.10`. More than two
    /// fractional digits are rounded half-up.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        if trimmed.is_empty() {
            return Err(ParsePriceError::Empty);
        }
        let not_numeric = || ParsePriceError::NotNumeric(trimmed.into());
        let (negative, rest) = match trimmed.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, trimmed),
        };
        let rest = rest.strip_prefix('$').unwrap_or(rest).trim_start();
        let (int_part, frac_part) = match rest.split_once('.') {
            Some((i, f)) => (i, Some(f)),
            None => (rest, None),
        };
        if int_part.is_empty() && frac_part.is_none_or(str::is_empty) {
            return Err(not_numeric());
        }

        let mut whole: i64 = 0;
        let mut digits_since_comma: Option<usize> = None;
        for c in int_part.chars() {
            match c {
                '0'..='9' => {
                    whole = whole
                        .checked_mul(10)
                        .and_then(|w| w.checked_add(i64::from(c as u8 - b'0')))
                        .ok_or(ParsePriceError::OutOfRange)?;
                    if let Some(n) = digits_since_comma.as_mut() {
                        *n += 1;
                    }
                }
                ',' => {
                    if digits_since_comma.is_some_and(|n| n != 3) || whole == 0 {
                        return Err(not_numeric());
                    }
                    digits_since_comma = Some(0);
                }
                _ => return Err(not_numeric()),
            }
        }
        if digits_since_comma.is_some_and(|n| n != 3) {
            return Err(not_numeric());
        }

        let mut cents = 0i64;
        if let Some(frac) = frac_part {
            if !frac.chars().all(|c| c.is_ascii_digit()) {
                return Err(not_numeric());
            }
            let bytes = frac.as_bytes();
            let digit = |i: usize| bytes.get(i).map_or(0, |b| i64::from(b - b'0'));
            cents = digit(0) * 10 + digit(1);
            if digit(2) >= 5 {
                cents += 1;
            }
        }

        let total = whole
            .checked_mul(100)
            .and_then(|w| w.checked_add(cents))
            .filter(|t| *t <= MAX_CENTS)
            .ok_or(ParsePriceError::OutOfRange)?;
        Ok(Price(if negative { -total } else { total }))
    }
}

impl Serialize for Price {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Price {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct PriceVisitor;

        impl Visitor<'_> for PriceVisitor {
            type Value = Price;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a decimal amount as string or number")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Price, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Price, E> {
                Price::from_f64(v).ok_or_else(|| E::custom("amount out of range"))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Price, E> {
                v.checked_mul(100)
                    .map(Price)
                    .ok_or_else(|| E::custom("amount out of range"))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Price, E> {
                i64::try_from(v)
                    .ok()
                    .and_then(|v| v.checked_mul(100))
                    .map(Price)
                    .ok_or_else(|| E::custom("amount out of range"))
            }
        }

        deserializer.deserialize_any(PriceVisitor)
    }
}

//! Exact decimal currency amounts.
//!
//! Revenue figures must survive aggregation without binary floating-point
//! drift, so amounts are stored as integer ten-thousandths of a currency
//! unit. Model matrices convert to `f64` at the boundary via [`Money::to_f64`].

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of fractional decimal digits carried exactly.
const FRAC_DIGITS: u32 = 4;
const SCALE: i64 = 10_000;

/// A currency amount as a scaled integer (four exact decimal places).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    /// Amount in ten-thousandths of a unit.
    pub fn from_raw(raw: i64) -> Money {
        Money(raw)
    }

    /// Whole currency units.
    pub fn from_major(units: i64) -> Money {
        Money(units * SCALE)
    }

    pub fn raw(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    /// Exact product with an integer count. Panics on overflow, which is
    /// unreachable for realistic transaction magnitudes (the representable
    /// range tops out near 9e14 currency units).
    pub fn mul_count(self, count: i64) -> Money {
        Money(self.0.checked_mul(count).expect("money overflow"))
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0.checked_add(rhs.0).expect("money overflow"))
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        *self = *self + rhs;
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

/// Failure to read a decimal literal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseMoneyError(String);

impl fmt::Display for ParseMoneyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid decimal amount: {}", self.0)
    }
}

impl std::error::Error for ParseMoneyError {}

impl FromStr for Money {
    type Err = ParseMoneyError;

    fn from_str(s: &str) -> Result<Money, ParseMoneyError> {
        let t = s.trim();
        let err = || ParseMoneyError(s.to_string());
        if t.is_empty() {
            return Err(err());
        }
        let (neg, t) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (int_part, frac_part) = match t.split_once('.') {
            Some((i, f)) => (i, f),
            None => (t, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(err());
        }
        let whole: i64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| err())?
        };
        // Fractional digits beyond the carried precision must be zero;
        // silently rounding would violate exactness.
        let digits = FRAC_DIGITS as usize;
        if frac_part.len() > digits && frac_part[digits..].bytes().any(|b| b != b'0') {
            return Err(err());
        }
        let kept = &frac_part[..frac_part.len().min(digits)];
        let mut frac: i64 = if kept.is_empty() { 0 } else { kept.parse().map_err(|_| err())? };
        for _ in kept.len()..digits {
            frac *= 10;
        }
        let raw = whole.checked_mul(SCALE).and_then(|w| w.checked_add(frac)).ok_or_else(err)?;
        Ok(Money(if neg { -raw } else { raw }))
    }
}

impl fmt::Display for Money {
    /// Prints at least two decimal places, trailing zeros beyond that trimmed.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let raw = self.0;
        let sign = if raw < 0 { "-" } else { "" };
        let abs = raw.unsigned_abs();
        let whole = abs / SCALE as u64;
        let mut frac = format!("{:04}", abs % SCALE as u64);
        while frac.len() > 2 && frac.ends_with('0') {
            frac.pop();
        }
        write!(f, "{sign}{whole}.{frac}")
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Money, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

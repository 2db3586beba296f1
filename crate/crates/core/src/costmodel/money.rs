use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

const SCALE: i64 = 1_000_000;

/// A non-negative cost held in integer micro-units so sums are exact.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cost(i64);

impl Cost {
    pub const ZERO: Cost = Cost(0);

    pub const fn from_micros(micros: i64) -> Self {
        Cost(micros)
    }

    pub const fn units(n: i64) -> Self {
        Cost(n * SCALE)
    }

    pub fn micros(self) -> i64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }

    pub fn times(self, n: usize) -> Self {
        Cost(self.0 * n as i64)
    }
}

impl Add for Cost {
    type Output = Cost;
    fn add(self, rhs: Cost) -> Cost {
        Cost(self.0 + rhs.0)
    }
}

impl AddAssign for Cost {
    fn add_assign(&mut self, rhs: Cost) {
        self.0 += rhs.0;
    }
}

impl Sub for Cost {
    type Output = Cost;
    fn sub(self, rhs: Cost) -> Cost {
        Cost(self.0 - rhs.0)
    }
}

impl Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::ZERO, Add::add)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let whole = abs / SCALE as u64;
        let frac = abs % SCALE as u64;
        if frac == 0 {
            write!(f, "{sign}{whole}")
        } else {
            let digits = format!("{frac:06}");
            write!(f, "{sign}{whole}.{}", digits.trim_end_matches('0'))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostParseError(pub String);

impl fmt::Display for CostParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid cost {:?}", self.0)
    }
}

impl std::error::Error for CostParseError {}

/// Parses a plain or exponent decimal literal. Digits past the sixth
/// fractional place are rounded half-up.
impl FromStr for Cost {
    type Err = CostParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || CostParseError(s.to_string());
        let t = s.trim();
        if t.starts_with('-') {
            return Err(err());
        }
        let t = t.strip_prefix('+').unwrap_or(t);
        let (mantissa, exponent) = match t.find(['e', 'E']) {
            Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| err())?),
            None => (t, 0),
        };
        let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        let digits: String = format!("{int_part}{frac_part}");
        // value = digits * 10^(exponent - frac_len), scaled by 10^6
        let shift = exponent - frac_part.len() as i32 + 6;
        let digits = digits.trim_start_matches('0');
        if digits.is_empty() {
            return Ok(Cost::ZERO);
        }
        let micros: i128 = if shift >= 0 {
            let base: i128 = digits.parse().map_err(|_| err())?;
            base.checked_mul(10i128.checked_pow(shift as u32).ok_or_else(err)?)
                .ok_or_else(err)?
        } else {
            let cut = (-shift) as usize;
            if cut > digits.len() {
                // below a tenth of a micro-unit
                0
            } else {
                let (keep, dropped) = digits.split_at(digits.len() - cut);
                let base: i128 = if keep.is_empty() { 0 } else { keep.parse().map_err(|_| err())? };
                let round = dropped.as_bytes().first().is_some_and(|d| *d >= b'5');
                base + i128::from(round)
            }
        };
        i64::try_from(micros).map(Cost).map_err(|_| err())
    }
}

impl Serialize for Cost {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0 % SCALE == 0 {
            serializer.serialize_i64(self.0 / SCALE)
        } else {
            serializer.serialize_f64(self.as_f64())
        }
    }
}

impl<'de> Deserialize<'de> for Cost {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        // Go through the number's shortest decimal text to avoid binary
        // float error (0.1 stays exactly 100000 micro-units).
        let v = serde_json::Value::deserialize(deserializer)?;
        let text = match &v {
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::String(s) => s.clone(),
            other => return Err(serde::de::Error::custom(format!("cost must be a number, got {other}"))),
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

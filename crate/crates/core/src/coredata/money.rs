//! Satoshi/USD arithmetic.
//!
//! Money is carried as integer satoshi everywhere; dollar amounts only appear
//! at reporting boundaries, as integer cents produced by exact decimal
//! arithmetic with half-even rounding.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

pub const SAT_PER_BTC: u64 = 100_000_000;

/// A USD-per-BTC quote stored as an exact decimal `mantissa × 10^-scale`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Price {
    mantissa: u64,
    scale: u32,
}

impl Price {
    pub fn new(mantissa: u64, scale: u32) -> Result<Self, Error> {
        if mantissa == 0 {
            return Err(Error::InvalidField {
                field: "usd_per_btc",
                message: "price must be strictly positive".into(),
            });
        }
        if scale > 10 {
            return Err(Error::InvalidField {
                field: "usd_per_btc",
                message: format!("too many fractional digits ({scale})"),
            });
        }
        Ok(Price { mantissa, scale })
    }

    pub fn from_cents(cents: u64) -> Result<Self, Error> {
        Price::new(cents, 2)
    }

    pub fn as_f64(&self) -> f64 {
        self.mantissa as f64 / 10f64.powi(self.scale as i32)
    }
}

impl FromStr for Price {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::InvalidField {
            field: "usd_per_btc",
            message: format!("not a positive decimal: {s:?}"),
        };
        let s = s.trim();
        let (int, frac) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{int}{frac}");
        let mantissa: u64 = digits.parse().map_err(|_| bad())?;
        Price::new(mantissa, frac.len() as u32)
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pow = 10u64.pow(self.scale);
        if self.scale == 0 {
            write!(f, "{}", self.mantissa)
        } else {
            write!(
                f,
                "{}.{:0width$}",
                self.mantissa / pow,
                self.mantissa % pow,
                width = self.scale as usize
            )
        }
    }
}

/// A signed dollar amount in whole cents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Usd(i64);

impl Usd {
    pub const ZERO: Usd = Usd(0);

    pub fn from_cents(cents: i64) -> Self {
        Usd(cents)
    }

    pub fn cents(self) -> i64 {
        self.0
    }

    pub fn abs(self) -> Self {
        Usd(self.0.abs())
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Usd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

impl FromStr for Usd {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::InvalidField {
            field: "usd",
            message: format!("not a cent amount: {s:?}"),
        };
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, "00"));
        if frac.len() != 2 || int.is_empty() {
            return Err(bad());
        }
        let whole: i64 = int.parse().map_err(|_| bad())?;
        let cents: i64 = frac.parse().map_err(|_| bad())?;
        let v = whole * 100 + cents;
        Ok(Usd(if neg { -v } else { v }))
    }
}

impl Add for Usd {
    type Output = Usd;
    fn add(self, rhs: Usd) -> Usd {
        Usd(self.0 + rhs.0)
    }
}

impl AddAssign for Usd {
    fn add_assign(&mut self, rhs: Usd) {
        self.0 += rhs.0;
    }
}

impl Sub for Usd {
    type Output = Usd;
    fn sub(self, rhs: Usd) -> Usd {
        Usd(self.0 - rhs.0)
    }
}

impl Neg for Usd {
    type Output = Usd;
    fn neg(self) -> Usd {
        Usd(-self.0)
    }
}

impl Sum for Usd {
    fn sum<I: Iterator<Item = Usd>>(iter: I) -> Usd {
        iter.fold(Usd::ZERO, Add::add)
    }
}

impl Serialize for Usd {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Usd {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Rounds `num / den` to the nearest integer, ties to even. `den` must be positive.
pub(crate) fn div_round_half_even(num: i128, den: i128) -> i128 {
    debug_assert!(den > 0);
    let q = num.div_euclid(den);
    let r = num.rem_euclid(den);
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Equal => q + (q & 1),
    }
}

/// Converts `sat_num / sat_den` satoshi to cents at `price`.
///
/// Used for aggregates that are not whole satoshi (means, per-transaction rates).
pub fn usd_of_ratio(sat_num: i128, sat_den: i128, price: Price) -> Usd {
    assert!(sat_den > 0, "denominator must be positive");
    // cents = sat * mantissa * 100 / (1e8 * 10^scale)
    let num = sat_num * price.mantissa as i128;
    let den = sat_den * 10i128.pow(6 + price.scale);
    Usd(div_round_half_even(num, den) as i64)
}

pub fn usd_of_signed(sat: i64, price: Price) -> Usd {
    usd_of_ratio(sat as i128, 1, price)
}

pub fn usd_of(sat: u64, price: Price) -> Usd {
    usd_of_ratio(sat as i128, 1, price)
}

/// Converts each satoshi amount at its own quote and rounds the exact total
/// once, so a sum over days carries no per-day rounding.
pub fn usd_of_priced_sum(items: impl IntoIterator<Item = (i64, Price)>) -> Usd {
    const SCALE: u32 = 10;
    let num: i128 = items
        .into_iter()
        .map(|(sat, p)| sat as i128 * p.mantissa as i128 * 10i128.pow(SCALE - p.scale))
        .sum();
    Usd(div_round_half_even(num, 10i128.pow(6 + SCALE)) as i64)
}

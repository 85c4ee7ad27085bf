//! Fixed-point money types.
//!
//! Every monetary quantity is an unsigned integer with an implied decimal
//! scale:
//!
//! | type       | scale  | example            |
//! |------------|--------|--------------------|
//! | [`Amount`]   | 10^6   | `12.500000` units  |
//! | [`Price`]    | 10^4   | `8.5000` per unit  |
//! | [`Fraction`] | 10^6   | `0.800000`         |
//!
//! Amounts are used for token balances and quote-currency notionals alike.
//! No floating point value ever enters a balance.

use std::fmt;
use std::ops::{Add, AddAssign, Sub, SubAssign};
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Minor units per whole token unit.
pub const AMOUNT_SCALE: u64 = 1_000_000;
/// Price ticks per whole quote unit.
pub const PRICE_SCALE: u64 = 10_000;
/// Fraction ticks per 1.0.
pub const FRACTION_SCALE: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseFixedError {
    #[error("empty decimal")]
    Empty,
    #[error("invalid decimal `{0}`")]
    Invalid(String),
    #[error("`{0}` has more than {1} decimal places")]
    TooPrecise(String, u32),
    #[error("`{0}` is out of range")]
    Overflow(String),
}

/// Integer division rounding half to even.
pub fn div_round_half_even(num: u128, den: u128) -> u128 {
    assert!(den != 0, "division by zero");
    let q = num / den;
    let r = num % den;
    let twice = r * 2;
    if twice > den || (twice == den && q % 2 == 1) {
        q + 1
    } else {
        q
    }
}

fn parse_scaled(s: &str, places: u32) -> Result<u64, ParseFixedError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(ParseFixedError::Empty);
    }
    let s_clean: String = s.chars().filter(|c| *c != '_').collect();
    let (int_part, frac_part) = match s_clean.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s_clean.as_str(), ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(ParseFixedError::Invalid(s.to_string()));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(ParseFixedError::Invalid(s.to_string()));
    }
    let trimmed = frac_part.trim_end_matches('0');
    if trimmed.len() > places as usize {
        return Err(ParseFixedError::TooPrecise(s.to_string(), places));
    }
    let scale = 10u128.pow(places);
    let int: u128 = if int_part.is_empty() {
        0
    } else {
        int_part
            .parse::<u128>()
            .map_err(|_| ParseFixedError::Overflow(s.to_string()))?
    };
    let mut frac: u128 = 0;
    for (i, c) in trimmed.chars().enumerate() {
        frac += (c as u128 - '0' as u128) * 10u128.pow(places - 1 - i as u32);
    }
    let total = int
        .checked_mul(scale)
        .and_then(|v| v.checked_add(frac))
        .ok_or_else(|| ParseFixedError::Overflow(s.to_string()))?;
    u64::try_from(total).map_err(|_| ParseFixedError::Overflow(s.to_string()))
}

fn fmt_scaled(f: &mut fmt::Formatter<'_>, raw: u64, scale: u64, places: usize) -> fmt::Result {
    write!(f, "{}.{:0width$}", raw / scale, raw % scale, width = places)
}

struct FixedVisitor {
    places: u32,
    expecting: &'static str,
}

impl Visitor<'_> for FixedVisitor {
    type Value = u64;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(self.expecting)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<u64, E> {
        parse_scaled(v, self.places).map_err(E::custom)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<u64, E> {
        v.checked_mul(10u64.pow(self.places))
            .ok_or_else(|| E::custom(format!("{v} is out of range")))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<u64, E> {
        let v = u64::try_from(v).map_err(|_| E::custom("negative value"))?;
        self.visit_u64(v)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<u64, E> {
        if !v.is_finite() || v < 0.0 {
            return Err(E::custom("expected a finite non-negative number"));
        }
        parse_scaled(&v.to_string(), self.places).map_err(E::custom)
    }
}

macro_rules! fixed_type {
    ($name:ident, $scale:expr, $places:expr, $expecting:expr) => {
        impl $name {
            pub const ZERO: $name = $name(0);
            pub const SCALE: u64 = $scale;
            pub const PLACES: u32 = $places;

            pub const fn from_raw(raw: u64) -> Self {
                $name(raw)
            }

            pub const fn raw(self) -> u64 {
                self.0
            }

            /// Whole units, no fractional part.
            pub fn from_units(units: u64) -> Self {
                $name(units.checked_mul($scale).expect("fixed-point overflow"))
            }

            pub fn is_zero(self) -> bool {
                self.0 == 0
            }

            pub fn checked_add(self, rhs: Self) -> Option<Self> {
                self.0.checked_add(rhs.0).map($name)
            }

            pub fn checked_sub(self, rhs: Self) -> Option<Self> {
                self.0.checked_sub(rhs.0).map($name)
            }

            pub fn saturating_sub(self, rhs: Self) -> Self {
                $name(self.0.saturating_sub(rhs.0))
            }

            pub fn to_f64(self) -> f64 {
                self.0 as f64 / $scale as f64
            }

            /// Nearest representable value, ties to even. `None` for negative,
            /// non-finite or out-of-range input.
            pub fn from_f64(v: f64) -> Option<Self> {
                if !v.is_finite() || v < 0.0 {
                    return None;
                }
                let scaled = (v * $scale as f64).round_ties_even();
                if scaled > u64::MAX as f64 {
                    return None;
                }
                Some($name(scaled as u64))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt_scaled(f, self.0, $scale, $places)
            }
        }

        impl FromStr for $name {
            type Err = ParseFixedError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                parse_scaled(s, $places).map($name)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                d.deserialize_any(FixedVisitor {
                    places: $places,
                    expecting: $expecting,
                })
                .map($name)
            }
        }
    };
}

/// Token or quote-currency quantity in millionths of a unit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Amount(u64);

/// Quote-currency price per whole token unit, four decimal places.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Price(u64);

/// Non-negative ratio with six decimal places. Values above 1 are allowed
/// (an over-reserved token has a reserve rate above 1).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fraction(u64);

fixed_type!(Amount, AMOUNT_SCALE, 6, "a decimal amount with at most 6 places");
fixed_type!(Price, PRICE_SCALE, 4, "a decimal price with at most 4 places");
fixed_type!(Fraction, FRACTION_SCALE, 6, "a decimal fraction with at most 6 places");

impl Add for Amount {
    type Output = Amount;
    fn add(self, rhs: Amount) -> Amount {
        self.checked_add(rhs).expect("amount overflow")
    }
}

impl AddAssign for Amount {
    fn add_assign(&mut self, rhs: Amount) {
        *self = *self + rhs;
    }
}

impl Sub for Amount {
    type Output = Amount;
    fn sub(self, rhs: Amount) -> Amount {
        self.checked_sub(rhs).expect("amount underflow")
    }
}

impl SubAssign for Amount {
    fn sub_assign(&mut self, rhs: Amount) {
        *self = *self - rhs;
    }
}

impl std::iter::Sum for Amount {
    fn sum<I: Iterator<Item = Amount>>(iter: I) -> Amount {
        iter.fold(Amount::ZERO, |a, b| a + b)
    }
}

impl Amount {
    /// `floor(self × fraction)`.
    pub fn mul_fraction_floor(self, f: Fraction) -> Amount {
        let v = self.0 as u128 * f.0 as u128 / FRACTION_SCALE as u128;
        Amount(u64::try_from(v).expect("amount overflow"))
    }

    /// `self × fraction`, rounded half to even.
    pub fn mul_fraction_round(self, f: Fraction) -> Amount {
        let v = div_round_half_even(self.0 as u128 * f.0 as u128, FRACTION_SCALE as u128);
        Amount(u64::try_from(v).expect("amount overflow"))
    }
}

impl Price {
    /// Quote notional of `qty` at this price, truncated to the amount grid.
    ///
    /// Truncation keeps the sum of per-trade notionals at or below the
    /// notional of the aggregate quantity, so a buyer whose funds were
    /// reserved at the aggregate can always settle every split trade.
    pub fn notional(self, qty: Amount) -> Amount {
        let v = qty.0 as u128 * self.0 as u128 / PRICE_SCALE as u128;
        Amount(u64::try_from(v).expect("notional overflow"))
    }

    /// Quote notional rounded up; used when reserving buyer funds.
    pub fn notional_ceil(self, qty: Amount) -> Amount {
        let v = (qty.0 as u128 * self.0 as u128).div_ceil(PRICE_SCALE as u128);
        Amount(u64::try_from(v).expect("notional overflow"))
    }

    /// Largest quantity whose truncated notional does not exceed `budget`.
    pub fn max_quantity_for(self, budget: Amount) -> Amount {
        if self.0 == 0 {
            return Amount(u64::MAX);
        }
        // floor(q p / S) <= B  <=>  q p < (B + 1) S
        let bound = (budget.0 as u128 + 1) * PRICE_SCALE as u128 - 1;
        let q = bound / self.0 as u128;
        Amount(u64::try_from(q).unwrap_or(u64::MAX))
    }

    /// `self × fraction`, exact as a rational: returns (numerator, denominator)
    /// in price ticks scaled by `FRACTION_SCALE`.
    pub fn scaled_by(self, f: Fraction) -> u128 {
        self.0 as u128 * f.0 as u128
    }

    /// Absolute distance in price ticks.
    pub fn abs_diff(self, other: Price) -> u64 {
        self.0.abs_diff(other.0)
    }
}

impl Fraction {
    pub const ONE: Fraction = Fraction(FRACTION_SCALE);

    /// `num / den` rounded half to even at six places.
    pub fn ratio(num: u128, den: u128) -> Option<Fraction> {
        if den == 0 {
            return None;
        }
        let scaled = num.checked_mul(FRACTION_SCALE as u128)?;
        u64::try_from(div_round_half_even(scaled, den)).ok().map(Fraction)
    }

    /// Strictly between zero and one.
    pub fn is_proper(self) -> bool {
        self.0 > 0 && self.0 < FRACTION_SCALE
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        assert_eq!("10".parse::<Price>().unwrap(), Price::from_raw(100_000));
        assert_eq!("8.5".parse::<Price>().unwrap().to_string(), "8.5000");
        assert_eq!("0.1000".parse::<Price>().unwrap().raw(), 1_000);
        assert_eq!("80000.00".parse::<Amount>().unwrap().raw(), 80_000_000_000);
        assert_eq!("1_000_000".parse::<Amount>().unwrap(), Amount::from_units(1_000_000));
        assert_eq!(".5".parse::<Fraction>().unwrap().raw(), 500_000);
        assert!(matches!("1.00001".parse::<Price>(), Err(ParseFixedError::TooPrecise(..))));
        assert!("-1".parse::<Price>().is_err());
        assert!("1e5".parse::<Price>().is_err());
        assert!("".parse::<Price>().is_err());
        assert!(".".parse::<Price>().is_err());
        assert_eq!("1.50000000".parse::<Price>().unwrap().raw(), 15_000);
    }

    #[test]
    fn half_even() {
        assert_eq!(div_round_half_even(5, 2), 2);
        assert_eq!(div_round_half_even(7, 2), 4);
        assert_eq!(div_round_half_even(11, 4), 3);
        assert_eq!(div_round_half_even(9, 4), 2);
    }

    #[test]
    fn notional_truncates() {
        let p: Price = "8".parse().unwrap();
        assert_eq!(p.notional(Amount::from_units(5)).to_string(), "40.000000");
        let p: Price = "0.3333".parse().unwrap();
        // 0.000001 × 0.3333 truncates to zero
        assert_eq!(p.notional(Amount::from_raw(1)), Amount::ZERO);
        assert_eq!(p.notional_ceil(Amount::from_raw(1)), Amount::from_raw(1));
    }

    #[test]
    fn max_quantity_is_tight() {
        let p: Price = "0.3333".parse().unwrap();
        for b in [0u64, 1, 7, 1_000, 123_456_789] {
            let budget = Amount::from_raw(b);
            let q = p.max_quantity_for(budget);
            assert!(p.notional(q) <= budget);
            assert!(p.notional(Amount::from_raw(q.raw() + 1)) > budget);
        }
    }

    #[test]
    fn serde_accepts_strings_and_numbers() {
        let p: Price = serde_json::from_str("\"105.25\"").unwrap();
        assert_eq!(p.raw(), 1_052_500);
        let p: Price = serde_json::from_str("7").unwrap();
        assert_eq!(p, Price::from_units(7));
        let f: Fraction = serde_json::from_str("0.1").unwrap();
        assert_eq!(f.raw(), 100_000);
        assert_eq!(serde_json::to_string(&Price::from_units(3)).unwrap(), "\"3.0000\"");
    }
}

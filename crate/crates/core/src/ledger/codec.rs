//! Canonical binary encoding of ledger payloads.
//!
//! Field-ordered, length-prefixed, little-endian:
//!
//! - `u8` / `bool`: one byte (`bool` is `0` or `1`)
//! - `u32`, `u64`: 4 / 8 bytes little-endian
//! - fixed-point values (`Amount`, `Price`, `Fraction`): their raw `u64`
//! - strings and ids: `u32` byte length, then UTF-8 bytes
//! - `Option<T>`: `0`, or `1` followed by `T`
//! - sequences and sets: `u32` element count, then elements in order
//!   (sets in ascending order)
//! - structs: fields in declaration order
//! - enums: `u8` variant tag (declaration order from 0), then fields
//!
//! Decoding is strict: every value has exactly one encoding, so
//! `encode(decode(b)) == b` for every accepted `b`.

use std::collections::BTreeSet;

use crate::auction::{Order, Side};
use crate::fixed::{Amount, Fraction, Price};
use crate::ids::{AccountId, OrderId, TokenId};
use crate::incentives::{IncentiveGrant, Trigger, VestingSchedule};
use crate::policy::{
    InflationRecipient, Payout, RedistributionPolicy, SpendingDomains, TokenDefinition, Transfer,
};
use crate::sponsor::{CommandTrigger, CommandingPricePolicy};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("unexpected end of input")]
    Truncated,
    #[error("invalid {0} tag {1}")]
    BadTag(&'static str, u8),
    #[error("invalid utf-8")]
    BadUtf8,
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("non-canonical set ordering")]
    Unordered,
}

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Writer::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn bytes(&mut self, v: &[u8]) {
        self.u32(u32::try_from(v.len()).expect("field longer than 4 GiB"));
        self.buf.extend_from_slice(v);
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() < n {
            return Err(DecodeError::Truncated);
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    /// Element count for a sequence; rejects counts that cannot fit in the
    /// remaining input (each element takes at least one byte).
    fn count(&mut self) -> Result<usize, DecodeError> {
        let n = self.u32()? as usize;
        if n > self.buf.len() {
            return Err(DecodeError::Truncated);
        }
        Ok(n)
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(DecodeError::Trailing(self.buf.len()))
        }
    }
}

pub trait Canonical: Sized {
    fn encode(&self, w: &mut Writer);
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError>;
}

pub fn to_bytes<T: Canonical>(v: &T) -> Vec<u8> {
    let mut w = Writer::new();
    v.encode(&mut w);
    w.into_bytes()
}

pub fn from_bytes<T: Canonical>(b: &[u8]) -> Result<T, DecodeError> {
    let mut r = Reader::new(b);
    let v = T::decode(&mut r)?;
    r.finish()?;
    Ok(v)
}

impl Canonical for u64 {
    fn encode(&self, w: &mut Writer) {
        w.u64(*self)
    }
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.u64()
    }
}

impl Canonical for u32 {
    fn encode(&self, w: &mut Writer) {
        w.u32(*self)
    }
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.u32()
    }
}

impl Canonical for bool {
    fn encode(&self, w: &mut Writer) {
        w.u8(*self as u8)
    }
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            t => Err(DecodeError::BadTag("bool", t)),
        }
    }
}

impl Canonical for String {
    fn encode(&self, w: &mut Writer) {
        w.bytes(self.as_bytes())
    }
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        std::str::from_utf8(r.bytes()?)
            .map(str::to_string)
            .map_err(|_| DecodeError::BadUtf8)
    }
}

impl<T: Canonical> Canonical for Option<T> {
    fn encode(&self, w: &mut Writer) {
        match self {
            None => w.u8(0),
            Some(v) => {
                w.u8(1);
                v.encode(w);
            }
        }
    }
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0 => Ok(None),
            1 => Ok(Some(T::decode(r)?)),
            t => Err(DecodeError::BadTag("option", t)),
        }
    }
}

impl<T: Canonical> Canonical for Vec<T> {
    fn encode(&self, w: &mut Writer) {
        w.u32(u32::try_from(self.len()).expect("sequence too long"));
        for v in self {
            v.encode(w);
        }
    }
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let n = r.count()?;
        (0..n).map(|_| T::decode(r)).collect()
    }
}

impl Canonical for BTreeSet<String> {
    fn encode(&self, w: &mut Writer) {
        w.u32(u32::try_from(self.len()).expect("set too large"));
        for v in self {
            v.encode(w);
        }
    }
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let n = r.count()?;
        let mut out = BTreeSet::new();
        let mut last: Option<String> = None;
        for _ in 0..n {
            let s = String::decode(r)?;
            if last.as_ref().is_some_and(|l| *l >= s) {
                return Err(DecodeError::Unordered);
            }
            last = Some(s.clone());
            out.insert(s);
        }
        Ok(out)
    }
}

impl<A: Canonical, B: Canonical> Canonical for (A, B) {
    fn encode(&self, w: &mut Writer) {
        self.0.encode(w);
        self.1.encode(w);
    }
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok((A::decode(r)?, B::decode(r)?))
    }
}

macro_rules! canonical_raw {
    ($($t:ty),*) => {$(
        impl Canonical for $t {
            fn encode(&self, w: &mut Writer) {
                w.u64(self.raw())
            }
            fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
                Ok(<$t>::from_raw(r.u64()?))
            }
        }
    )*};
}
canonical_raw!(Amount, Price, Fraction);

macro_rules! canonical_id {
    ($($t:ty),*) => {$(
        impl Canonical for $t {
            fn encode(&self, w: &mut Writer) {
                w.bytes(self.as_str().as_bytes())
            }
            fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
                String::decode(r).map(<$t>::new)
            }
        }
    )*};
}
canonical_id!(AccountId, TokenId, OrderId);

/// Implements [`Canonical`] for a struct by encoding the listed fields in order.
macro_rules! canonical_struct {
    ($t:ident { $($field:ident),* $(,)? }) => {
        impl $crate::ledger::codec::Canonical for $t {
            fn encode(&self, w: &mut $crate::ledger::codec::Writer) {
                $( self.$field.encode(w); )*
            }
            fn decode(
                r: &mut $crate::ledger::codec::Reader<'_>,
            ) -> Result<Self, $crate::ledger::codec::DecodeError> {
                Ok($t { $( $field: Canonical::decode(r)?, )* })
            }
        }
    };
}
pub(crate) use canonical_struct;

/// Implements [`Canonical`] for a field-less enum as a `u8` tag.
macro_rules! canonical_unit_enum {
    ($t:ident, $name:literal, [$($variant:ident),* $(,)?]) => {
        impl Canonical for $t {
            fn encode(&self, w: &mut Writer) {
                let all = [$($t::$variant),*];
                let tag = all.iter().position(|v| v == self).expect("listed variant");
                w.u8(tag as u8);
            }
            fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
                let all = [$($t::$variant),*];
                let tag = r.u8()?;
                all.get(tag as usize).copied().ok_or(DecodeError::BadTag($name, tag))
            }
        }
    };
}

canonical_unit_enum!(Side, "side", [Buy, Sell]);
canonical_unit_enum!(Trigger, "trigger", [Sale, Design]);
canonical_unit_enum!(CommandTrigger, "command trigger", [LowReserve, LargeMove, Stalled]);
canonical_unit_enum!(InflationRecipient, "inflation recipient", [Sponsor, ProRata]);

impl Canonical for SpendingDomains {
    fn encode(&self, w: &mut Writer) {
        match self {
            SpendingDomains::Universal => w.u8(0),
            SpendingDomains::Only(set) => {
                w.u8(1);
                set.encode(w);
            }
        }
    }
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0 => Ok(SpendingDomains::Universal),
            1 => Ok(SpendingDomains::Only(BTreeSet::decode(r)?)),
            t => Err(DecodeError::BadTag("spending domains", t)),
        }
    }
}

canonical_struct!(Order { order_id, account, token, side, quantity, limit_price, round, arrival });
canonical_struct!(RedistributionPolicy { every_periods, top, levy, bottom });
canonical_struct!(TokenDefinition {
    id,
    inflation_rate,
    inflation_recipient,
    redistribution,
    spending_domains,
    vesting_class,
});
canonical_struct!(CommandingPricePolicy { band, min_reserve_rate, max_round_move, stalled_rounds });
canonical_struct!(VestingSchedule { id, cliff, duration });
canonical_struct!(IncentiveGrant { grantee, token, amount, granted_at, schedule, trigger });
canonical_struct!(Payout { account, amount });
canonical_struct!(Transfer { from, to, amount });

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_little_endian_and_length_prefixed() {
        let mut w = Writer::new();
        "ab".to_string().encode(&mut w);
        7u64.encode(&mut w);
        Some(Price::from_raw(1)).encode(&mut w);
        assert_eq!(
            w.into_bytes(),
            vec![2, 0, 0, 0, b'a', b'b', 7, 0, 0, 0, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0]
        );
    }

    #[test]
    fn strict_decoding() {
        assert_eq!(from_bytes::<bool>(&[2]), Err(DecodeError::BadTag("bool", 2)));
        assert_eq!(from_bytes::<u64>(&[0; 9]), Err(DecodeError::Trailing(1)));
        assert_eq!(from_bytes::<String>(&[5, 0, 0, 0, b'a']), Err(DecodeError::Truncated));
        // a huge element count must not allocate
        assert_eq!(from_bytes::<Vec<u64>>(&[255, 255, 255, 255]), Err(DecodeError::Truncated));
        let mut w = Writer::new();
        w.u32(2);
        "b".to_string().encode(&mut w);
        "a".to_string().encode(&mut w);
        assert_eq!(from_bytes::<BTreeSet<String>>(&w.into_bytes()), Err(DecodeError::Unordered));
    }
}

//! Per-round call auction.
//!
//! All orders of one token and one round clear at a single uniform price.
//! The price is chosen from the candidate set (every distinct limit price
//! plus the incoming reference price) by the chain:
//!
//! 1. maximize matched volume `V(p) = min(B(p), S(p))`
//! 2. minimize imbalance `|B(p) - S(p)|`
//! 3. minimize distance to the reference price
//! 4. take the lower price
//!
//! where `B(p)` is the buy quantity with limit `>= p` and `S(p)` the sell
//! quantity with limit `<= p`. Once the price is fixed the individual fills
//! and counterparty pairings are derived from the aggregate outcome.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::fixed::{Amount, Price};
use crate::ids::{AccountId, OrderId, TokenId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

/// A limit order for one round. Orders expire when their round clears.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Order {
    pub order_id: OrderId,
    pub account: AccountId,
    pub token: TokenId,
    pub side: Side,
    pub quantity: Amount,
    pub limit_price: Price,
    pub round: u64,
    /// Submission sequence within the round, starting at 0.
    pub arrival: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fill {
    pub order_id: OrderId,
    pub account: AccountId,
    pub side: Side,
    pub quantity: Amount,
}

/// Unfilled remainder of an order that was marketable at the settlement price.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Residual {
    pub order_id: OrderId,
    pub account: AccountId,
    pub side: Side,
    pub limit_price: Price,
    pub quantity: Amount,
}

/// One buyer/seller pairing derived from the fills.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pairing {
    pub buy_order: OrderId,
    pub buyer: AccountId,
    pub sell_order: OrderId,
    pub seller: AccountId,
    pub quantity: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearingResult {
    pub token: TokenId,
    pub round: u64,
    pub reference_price: Price,
    /// `None` when nothing matched.
    pub clearing_price: Option<Price>,
    pub matched_volume: Amount,
    pub fills: Vec<Fill>,
    pub pairings: Vec<Pairing>,
    pub residual_buys: Vec<Residual>,
    pub residual_sells: Vec<Residual>,
    pub reference_price_next: Price,
}

impl ClearingResult {
    /// Price at which this round's trades (including any backstop fills)
    /// settle: the clearing price, or the reference when nothing crossed.
    pub fn settlement_price(&self) -> Price {
        self.clearing_price.unwrap_or(self.reference_price)
    }

    pub fn filled(&self, order_id: &OrderId) -> Amount {
        self.fills
            .iter()
            .filter(|f| &f.order_id == order_id)
            .map(|f| f.quantity)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub price: Price,
    pub buy_volume: Amount,
    pub sell_volume: Amount,
    pub matched_volume: Amount,
    pub imbalance: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuctionError {
    #[error("MixedTokens: orders reference more than one token")]
    MixedTokens,
    #[error("MixedRounds: orders reference more than one round")]
    MixedRounds,
    #[error("InvalidOrder: order {0} has a zero quantity or price")]
    InvalidOrder(OrderId),
    #[error("InvalidReference: reference price must be positive")]
    InvalidReference,
}

fn validate(orders: &[Order], reference_price: Price) -> Result<(), AuctionError> {
    if reference_price.is_zero() {
        return Err(AuctionError::InvalidReference);
    }
    if let Some(first) = orders.first() {
        for o in orders {
            if o.token != first.token {
                return Err(AuctionError::MixedTokens);
            }
            if o.round != first.round {
                return Err(AuctionError::MixedRounds);
            }
            if o.quantity.is_zero() || o.limit_price.is_zero() {
                return Err(AuctionError::InvalidOrder(o.order_id.clone()));
            }
        }
    }
    Ok(())
}

/// Demand and supply at every candidate price, ascending by price.
pub fn candidate_schedule(
    orders: &[Order],
    reference_price: Price,
) -> Result<Vec<ScheduleRow>, AuctionError> {
    validate(orders, reference_price)?;
    Ok(schedule_unchecked(orders, reference_price))
}

fn schedule_unchecked(orders: &[Order], reference_price: Price) -> Vec<ScheduleRow> {
    let mut prices: Vec<Price> = orders.iter().map(|o| o.limit_price).collect();
    prices.push(reference_price);
    prices.sort_unstable();
    prices.dedup();

    // Cumulative sell quantity ascending and buy quantity descending.
    let mut sells: Vec<(Price, Amount)> = orders
        .iter()
        .filter(|o| o.side == Side::Sell)
        .map(|o| (o.limit_price, o.quantity))
        .collect();
    sells.sort_unstable();
    let mut buys: Vec<(Price, Amount)> = orders
        .iter()
        .filter(|o| o.side == Side::Buy)
        .map(|o| (o.limit_price, o.quantity))
        .collect();
    buys.sort_unstable_by(|a, b| b.cmp(a));

    let mut rows = Vec::with_capacity(prices.len());
    let mut supply = Amount::ZERO;
    let mut si = 0;
    for &p in &prices {
        while si < sells.len() && sells[si].0 <= p {
            supply += sells[si].1;
            si += 1;
        }
        rows.push(ScheduleRow {
            price: p,
            buy_volume: Amount::ZERO,
            sell_volume: supply,
            matched_volume: Amount::ZERO,
            imbalance: Amount::ZERO,
        });
    }
    let mut demand = Amount::ZERO;
    let mut bi = 0;
    for row in rows.iter_mut().rev() {
        while bi < buys.len() && buys[bi].0 >= row.price {
            demand += buys[bi].1;
            bi += 1;
        }
        row.buy_volume = demand;
        row.matched_volume = demand.min(row.sell_volume);
        row.imbalance = Amount::from_raw(demand.raw().abs_diff(row.sell_volume.raw()));
    }
    rows
}

/// `Less` when `a` is the better clearing candidate.
fn rank(a: &ScheduleRow, b: &ScheduleRow, reference: Price) -> Ordering {
    b.matched_volume
        .cmp(&a.matched_volume)
        .then(a.imbalance.cmp(&b.imbalance))
        .then(a.price.abs_diff(reference).cmp(&b.price.abs_diff(reference)))
        .then(a.price.cmp(&b.price))
}

/// Clears one round. An empty or non-crossing book is not an error: it
/// yields a zero-volume result that carries the reference price forward.
pub fn clear_round(orders: &[Order], reference_price: Price) -> Result<ClearingResult, AuctionError> {
    validate(orders, reference_price)?;
    let token = orders.first().map(|o| o.token.clone()).unwrap_or_else(|| TokenId::new(""));
    let round = orders.first().map(|o| o.round).unwrap_or(0);

    let schedule = schedule_unchecked(orders, reference_price);
    let best = schedule
        .iter()
        .min_by(|a, b| rank(a, b, reference_price))
        .copied()
        .expect("schedule always holds the reference row");

    let (clearing_price, volume) = if best.matched_volume.is_zero() {
        (None, Amount::ZERO)
    } else {
        (Some(best.price), best.matched_volume)
    };
    let settle = clearing_price.unwrap_or(reference_price);

    let mut buys: Vec<&Order> = orders
        .iter()
        .filter(|o| o.side == Side::Buy && o.limit_price >= settle)
        .collect();
    buys.sort_by(|a, b| b.limit_price.cmp(&a.limit_price).then(a.arrival.cmp(&b.arrival)));
    let mut sells: Vec<&Order> = orders
        .iter()
        .filter(|o| o.side == Side::Sell && o.limit_price <= settle)
        .collect();
    sells.sort_by(|a, b| a.limit_price.cmp(&b.limit_price).then(a.arrival.cmp(&b.arrival)));

    let (buy_fills, residual_buys) = allocate(&buys, volume);
    let (sell_fills, residual_sells) = allocate(&sells, volume);
    let pairings = pair(&buy_fills, &sell_fills);

    let mut fills = buy_fills;
    fills.extend(sell_fills);

    Ok(ClearingResult {
        token,
        round,
        reference_price,
        clearing_price,
        matched_volume: volume,
        fills,
        pairings,
        residual_buys,
        residual_sells,
        reference_price_next: clearing_price.unwrap_or(reference_price),
    })
}

/// Fills `queue` in priority order until `volume` is exhausted.
fn allocate(queue: &[&Order], volume: Amount) -> (Vec<Fill>, Vec<Residual>) {
    let mut left = volume;
    let mut fills = Vec::new();
    let mut residuals = Vec::new();
    for o in queue {
        let take = o.quantity.min(left);
        left -= take;
        if !take.is_zero() {
            fills.push(Fill {
                order_id: o.order_id.clone(),
                account: o.account.clone(),
                side: o.side,
                quantity: take,
            });
        }
        let rest = o.quantity - take;
        if !rest.is_zero() {
            residuals.push(Residual {
                order_id: o.order_id.clone(),
                account: o.account.clone(),
                side: o.side,
                limit_price: o.limit_price,
                quantity: rest,
            });
        }
    }
    (fills, residuals)
}

/// Greedy two-pointer pairing of buy fills against sell fills, both already
/// in price-then-arrival order.
fn pair(buys: &[Fill], sells: &[Fill]) -> Vec<Pairing> {
    let mut out = Vec::new();
    let (mut bi, mut si) = (0, 0);
    let mut b_left = buys.first().map(|f| f.quantity).unwrap_or_default();
    let mut s_left = sells.first().map(|f| f.quantity).unwrap_or_default();
    while bi < buys.len() && si < sells.len() {
        let q = b_left.min(s_left);
        out.push(Pairing {
            buy_order: buys[bi].order_id.clone(),
            buyer: buys[bi].account.clone(),
            sell_order: sells[si].order_id.clone(),
            seller: sells[si].account.clone(),
            quantity: q,
        });
        b_left -= q;
        s_left -= q;
        if b_left.is_zero() {
            bi += 1;
            b_left = buys.get(bi).map(|f| f.quantity).unwrap_or_default();
        }
        if s_left.is_zero() {
            si += 1;
            s_left = sells.get(si).map(|f| f.quantity).unwrap_or_default();
        }
    }
    out
}

//! Sponsor mechanics: reserve accounting, the commanding-price policy and
//! residual-demand fulfillment.

use serde::{Deserialize, Serialize};

use crate::auction::{ClearingResult, Residual, Side};
use crate::fixed::{Amount, Fraction, Price, FRACTION_SCALE, PRICE_SCALE};
use crate::ids::{AccountId, OrderId, TokenId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SponsorError {
    #[error("NonPositiveParameter: {0} must be positive")]
    NonPositiveParameter(&'static str),
    #[error("DuplicateToken: {0} is already issued")]
    DuplicateToken(TokenId),
    #[error("InvalidPolicy: {0}")]
    InvalidPolicy(String),
    #[error("ConditionNotMet: no commanding-price trigger holds")]
    ConditionNotMet,
    #[error("OutOfBand: {proposed} outside [{low}, {high}]")]
    OutOfBand { proposed: Price, low: String, high: String },
    #[error("AlreadyCommandedThisRound: round {0} already has a commanding price")]
    AlreadyCommandedThisRound(u64),
    #[error("ZeroSupply: reserve rate is undefined without issued supply")]
    ZeroSupply,
}

/// Rules under which the sponsor may set a commanding price. Fixed at
/// issuance; a trigger set to `None` is disabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandingPricePolicy {
    /// Allowed relative distance from the reference price, in (0, 1].
    pub band: Fraction,
    /// Fires when the current reserve rate is below this.
    pub min_reserve_rate: Option<Fraction>,
    /// Fires when the last traded round moved more than this from its reference.
    pub max_round_move: Option<Fraction>,
    /// Fires after this many consecutive zero-volume rounds.
    pub stalled_rounds: Option<u32>,
}

impl Default for CommandingPricePolicy {
    fn default() -> Self {
        CommandingPricePolicy {
            band: Fraction::from_raw(100_000),
            min_reserve_rate: Some(Fraction::from_raw(500_000)),
            max_round_move: Some(Fraction::from_raw(150_000)),
            stalled_rounds: Some(3),
        }
    }
}

impl CommandingPricePolicy {
    pub fn validate(&self) -> Result<(), SponsorError> {
        if self.band.is_zero() || self.band > Fraction::ONE {
            return Err(SponsorError::InvalidPolicy(format!(
                "band must lie in (0, 1], got {}",
                self.band
            )));
        }
        if self.stalled_rounds == Some(0) {
            return Err(SponsorError::InvalidPolicy("stalled_rounds must be at least 1".into()));
        }
        Ok(())
    }

    /// Inclusive band `[reference × (1 - band), reference × (1 + band)]`,
    /// compared exactly in units of price ticks × 10^6.
    pub fn in_band(&self, reference: Price, proposed: Price) -> bool {
        let c = proposed.raw() as u128 * FRACTION_SCALE as u128;
        let r = reference.raw() as u128;
        let lo = r * (FRACTION_SCALE - self.band.raw()) as u128;
        let hi = r * (FRACTION_SCALE + self.band.raw()) as u128;
        lo <= c && c <= hi
    }

    /// Band edges for display, rounded inward to the price grid.
    pub fn band_edges(&self, reference: Price) -> (Price, Price) {
        let r = reference.raw() as u128;
        let lo = (r * (FRACTION_SCALE - self.band.raw()) as u128).div_ceil(FRACTION_SCALE as u128);
        let hi = r * (FRACTION_SCALE + self.band.raw()) as u128 / FRACTION_SCALE as u128;
        (Price::from_raw(lo as u64), Price::from_raw(hi as u64))
    }

    pub fn active_trigger(&self, state: &RoundState) -> Option<CommandTrigger> {
        if let Some(min) = self.min_reserve_rate {
            if state.reserve_rate < min {
                return Some(CommandTrigger::LowReserve);
            }
        }
        if let (Some(max), Some((reference, clearing))) = (self.max_round_move, state.last_move) {
            // |clearing - reference| / reference > max
            let diff = clearing.abs_diff(reference) as u128 * FRACTION_SCALE as u128;
            if diff > reference.raw() as u128 * max.raw() as u128 {
                return Some(CommandTrigger::LargeMove);
            }
        }
        if let Some(n) = self.stalled_rounds {
            if state.zero_volume_streak >= n {
                return Some(CommandTrigger::Stalled);
            }
        }
        None
    }

    /// Accepts or rejects a proposed commanding price.
    pub fn check(&self, state: &RoundState, proposed: Price) -> Result<CommandTrigger, SponsorError> {
        if state.commanded_this_round {
            return Err(SponsorError::AlreadyCommandedThisRound(state.round));
        }
        let trigger = self.active_trigger(state).ok_or(SponsorError::ConditionNotMet)?;
        if proposed.is_zero() || !self.in_band(state.reference, proposed) {
            let (lo, hi) = self.band_edges(state.reference);
            return Err(SponsorError::OutOfBand {
                proposed,
                low: lo.to_string(),
                high: hi.to_string(),
            });
        }
        Ok(trigger)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandTrigger {
    LowReserve,
    LargeMove,
    Stalled,
}

/// Market state seen by the commanding-price policy for the open round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundState {
    pub round: u64,
    pub reference: Price,
    pub reserve_rate: Fraction,
    /// (reference, clearing price) of the most recent round that traded.
    pub last_move: Option<(Price, Price)>,
    pub zero_volume_streak: u32,
    pub commanded_this_round: bool,
}

/// Sponsor collateral and supply for one token. Always derived from the
/// ledger, never cached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReservePosition {
    pub token: TokenId,
    pub sponsor: AccountId,
    pub collateral: Amount,
    pub issued_supply: Amount,
    pub issue_price: Price,
    pub inventory: Amount,
}

impl ReservePosition {
    /// `collateral / (issued_supply × issue_price)`, half-even at six places.
    pub fn reserve_rate(&self) -> Result<Fraction, SponsorError> {
        reserve_rate(self.collateral, self.issued_supply, self.issue_price)
    }
}

pub fn reserve_rate(collateral: Amount, supply: Amount, issue_price: Price) -> Result<Fraction, SponsorError> {
    if supply.is_zero() || issue_price.is_zero() {
        return Err(SponsorError::ZeroSupply);
    }
    // collateral is in 10^-6 quote; supply × price is in 10^-10 quote.
    let num = collateral.raw() as u128 * PRICE_SCALE as u128;
    let den = supply.raw() as u128 * issue_price.raw() as u128;
    Ok(Fraction::ratio(num, den).expect("reserve rate overflow"))
}

/// A trade between the sponsor and one participant's residual.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SponsorFill {
    pub order_id: OrderId,
    pub account: AccountId,
    /// The participant's side; the sponsor takes the other.
    pub side: Side,
    pub quantity: Amount,
    pub price: Price,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fulfillment {
    pub fills: Vec<SponsorFill>,
    /// Residual quantity the sponsor could not take, per order.
    pub capped: Vec<(OrderId, Amount)>,
    pub position: ReservePosition,
}

/// Fills residual marketable orders against the sponsor at the settlement
/// price. Sales come out of inventory; purchases are paid from collateral.
/// Neither may go negative, so quantities beyond either cap are left unfilled.
pub fn fulfill_residuals(clearing: &ClearingResult, position: &ReservePosition) -> Fulfillment {
    let price = clearing.settlement_price();
    let mut pos = position.clone();
    let mut fills = Vec::new();
    let mut capped = Vec::new();

    let mut take = |r: &Residual, qty: Amount, fills: &mut Vec<SponsorFill>| {
        if !qty.is_zero() {
            fills.push(SponsorFill {
                order_id: r.order_id.clone(),
                account: r.account.clone(),
                side: r.side,
                quantity: qty,
                price,
            });
        }
        if qty < r.quantity {
            capped.push((r.order_id.clone(), r.quantity - qty));
        }
    };

    for r in &clearing.residual_buys {
        let qty = r.quantity.min(pos.inventory);
        pos.inventory -= qty;
        pos.collateral += price.notional(qty);
        take(r, qty, &mut fills);
    }
    for r in &clearing.residual_sells {
        let qty = r.quantity.min(price.max_quantity_for(pos.collateral));
        pos.inventory += qty;
        pos.collateral -= price.notional(qty);
        take(r, qty, &mut fills);
    }
    Fulfillment { fills, capped, position: pos }
}

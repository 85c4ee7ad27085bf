//! Ledger event payloads.

use serde::{Deserialize, Serialize};

use super::codec::{canonical_struct, Canonical, DecodeError, Reader, Writer};
use crate::auction::Order;
use crate::fixed::{Amount, Fraction, Price};
use crate::ids::{AccountId, OrderId, TokenId};
use crate::incentives::{IncentiveGrant, VestingSchedule};
use crate::policy::{Payout, TokenDefinition, Transfer};
use crate::sponsor::{CommandTrigger, CommandingPricePolicy};

/// How a token came into existence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IssueKind {
    /// The unit collateral and prices are denominated in.
    Quote,
    /// Sold through call auctions and backed by a collateral reserve.
    Sponsored {
        issue_price: Price,
        collateral: Amount,
        policy: CommandingPricePolicy,
        /// Recorded at issuance; always equal to the formula on the above.
        reserve_rate: Fraction,
    },
    /// Minted by performance grants; subject to vesting.
    Incentive { schedule: VestingSchedule },
}

impl Canonical for IssueKind {
    fn encode(&self, w: &mut Writer) {
        match self {
            IssueKind::Quote => w.u8(0),
            IssueKind::Sponsored { issue_price, collateral, policy, reserve_rate } => {
                w.u8(1);
                issue_price.encode(w);
                collateral.encode(w);
                policy.encode(w);
                reserve_rate.encode(w);
            }
            IssueKind::Incentive { schedule } => {
                w.u8(2);
                schedule.encode(w);
            }
        }
    }
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0 => Ok(IssueKind::Quote),
            1 => Ok(IssueKind::Sponsored {
                issue_price: Canonical::decode(r)?,
                collateral: Canonical::decode(r)?,
                policy: Canonical::decode(r)?,
                reserve_rate: Canonical::decode(r)?,
            }),
            2 => Ok(IssueKind::Incentive { schedule: Canonical::decode(r)? }),
            t => Err(DecodeError::BadTag("issue kind", t)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenIssued {
    pub definition: TokenDefinition,
    pub sponsor: AccountId,
    /// Units credited to the sponsor at issuance.
    pub supply: Amount,
    pub kind: IssueKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferMade {
    pub from: AccountId,
    pub to: AccountId,
    pub token: TokenId,
    pub amount: Amount,
    /// Set for purchases; must lie in the token's spending domains.
    pub category: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundCleared {
    pub token: TokenId,
    pub round: u64,
    pub reference_price: Price,
    pub clearing_price: Option<Price>,
    pub matched_volume: Amount,
    /// Reference for the following round: the commanding price if one was
    /// accepted this round, else the clearing price, else the reference.
    pub reference_price_next: Price,
}

/// Counterparty of a trade.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Account(AccountId),
    /// Token side is the sponsor's inventory, quote side its reserve.
    Sponsor,
}

impl Canonical for Party {
    fn encode(&self, w: &mut Writer) {
        match self {
            Party::Account(a) => {
                w.u8(0);
                a.encode(w);
            }
            Party::Sponsor => w.u8(1),
        }
    }
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0 => Ok(Party::Account(Canonical::decode(r)?)),
            1 => Ok(Party::Sponsor),
            t => Err(DecodeError::BadTag("party", t)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradeExecuted {
    pub token: TokenId,
    pub round: u64,
    pub buyer: Party,
    pub seller: Party,
    pub buy_order: Option<OrderId>,
    pub sell_order: Option<OrderId>,
    pub quantity: Amount,
    pub price: Price,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandingPriceSet {
    pub token: TokenId,
    pub round: u64,
    /// Reference price in force when the command was accepted.
    pub reference_price: Price,
    pub price: Price,
    pub trigger: CommandTrigger,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InflationApplied {
    pub token: TokenId,
    pub period: u64,
    pub rate: Fraction,
    pub supply_before: Amount,
    pub minted: Amount,
    pub recipients: Vec<Payout>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedistributionApplied {
    pub token: TokenId,
    pub period: u64,
    pub transfers: Vec<Transfer>,
    /// Set when there were too few holders to redistribute.
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpendDenied {
    pub account: AccountId,
    pub token: TokenId,
    pub category: String,
    pub amount: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthDistributed {
    /// Incentive token whose vested holders share the pool.
    pub token: TokenId,
    pub payer: AccountId,
    pub pool: Amount,
    pub payouts: Vec<Payout>,
}

/// One state-changing fact recorded in the ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Event {
    TokenIssued(TokenIssued),
    Transfer(TransferMade),
    OrderSubmitted(Order),
    RoundCleared(RoundCleared),
    TradeExecuted(TradeExecuted),
    CommandingPriceSet(CommandingPriceSet),
    IncentiveMinted(IncentiveGrant),
    InflationApplied(InflationApplied),
    RedistributionApplied(RedistributionApplied),
    SpendDenied(SpendDenied),
    PeriodAdvanced { period: u64 },
    GrowthDistributed(GrowthDistributed),
    /// Opens the batch of entries written for one external command.
    CommandAccepted { key: String, kind: String },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::TokenIssued(_) => "TokenIssued",
            Event::Transfer(_) => "Transfer",
            Event::OrderSubmitted(_) => "OrderSubmitted",
            Event::RoundCleared(_) => "RoundCleared",
            Event::TradeExecuted(_) => "TradeExecuted",
            Event::CommandingPriceSet(_) => "CommandingPriceSet",
            Event::IncentiveMinted(_) => "IncentiveMinted",
            Event::InflationApplied(_) => "InflationApplied",
            Event::RedistributionApplied(_) => "RedistributionApplied",
            Event::SpendDenied(_) => "SpendDenied",
            Event::PeriodAdvanced { .. } => "PeriodAdvanced",
            Event::GrowthDistributed(_) => "GrowthDistributed",
            Event::CommandAccepted { .. } => "CommandAccepted",
        }
    }
}

canonical_struct!(TokenIssued { definition, sponsor, supply, kind });
canonical_struct!(TransferMade { from, to, token, amount, category });
canonical_struct!(RoundCleared {
    token,
    round,
    reference_price,
    clearing_price,
    matched_volume,
    reference_price_next,
});
canonical_struct!(TradeExecuted { token, round, buyer, seller, buy_order, sell_order, quantity, price });
canonical_struct!(CommandingPriceSet { token, round, reference_price, price, trigger });
canonical_struct!(InflationApplied { token, period, rate, supply_before, minted, recipients });
canonical_struct!(RedistributionApplied { token, period, transfers, skipped });
canonical_struct!(SpendDenied { account, token, category, amount });
canonical_struct!(GrowthDistributed { token, payer, pool, payouts });

impl Canonical for Event {
    fn encode(&self, w: &mut Writer) {
        match self {
            Event::TokenIssued(e) => {
                w.u8(0);
                e.encode(w)
            }
            Event::Transfer(e) => {
                w.u8(1);
                e.encode(w)
            }
            Event::OrderSubmitted(e) => {
                w.u8(2);
                e.encode(w)
            }
            Event::RoundCleared(e) => {
                w.u8(3);
                e.encode(w)
            }
            Event::TradeExecuted(e) => {
                w.u8(4);
                e.encode(w)
            }
            Event::CommandingPriceSet(e) => {
                w.u8(5);
                e.encode(w)
            }
            Event::IncentiveMinted(e) => {
                w.u8(6);
                e.encode(w)
            }
            Event::InflationApplied(e) => {
                w.u8(7);
                e.encode(w)
            }
            Event::RedistributionApplied(e) => {
                w.u8(8);
                e.encode(w)
            }
            Event::SpendDenied(e) => {
                w.u8(9);
                e.encode(w)
            }
            Event::PeriodAdvanced { period } => {
                w.u8(10);
                period.encode(w)
            }
            Event::GrowthDistributed(e) => {
                w.u8(11);
                e.encode(w)
            }
            Event::CommandAccepted { key, kind } => {
                w.u8(12);
                key.encode(w);
                kind.encode(w)
            }
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.u8()? {
            0 => Event::TokenIssued(Canonical::decode(r)?),
            1 => Event::Transfer(Canonical::decode(r)?),
            2 => Event::OrderSubmitted(Canonical::decode(r)?),
            3 => Event::RoundCleared(Canonical::decode(r)?),
            4 => Event::TradeExecuted(Canonical::decode(r)?),
            5 => Event::CommandingPriceSet(Canonical::decode(r)?),
            6 => Event::IncentiveMinted(Canonical::decode(r)?),
            7 => Event::InflationApplied(Canonical::decode(r)?),
            8 => Event::RedistributionApplied(Canonical::decode(r)?),
            9 => Event::SpendDenied(Canonical::decode(r)?),
            10 => Event::PeriodAdvanced { period: Canonical::decode(r)? },
            11 => Event::GrowthDistributed(Canonical::decode(r)?),
            12 => Event::CommandAccepted { key: Canonical::decode(r)?, kind: Canonical::decode(r)? },
            t => return Err(DecodeError::BadTag("event", t)),
        })
    }
}

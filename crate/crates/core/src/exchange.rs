//! Command applier: turns external commands into validated ledger batches.
//!
//! Each command becomes one atomic batch stamped with one logical tick. A
//! command carrying an idempotency key opens its batch with a
//! `CommandAccepted` entry, so a replayed key is recognised even after a
//! restart.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::auction::{candidate_schedule, clear_round, AuctionError, ClearingResult, Order, ScheduleRow, Side};
use crate::fixed::{Amount, Fraction, Price};
use crate::ids::{AccountId, OrderId, TokenId};
use crate::incentives::{self, IncentiveError, IncentiveGrant, IncentiveRules, PerformanceEvent, VestingSchedule};
use crate::ledger::event::{
    CommandingPriceSet, Event, GrowthDistributed, InflationApplied, IssueKind, Party, RedistributionApplied,
    RoundCleared, SpendDenied, TokenIssued, TradeExecuted, TransferMade,
};
use crate::ledger::store::Durability;
use crate::ledger::{Ledger, LedgerEntry, LedgerError, State};
use crate::policy::{
    check_spend, inflation_mint, redistribute, CategoryUniverse, Payout, PolicyError, SpendDecision, TokenDefinition,
};
use crate::sponsor::{fulfill_residuals, reserve_rate, CommandTrigger, CommandingPricePolicy, SponsorError, SponsorFill};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    /// Creates the quote currency and credits its whole supply to `treasury`.
    IssueQuote { token: TokenId, treasury: AccountId, supply: Amount },
    /// Initial token offering: `collateral` moves from the sponsor's quote
    /// balance into the token's reserve.
    IssueToken {
        definition: TokenDefinition,
        sponsor: AccountId,
        supply: Amount,
        issue_price: Price,
        collateral: Amount,
        #[serde(default)]
        policy: CommandingPricePolicy,
    },
    /// Declares an incentive token. Its supply comes only from grants.
    IssueIncentive { definition: TokenDefinition, sponsor: AccountId, schedule: VestingSchedule },
    /// A plain transfer, or a purchase when `category` is set.
    Transfer {
        from: AccountId,
        to: AccountId,
        token: TokenId,
        amount: Amount,
        #[serde(default)]
        category: Option<String>,
    },
    SubmitOrder {
        #[serde(default)]
        order_id: Option<OrderId>,
        account: AccountId,
        token: TokenId,
        side: Side,
        quantity: Amount,
        limit_price: Price,
    },
    TriggerClear { token: TokenId },
    SetCommandingPrice { token: TokenId, price: Price },
    RecordPerformance { grantee: AccountId, event: PerformanceEvent },
    ApplyPolicyPeriod,
    InjectGrowthPool { token: TokenId, payer: AccountId, pool: Amount },
}

impl Command {
    pub fn kind(&self) -> &'static str {
        match self {
            Command::IssueQuote { .. } => "IssueQuote",
            Command::IssueToken { .. } => "IssueToken",
            Command::IssueIncentive { .. } => "IssueIncentive",
            Command::Transfer { .. } => "Transfer",
            Command::SubmitOrder { .. } => "SubmitOrder",
            Command::TriggerClear { .. } => "TriggerClear",
            Command::SetCommandingPrice { .. } => "SetCommandingPrice",
            Command::RecordPerformance { .. } => "RecordPerformance",
            Command::ApplyPolicyPeriod => "ApplyPolicyPeriod",
            Command::InjectGrowthPool { .. } => "InjectGrowthPool",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Issued { token: TokenId, reserve_rate: Option<Fraction> },
    Transferred { token: TokenId, amount: Amount },
    SpendDenied { token: TokenId, category: String },
    OrderAccepted { order: Order },
    Cleared { result: ClearingResult, sponsor_fills: Vec<SponsorFill>, capped: Vec<(OrderId, Amount)> },
    CommandingPriceAccepted { token: TokenId, round: u64, price: Price, trigger: CommandTrigger },
    PeriodApplied { period: u64, inflation: Vec<InflationApplied>, redistribution: Vec<RedistributionApplied> },
    Granted { grant: IncentiveGrant },
    GrowthDistributed { token: TokenId, payouts: Vec<Payout> },
    /// The idempotency key was already recorded; nothing was executed.
    Duplicate { key: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub outcome: Outcome,
    pub entries: Vec<LedgerEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum ExchangeError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Sponsor(#[from] SponsorError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Incentive(#[from] IncentiveError),
    #[error(transparent)]
    Auction(#[from] AuctionError),
    #[error("UnknownToken: {0} has not been issued")]
    UnknownToken(TokenId),
    #[error("NotSponsored: {0} has no auction market")]
    NotSponsored(TokenId),
    #[error("NoQuote: no quote currency has been issued")]
    NoQuote,
}

impl ExchangeError {
    /// Stable error name, the prefix of the display text.
    pub fn code(&self) -> String {
        let text = self.to_string();
        text.split_once(':').map(|(c, _)| c).unwrap_or(&text).to_string()
    }
}

/// Operator configuration that is not part of the ledger.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeConfig {
    #[serde(default)]
    pub categories: CategoryUniverse,
    #[serde(default)]
    pub incentives: IncentiveRules,
}

#[derive(Debug)]
pub struct Exchange {
    ledger: Ledger,
    config: ExchangeConfig,
}

impl Exchange {
    pub fn new(ledger: Ledger, config: ExchangeConfig) -> Exchange {
        Exchange { ledger, config }
    }

    pub fn in_memory(config: ExchangeConfig) -> Exchange {
        Exchange::new(Ledger::in_memory(), config)
    }

    pub fn open(path: &Path, durability: Durability, config: ExchangeConfig) -> Result<Exchange, LedgerError> {
        Ok(Exchange::new(Ledger::open(path, durability)?, config))
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn state(&self) -> &State {
        self.ledger.state()
    }

    pub fn config(&self) -> &ExchangeConfig {
        &self.config
    }

    pub fn into_ledger(self) -> Ledger {
        self.ledger
    }

    /// Tick the next command will be stamped with.
    pub fn next_tick(&self) -> u64 {
        self.ledger.last_tick().map_or(0, |t| t + 1)
    }

    /// Candidate-price table for the open round of `token`.
    pub fn schedule(&self, token: &TokenId) -> Result<Vec<ScheduleRow>, ExchangeError> {
        let m = self.market(token)?;
        Ok(candidate_schedule(&m.open_orders, m.reference)?)
    }

    /// Result the open round of `token` would produce if cleared now.
    pub fn preview_clear(&self, token: &TokenId) -> Result<ClearingResult, ExchangeError> {
        let m = self.market(token)?;
        let mut r = clear_round(&m.open_orders, m.reference)?;
        r.token = token.clone();
        r.round = m.round;
        if let Some(c) = m.commanded {
            r.reference_price_next = c;
        }
        Ok(r)
    }

    fn market(&self, token: &TokenId) -> Result<&crate::ledger::state::MarketState, ExchangeError> {
        if self.state().token(token).is_none() {
            return Err(ExchangeError::UnknownToken(token.clone()));
        }
        self.state().market(token).ok_or_else(|| ExchangeError::NotSponsored(token.clone()))
    }

    /// Executes `cmd`. With a `key` that was already recorded, returns
    /// [`Outcome::Duplicate`] and appends nothing.
    pub fn execute(&mut self, key: Option<&str>, cmd: &Command) -> Result<Receipt, ExchangeError> {
        if let Some(k) = key {
            if self.state().has_command(k) {
                return Ok(Receipt { outcome: Outcome::Duplicate { key: k.to_string() }, entries: Vec::new() });
            }
        }
        let (events, outcome) = self.plan(cmd)?;
        let mut batch = Vec::with_capacity(events.len() + 1);
        if let Some(k) = key {
            batch.push(Event::CommandAccepted { key: k.to_string(), kind: cmd.kind().to_string() });
        }
        batch.extend(events);
        let tick = self.next_tick();
        let entries = self.ledger.append_batch(batch, tick)?;
        Ok(Receipt { outcome, entries })
    }

    /// Shorthand for `execute(None, cmd)`.
    pub fn run(&mut self, cmd: Command) -> Result<Outcome, ExchangeError> {
        Ok(self.execute(None, &cmd)?.outcome)
    }

    fn plan(&self, cmd: &Command) -> Result<(Vec<Event>, Outcome), ExchangeError> {
        let state = self.state();
        match cmd {
            Command::IssueQuote { token, treasury, supply } => {
                if state.token(token).is_some() {
                    return Err(SponsorError::DuplicateToken(token.clone()).into());
                }
                if supply.is_zero() {
                    return Err(SponsorError::NonPositiveParameter("supply").into());
                }
                let ev = Event::TokenIssued(TokenIssued {
                    definition: TokenDefinition::quote(token.clone()),
                    sponsor: treasury.clone(),
                    supply: *supply,
                    kind: IssueKind::Quote,
                });
                Ok((vec![ev], Outcome::Issued { token: token.clone(), reserve_rate: None }))
            }
            Command::IssueToken { definition, sponsor, supply, issue_price, collateral, policy } => {
                if state.quote().is_none() {
                    return Err(ExchangeError::NoQuote);
                }
                for (name, zero) in [
                    ("supply", supply.is_zero()),
                    ("issue_price", issue_price.is_zero()),
                    ("collateral", collateral.is_zero()),
                ] {
                    if zero {
                        return Err(SponsorError::NonPositiveParameter(name).into());
                    }
                }
                if state.token(&definition.id).is_some() {
                    return Err(SponsorError::DuplicateToken(definition.id.clone()).into());
                }
                definition.validate()?;
                policy.validate()?;
                let rate = reserve_rate(*collateral, *supply, *issue_price)?;
                let ev = Event::TokenIssued(TokenIssued {
                    definition: definition.clone(),
                    sponsor: sponsor.clone(),
                    supply: *supply,
                    kind: IssueKind::Sponsored {
                        issue_price: *issue_price,
                        collateral: *collateral,
                        policy: *policy,
                        reserve_rate: rate,
                    },
                });
                Ok((vec![ev], Outcome::Issued { token: definition.id.clone(), reserve_rate: Some(rate) }))
            }
            Command::IssueIncentive { definition, sponsor, schedule } => {
                if state.token(&definition.id).is_some() {
                    return Err(SponsorError::DuplicateToken(definition.id.clone()).into());
                }
                definition.validate()?;
                schedule.validate()?;
                let ev = Event::TokenIssued(TokenIssued {
                    definition: definition.clone(),
                    sponsor: sponsor.clone(),
                    supply: Amount::ZERO,
                    kind: IssueKind::Incentive { schedule: schedule.clone() },
                });
                Ok((vec![ev], Outcome::Issued { token: definition.id.clone(), reserve_rate: None }))
            }
            Command::Transfer { from, to, token, amount, category } => {
                let rec = state.token(token).ok_or_else(|| ExchangeError::UnknownToken(token.clone()))?;
                if let Some(cat) = category {
                    let decision = check_spend(&rec.issued.definition, cat, &self.config.categories)?;
                    if decision == SpendDecision::Denied {
                        let ev = Event::SpendDenied(SpendDenied {
                            account: from.clone(),
                            token: token.clone(),
                            category: cat.clone(),
                            amount: *amount,
                        });
                        return Ok((vec![ev], Outcome::SpendDenied { token: token.clone(), category: cat.clone() }));
                    }
                }
                let ev = Event::Transfer(TransferMade {
                    from: from.clone(),
                    to: to.clone(),
                    token: token.clone(),
                    amount: *amount,
                    category: category.clone(),
                });
                Ok((vec![ev], Outcome::Transferred { token: token.clone(), amount: *amount }))
            }
            Command::SubmitOrder { order_id, account, token, side, quantity, limit_price } => {
                let m = self.market(token)?;
                let arrival = m.open_orders.len() as u64;
                let order = Order {
                    order_id: order_id
                        .clone()
                        .unwrap_or_else(|| OrderId::new(format!("{token}-{}-{arrival}", m.round))),
                    account: account.clone(),
                    token: token.clone(),
                    side: *side,
                    quantity: *quantity,
                    limit_price: *limit_price,
                    round: m.round,
                    arrival,
                };
                Ok((vec![Event::OrderSubmitted(order.clone())], Outcome::OrderAccepted { order }))
            }
            Command::TriggerClear { token } => self.plan_clear(token),
            Command::SetCommandingPrice { token, price } => {
                let rec = state.token(token).ok_or_else(|| ExchangeError::UnknownToken(token.clone()))?;
                let policy = rec.policy().ok_or_else(|| ExchangeError::NotSponsored(token.clone()))?;
                let rs = state.round_state(token).ok_or_else(|| ExchangeError::NotSponsored(token.clone()))?;
                let trigger = policy.check(&rs, *price)?;
                let ev = Event::CommandingPriceSet(CommandingPriceSet {
                    token: token.clone(),
                    round: rs.round,
                    reference_price: rs.reference,
                    price: *price,
                    trigger,
                });
                Ok((
                    vec![ev],
                    Outcome::CommandingPriceAccepted { token: token.clone(), round: rs.round, price: *price, trigger },
                ))
            }
            Command::RecordPerformance { grantee, event } => {
                let grant = incentives::record_performance(grantee, event, &self.config.incentives, state.period())?;
                if state.token(&grant.token).is_none() {
                    return Err(ExchangeError::UnknownToken(grant.token.clone()));
                }
                Ok((vec![Event::IncentiveMinted(grant.clone())], Outcome::Granted { grant }))
            }
            Command::ApplyPolicyPeriod => self.plan_period(),
            Command::InjectGrowthPool { token, payer, pool } => {
                if state.token(token).is_none() {
                    return Err(ExchangeError::UnknownToken(token.clone()));
                }
                let payouts = incentives::distribute_growth(*pool, &state.vested_holdings(token))?;
                let ev = Event::GrowthDistributed(GrowthDistributed {
                    token: token.clone(),
                    payer: payer.clone(),
                    pool: *pool,
                    payouts: payouts.clone(),
                });
                Ok((vec![ev], Outcome::GrowthDistributed { token: token.clone(), payouts }))
            }
        }
    }

    /// Participant trades first, then the sponsor backstop on what is left.
    fn plan_clear(&self, token: &TokenId) -> Result<(Vec<Event>, Outcome), ExchangeError> {
        let state = self.state();
        let result = self.preview_clear(token)?;
        let position = state.reserve_position(token).ok_or_else(|| ExchangeError::NotSponsored(token.clone()))?;
        let mut events = vec![Event::RoundCleared(RoundCleared {
            token: token.clone(),
            round: result.round,
            reference_price: result.reference_price,
            clearing_price: result.clearing_price,
            matched_volume: result.matched_volume,
            reference_price_next: result.reference_price_next,
        })];
        if let Some(p) = result.clearing_price {
            for pair in &result.pairings {
                events.push(Event::TradeExecuted(TradeExecuted {
                    token: token.clone(),
                    round: result.round,
                    buyer: Party::Account(pair.buyer.clone()),
                    seller: Party::Account(pair.seller.clone()),
                    buy_order: Some(pair.buy_order.clone()),
                    sell_order: Some(pair.sell_order.clone()),
                    quantity: pair.quantity,
                    price: p,
                }));
            }
        }
        let ful = fulfill_residuals(&result, &position);
        for f in &ful.fills {
            let (buyer, seller, buy_order, sell_order) = match f.side {
                Side::Buy => (Party::Account(f.account.clone()), Party::Sponsor, Some(f.order_id.clone()), None),
                Side::Sell => (Party::Sponsor, Party::Account(f.account.clone()), None, Some(f.order_id.clone())),
            };
            events.push(Event::TradeExecuted(TradeExecuted {
                token: token.clone(),
                round: result.round,
                buyer,
                seller,
                buy_order,
                sell_order,
                quantity: f.quantity,
                price: f.price,
            }));
        }
        Ok((events, Outcome::Cleared { result, sponsor_fills: ful.fills, capped: ful.capped }))
    }

    /// Advances the period, then applies each token's inflation and any
    /// redistribution that falls due, in token id order.
    fn plan_period(&self) -> Result<(Vec<Event>, Outcome), ExchangeError> {
        let mut scratch = self.state().clone();
        let period = scratch.period() + 1;
        let mut events = Vec::new();
        let mut push = |scratch: &mut State, ev: Event| -> Result<(), ExchangeError> {
            scratch.apply(&ev).map_err(LedgerError::from)?;
            events.push(ev);
            Ok(())
        };
        push(&mut scratch, Event::PeriodAdvanced { period })?;
        let ids: Vec<TokenId> = scratch.tokens().map(|t| t.id().clone()).collect();
        let mut inflation = Vec::new();
        let mut redistribution = Vec::new();
        for id in ids {
            let rec = scratch.token(&id).expect("listed token");
            let rate = rec.issued.definition.inflation_rate;
            let supply = rec.supply;
            let redis = rec.issued.definition.redistribution;
            let minted = inflation_mint(supply, rate);
            let ev = InflationApplied {
                token: id.clone(),
                period,
                rate,
                supply_before: supply,
                minted,
                recipients: scratch.inflation_recipients(&id, minted),
            };
            push(&mut scratch, Event::InflationApplied(ev.clone()))?;
            inflation.push(ev);
            if let Some(policy) = redis.filter(|p| p.due(period)) {
                let base: BTreeMap<AccountId, Amount> = scratch.redistribution_base(&id);
                let ev = match redistribute(&base, &policy) {
                    Ok(transfers) => RedistributionApplied { token: id.clone(), period, transfers, skipped: false },
                    Err(PolicyError::FewerThanTwoAccounts) => {
                        RedistributionApplied { token: id.clone(), period, transfers: Vec::new(), skipped: true }
                    }
                    Err(e) => return Err(e.into()),
                };
                push(&mut scratch, Event::RedistributionApplied(ev.clone()))?;
                redistribution.push(ev);
            }
        }
        Ok((events, Outcome::PeriodApplied { period, inflation, redistribution }))
    }
}

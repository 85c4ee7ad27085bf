//! State reconstructed by folding ledger events from genesis.
//!
//! [`State::apply`] is both the validator used on append and the reducer
//! used on replay: an event is accepted only if it is consistent with the
//! state produced by every earlier event.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::event::{
    CommandingPriceSet, Event, GrowthDistributed, InflationApplied, IssueKind, Party,
    RedistributionApplied, RoundCleared, SpendDenied, TokenIssued, TradeExecuted, TransferMade,
};
use crate::auction::{clear_round, ClearingResult, Order, Side};
use crate::fixed::{Amount, Fraction, Price};
use crate::ids::{AccountId, OrderId, TokenId};
use crate::incentives::{distribute_growth, IncentiveGrant};
use crate::policy::{inflation_mint, redistribute, split_pro_rata, InflationRecipient, Payout, PolicyError};
use crate::sponsor::{reserve_rate, CommandingPricePolicy, ReservePosition, RoundState};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ValidationError(pub String);

macro_rules! reject {
    ($($arg:tt)*) => {
        return Err(ValidationError(format!($($arg)*)))
    };
}

/// Per-(account, token) balances. Derived from the ledger, never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceSheet {
    balances: BTreeMap<TokenId, BTreeMap<AccountId, Amount>>,
}

impl BalanceSheet {
    pub fn get(&self, account: &AccountId, token: &TokenId) -> Amount {
        self.balances
            .get(token)
            .and_then(|m| m.get(account))
            .copied()
            .unwrap_or_default()
    }

    /// Holders of `token` that have ever had a balance entry.
    pub fn holders(&self, token: &TokenId) -> impl Iterator<Item = (&AccountId, Amount)> {
        self.balances.get(token).into_iter().flat_map(|m| m.iter().map(|(a, b)| (a, *b)))
    }

    pub fn total(&self, token: &TokenId) -> u128 {
        self.holders(token).map(|(_, b)| b.raw() as u128).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AccountId, &TokenId, Amount)> {
        self.balances
            .iter()
            .flat_map(|(t, m)| m.iter().map(move |(a, b)| (a, t, *b)))
    }

    pub fn is_empty(&self) -> bool {
        self.balances.is_empty()
    }

    fn credit(&mut self, account: &AccountId, token: &TokenId, amount: Amount) {
        *self
            .balances
            .entry(token.clone())
            .or_default()
            .entry(account.clone())
            .or_default() += amount;
    }

    fn debit(&mut self, account: &AccountId, token: &TokenId, amount: Amount) {
        let slot = self
            .balances
            .get_mut(token)
            .and_then(|m| m.get_mut(account))
            .expect("debit of validated balance");
        *slot -= amount;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TokenRecord {
    pub issued: TokenIssued,
    /// Current total supply.
    pub supply: Amount,
    pub inflated: Amount,
    pub incentive_minted: Amount,
    pub last_inflation_period: Option<u64>,
    pub last_redistribution_period: Option<u64>,
}

impl TokenRecord {
    pub fn id(&self) -> &TokenId {
        &self.issued.definition.id
    }

    pub fn sponsor(&self) -> &AccountId {
        &self.issued.sponsor
    }

    pub fn policy(&self) -> Option<&CommandingPricePolicy> {
        match &self.issued.kind {
            IssueKind::Sponsored { policy, .. } => Some(policy),
            _ => None,
        }
    }

    pub fn issue_price(&self) -> Option<Price> {
        match &self.issued.kind {
            IssueKind::Sponsored { issue_price, .. } => Some(*issue_price),
            _ => None,
        }
    }
}

/// Auction bookkeeping for one sponsored token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MarketState {
    /// The open round.
    pub round: u64,
    /// Reference price of the open round.
    pub reference: Price,
    pub open_orders: Vec<Order>,
    pub commanded: Option<Price>,
    pub zero_volume_streak: u32,
    pub last_move: Option<(Price, Price)>,
    #[serde(skip)]
    last_clearing: Option<SettlementBudget>,
}

/// What the most recent clearing still permits to settle.
#[derive(Debug, Clone, PartialEq, Eq)]
struct SettlementBudget {
    round: u64,
    clearing_price: Option<Price>,
    settlement_price: Price,
    fills: HashMap<OrderId, (AccountId, Side, Amount)>,
    residuals: HashMap<OrderId, (AccountId, Side, Amount)>,
}

impl SettlementBudget {
    fn from_result(result: &ClearingResult) -> Self {
        SettlementBudget {
            round: result.round,
            clearing_price: result.clearing_price,
            settlement_price: result.settlement_price(),
            fills: result
                .fills
                .iter()
                .map(|f| (f.order_id.clone(), (f.account.clone(), f.side, f.quantity)))
                .collect(),
            residuals: result
                .residual_buys
                .iter()
                .chain(&result.residual_sells)
                .map(|r| (r.order_id.clone(), (r.account.clone(), r.side, r.quantity)))
                .collect(),
        }
    }
}

fn take_budget(
    budget: &HashMap<OrderId, (AccountId, Side, Amount)>,
    order: &Option<OrderId>,
    account: &AccountId,
    side: Side,
    qty: Amount,
) -> Result<OrderId, ValidationError> {
    let Some(id) = order else {
        reject!("trade with an account must name its order");
    };
    match budget.get(id) {
        Some((a, s, left)) if a == account && *s == side && *left >= qty => Ok(id.clone()),
        Some(_) => reject!("trade exceeds what order {id} may settle"),
        None => reject!("order {id} has nothing to settle in the cleared round"),
    }
}

#[derive(Debug, Clone, Default)]
pub struct State {
    quote: Option<TokenId>,
    tokens: BTreeMap<TokenId, TokenRecord>,
    sheet: BalanceSheet,
    reserved: HashMap<(AccountId, TokenId), Amount>,
    grants: HashMap<(AccountId, TokenId), Vec<IncentiveGrant>>,
    markets: BTreeMap<TokenId, MarketState>,
    period: u64,
    commands: HashSet<String>,
}

impl State {
    pub fn balances(&self) -> &BalanceSheet {
        &self.sheet
    }

    pub fn quote(&self) -> Option<&TokenId> {
        self.quote.as_ref()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &TokenRecord> {
        self.tokens.values()
    }

    pub fn token(&self, id: &TokenId) -> Option<&TokenRecord> {
        self.tokens.get(id)
    }

    pub fn market(&self, id: &TokenId) -> Option<&MarketState> {
        self.markets.get(id)
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn has_command(&self, key: &str) -> bool {
        self.commands.contains(key)
    }

    pub fn reserved(&self, account: &AccountId, token: &TokenId) -> Amount {
        self.reserved
            .get(&(account.clone(), token.clone()))
            .copied()
            .unwrap_or_default()
    }

    /// Unvested incentive units held by `account`.
    pub fn locked(&self, account: &AccountId, token: &TokenId) -> Amount {
        self.grants
            .get(&(account.clone(), token.clone()))
            .map(|gs| gs.iter().map(|g| g.unvested(self.period)).sum())
            .unwrap_or_default()
    }

    /// Balance that is neither reserved by open orders nor unvested.
    pub fn available(&self, account: &AccountId, token: &TokenId) -> Amount {
        self.sheet
            .get(account, token)
            .saturating_sub(self.reserved(account, token))
            .saturating_sub(self.locked(account, token))
    }

    pub fn grants(&self, account: &AccountId, token: &TokenId) -> &[IncentiveGrant] {
        self.grants
            .get(&(account.clone(), token.clone()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn reserve_position(&self, token: &TokenId) -> Option<ReservePosition> {
        let rec = self.tokens.get(token)?;
        let issue_price = rec.issue_price()?;
        let quote = self.quote.as_ref()?;
        Some(ReservePosition {
            token: token.clone(),
            sponsor: rec.sponsor().clone(),
            collateral: self.sheet.get(&AccountId::reserve(token), quote),
            issued_supply: rec.supply,
            issue_price,
            inventory: self.sheet.get(rec.sponsor(), token),
        })
    }

    pub fn round_state(&self, token: &TokenId) -> Option<RoundState> {
        let m = self.markets.get(token)?;
        let pos = self.reserve_position(token)?;
        Some(RoundState {
            round: m.round,
            reference: m.reference,
            reserve_rate: pos.reserve_rate().unwrap_or(Fraction::ZERO),
            last_move: m.last_move,
            zero_volume_streak: m.zero_volume_streak,
            commanded_this_round: m.commanded.is_some(),
        })
    }

    /// Non-system holders, other than the token's sponsor, with their
    /// available balances. Used by redistribution.
    pub fn redistribution_base(&self, token: &TokenId) -> BTreeMap<AccountId, Amount> {
        let sponsor = self.tokens.get(token).map(|r| r.sponsor().clone());
        self.sheet
            .holders(token)
            .filter(|(a, _)| !a.is_system() && Some(*a) != sponsor.as_ref())
            .map(|(a, _)| (a.clone(), self.available(a, token)))
            .collect()
    }

    /// Vested (unlocked) holdings of an incentive token, sponsor excluded.
    pub fn vested_holdings(&self, token: &TokenId) -> BTreeMap<AccountId, Amount> {
        let sponsor = self.tokens.get(token).map(|r| r.sponsor().clone());
        self.sheet
            .holders(token)
            .filter(|(a, _)| !a.is_system() && Some(*a) != sponsor.as_ref())
            .map(|(a, b)| (a.clone(), b.saturating_sub(self.locked(a, token))))
            .filter(|(_, v)| !v.is_zero())
            .collect()
    }

    /// Expected recipients of one inflation period.
    pub fn inflation_recipients(&self, token: &TokenId, minted: Amount) -> Vec<Payout> {
        let Some(rec) = self.tokens.get(token) else {
            return Vec::new();
        };
        if minted.is_zero() {
            return Vec::new();
        }
        let to_sponsor = || vec![Payout { account: rec.sponsor().clone(), amount: minted }];
        match rec.issued.definition.inflation_recipient {
            InflationRecipient::Sponsor => to_sponsor(),
            InflationRecipient::ProRata => {
                let weights: BTreeMap<AccountId, Amount> = self
                    .sheet
                    .holders(token)
                    .filter(|(a, b)| !a.is_system() && !b.is_zero())
                    .map(|(a, b)| (a.clone(), b))
                    .collect();
                split_pro_rata(minted, &weights).unwrap_or_else(to_sponsor)
            }
        }
    }

    fn require_quote(&self) -> Result<&TokenId, ValidationError> {
        match &self.quote {
            Some(q) => Ok(q),
            None => reject!("no quote currency has been issued"),
        }
    }

    fn require_token(&self, token: &TokenId) -> Result<&TokenRecord, ValidationError> {
        match self.tokens.get(token) {
            Some(t) => Ok(t),
            None => reject!("unknown token {token}"),
        }
    }

    fn require_user(account: &AccountId) -> Result<(), ValidationError> {
        if account.as_str().is_empty() || account.is_system() {
            reject!("account `{account}` is not a user account");
        }
        Ok(())
    }

    /// Validates `event` against the current state and, if it is
    /// consistent, applies it. On error the state is unchanged.
    pub fn apply(&mut self, event: &Event) -> Result<(), ValidationError> {
        match event {
            Event::TokenIssued(e) => self.token_issued(e),
            Event::Transfer(e) => self.transfer(e),
            Event::OrderSubmitted(o) => self.order_submitted(o),
            Event::RoundCleared(e) => self.round_cleared(e),
            Event::TradeExecuted(e) => self.trade_executed(e),
            Event::CommandingPriceSet(e) => self.commanding_price_set(e),
            Event::IncentiveMinted(g) => self.incentive_minted(g),
            Event::InflationApplied(e) => self.inflation_applied(e),
            Event::RedistributionApplied(e) => self.redistribution_applied(e),
            Event::SpendDenied(e) => self.spend_denied(e),
            Event::PeriodAdvanced { period } => {
                if *period != self.period + 1 {
                    reject!("period {period} does not follow {}", self.period);
                }
                self.period = *period;
                Ok(())
            }
            Event::GrowthDistributed(e) => self.growth_distributed(e),
            Event::CommandAccepted { key, .. } => {
                if key.is_empty() {
                    reject!("empty idempotency key");
                }
                if !self.commands.insert(key.clone()) {
                    reject!("command {key} already recorded");
                }
                Ok(())
            }
        }
    }

    fn token_issued(&mut self, e: &TokenIssued) -> Result<(), ValidationError> {
        let def = &e.definition;
        def.validate().map_err(|err| ValidationError(err.to_string()))?;
        Self::require_user(&e.sponsor)?;
        if self.tokens.contains_key(&def.id) {
            reject!("DuplicateToken: {} is already issued", def.id);
        }
        match &e.kind {
            IssueKind::Quote => {
                if self.quote.is_some() {
                    reject!("a quote currency already exists");
                }
                if !def.inflation_rate.is_zero() || def.spending_domains != crate::policy::SpendingDomains::Universal {
                    reject!("the quote currency has zero inflation and universal spending domains");
                }
                if e.supply.is_zero() {
                    reject!("NonPositiveParameter: supply must be positive");
                }
            }
            IssueKind::Sponsored { issue_price, collateral, policy, reserve_rate: recorded } => {
                let quote = self.require_quote()?.clone();
                if e.supply.is_zero() || issue_price.is_zero() || collateral.is_zero() {
                    reject!("NonPositiveParameter: supply, issue price and collateral must be positive");
                }
                if def.inflation_rate.is_zero() {
                    reject!("sponsored tokens require a positive inflation rate");
                }
                if def.vesting_class.is_some() {
                    reject!("sponsored tokens do not vest");
                }
                policy.validate().map_err(|err| ValidationError(err.to_string()))?;
                let rate = reserve_rate(*collateral, e.supply, *issue_price)
                    .map_err(|err| ValidationError(err.to_string()))?;
                if rate != *recorded {
                    reject!("recorded reserve rate {recorded} differs from {rate}");
                }
                if self.available(&e.sponsor, &quote) < *collateral {
                    reject!("sponsor {} cannot post collateral {collateral}", e.sponsor);
                }
                self.sheet.debit(&e.sponsor, &quote, *collateral);
                self.sheet.credit(&AccountId::reserve(&def.id), &quote, *collateral);
                self.markets.insert(
                    def.id.clone(),
                    MarketState {
                        round: 0,
                        reference: *issue_price,
                        open_orders: Vec::new(),
                        commanded: None,
                        zero_volume_streak: 0,
                        last_move: None,
                        last_clearing: None,
                    },
                );
            }
            IssueKind::Incentive { schedule } => {
                self.require_quote()?;
                schedule.validate().map_err(|err| ValidationError(err.to_string()))?;
                if def.vesting_class.as_deref() != Some(schedule.id.as_str()) {
                    reject!("incentive token vesting class must name schedule {}", schedule.id);
                }
            }
        }
        if matches!(e.kind, IssueKind::Quote) {
            self.quote = Some(def.id.clone());
        }
        if !e.supply.is_zero() {
            self.sheet.credit(&e.sponsor, &def.id, e.supply);
        }
        self.tokens.insert(
            def.id.clone(),
            TokenRecord {
                issued: e.clone(),
                supply: e.supply,
                inflated: Amount::ZERO,
                incentive_minted: Amount::ZERO,
                last_inflation_period: None,
                last_redistribution_period: None,
            },
        );
        Ok(())
    }

    fn transfer(&mut self, e: &TransferMade) -> Result<(), ValidationError> {
        let rec = self.require_token(&e.token)?;
        Self::require_user(&e.from)?;
        Self::require_user(&e.to)?;
        if e.from == e.to {
            reject!("transfer to self");
        }
        if e.amount.is_zero() {
            reject!("transfer amount must be positive");
        }
        if let Some(category) = &e.category {
            if !rec.issued.definition.spending_domains.permits(category) {
                reject!("{} may not be spent on {category}", e.token);
            }
        }
        let available = self.available(&e.from, &e.token);
        if available < e.amount {
            reject!(
                "{} has {available} {} available, needs {}",
                e.from,
                e.token,
                e.amount
            );
        }
        self.sheet.debit(&e.from, &e.token, e.amount);
        self.sheet.credit(&e.to, &e.token, e.amount);
        Ok(())
    }

    fn order_submitted(&mut self, o: &Order) -> Result<(), ValidationError> {
        let quote = self.require_quote()?.clone();
        let rec = self.require_token(&o.token)?;
        Self::require_user(&o.account)?;
        if rec.sponsor() == &o.account {
            reject!("the sponsor trades through residual fulfillment, not orders");
        }
        let Some(market) = self.markets.get(&o.token) else {
            reject!("{} has no auction market", o.token);
        };
        if o.quantity.is_zero() || o.limit_price.is_zero() {
            reject!("order quantity and limit price must be positive");
        }
        if o.round != market.round {
            reject!("order for round {} but round {} is open", o.round, market.round);
        }
        if o.arrival != market.open_orders.len() as u64 {
            reject!("order arrival {} out of sequence", o.arrival);
        }
        if market.open_orders.iter().any(|x| x.order_id == o.order_id) {
            reject!("duplicate order id {}", o.order_id);
        }
        let (token, need) = match o.side {
            Side::Sell => (o.token.clone(), o.quantity),
            Side::Buy => (quote, o.limit_price.notional_ceil(o.quantity)),
        };
        let available = self.available(&o.account, &token);
        if available < need {
            reject!("{} has {available} {token} available, order needs {need}", o.account);
        }
        *self.reserved.entry((o.account.clone(), token)).or_default() += need;
        self.markets.get_mut(&o.token).unwrap().open_orders.push(o.clone());
        Ok(())
    }

    fn round_cleared(&mut self, e: &RoundCleared) -> Result<(), ValidationError> {
        let quote = self.require_quote()?.clone();
        let Some(market) = self.markets.get(&e.token) else {
            reject!("{} has no auction market", e.token);
        };
        if e.round != market.round {
            reject!("clearing round {} but round {} is open", e.round, market.round);
        }
        if e.reference_price != market.reference {
            reject!("clearing used reference {} instead of {}", e.reference_price, market.reference);
        }
        let mut result = clear_round(&market.open_orders, market.reference)
            .map_err(|err| ValidationError(err.to_string()))?;
        result.token = e.token.clone();
        result.round = e.round;
        if result.clearing_price != e.clearing_price || result.matched_volume != e.matched_volume {
            reject!("recorded clearing does not match the round's orders");
        }
        let expected_next = market
            .commanded
            .or(e.clearing_price)
            .unwrap_or(market.reference);
        if e.reference_price_next != expected_next {
            reject!("next reference {} should be {expected_next}", e.reference_price_next);
        }

        let market = self.markets.get_mut(&e.token).unwrap();
        for o in market.open_orders.drain(..) {
            let (token, held) = match o.side {
                Side::Sell => (o.token.clone(), o.quantity),
                Side::Buy => (quote.clone(), o.limit_price.notional_ceil(o.quantity)),
            };
            let key = (o.account.clone(), token);
            let slot = self.reserved.get_mut(&key).expect("reservation exists");
            *slot -= held;
            if slot.is_zero() {
                self.reserved.remove(&key);
            }
        }
        if let Some(p) = e.clearing_price {
            market.last_move = Some((market.reference, p));
            market.zero_volume_streak = 0;
        } else {
            market.zero_volume_streak += 1;
        }
        market.last_clearing = Some(SettlementBudget::from_result(&result));
        market.round += 1;
        market.reference = e.reference_price_next;
        market.commanded = None;
        Ok(())
    }

    fn trade_executed(&mut self, e: &TradeExecuted) -> Result<(), ValidationError> {
        let quote = self.require_quote()?.clone();
        let sponsor = self.require_token(&e.token)?.sponsor().clone();
        let reserve = AccountId::reserve(&e.token);
        let Some(market) = self.markets.get(&e.token) else {
            reject!("{} has no auction market", e.token);
        };
        let Some(budget) = &market.last_clearing else {
            reject!("trade references a round that has not cleared");
        };
        if e.round != budget.round {
            reject!("trade references round {} but round {} was cleared last", e.round, budget.round);
        }
        if e.quantity.is_zero() {
            reject!("trade quantity must be positive");
        }
        let notional = e.price.notional(e.quantity);
        let (token_from, quote_to, buy_key, sell_key, from_residual) = match (&e.buyer, &e.seller) {
            (Party::Account(b), Party::Account(s)) => {
                if budget.clearing_price != Some(e.price) {
                    reject!("participant trades settle at the clearing price");
                }
                let bk = take_budget(&budget.fills, &e.buy_order, b, Side::Buy, e.quantity)?;
                let sk = take_budget(&budget.fills, &e.sell_order, s, Side::Sell, e.quantity)?;
                (s.clone(), s.clone(), Some(bk), Some(sk), false)
            }
            (Party::Account(b), Party::Sponsor) => {
                if budget.settlement_price != e.price {
                    reject!("sponsor trades settle at {}", budget.settlement_price);
                }
                let bk = take_budget(&budget.residuals, &e.buy_order, b, Side::Buy, e.quantity)?;
                (sponsor.clone(), reserve.clone(), Some(bk), None, true)
            }
            (Party::Sponsor, Party::Account(s)) => {
                if budget.settlement_price != e.price {
                    reject!("sponsor trades settle at {}", budget.settlement_price);
                }
                let sk = take_budget(&budget.residuals, &e.sell_order, s, Side::Sell, e.quantity)?;
                (s.clone(), s.clone(), None, Some(sk), true)
            }
            (Party::Sponsor, Party::Sponsor) => reject!("the sponsor cannot trade with itself"),
        };
        let quote_from = match &e.buyer {
            Party::Account(b) => b.clone(),
            Party::Sponsor => reserve.clone(),
        };
        let token_to = match &e.buyer {
            Party::Account(b) => b.clone(),
            Party::Sponsor => sponsor.clone(),
        };
        // Reservations were released at clearing; settle against balances.
        if self.sheet.get(&token_from, &e.token) < e.quantity {
            reject!("{token_from} cannot deliver {} {}", e.quantity, e.token);
        }
        if self.sheet.get(&quote_from, &quote) < notional {
            reject!("{quote_from} cannot pay {notional}");
        }

        let market = self.markets.get_mut(&e.token).unwrap();
        let budget = market.last_clearing.as_mut().unwrap();
        let map = if from_residual { &mut budget.residuals } else { &mut budget.fills };
        for key in [buy_key, sell_key].into_iter().flatten() {
            map.get_mut(&key).unwrap().2 -= e.quantity;
        }
        self.sheet.debit(&token_from, &e.token, e.quantity);
        self.sheet.credit(&token_to, &e.token, e.quantity);
        if !notional.is_zero() {
            self.sheet.debit(&quote_from, &quote, notional);
            self.sheet.credit(&quote_to, &quote, notional);
        }
        Ok(())
    }

    fn commanding_price_set(&mut self, e: &CommandingPriceSet) -> Result<(), ValidationError> {
        let rec = self.require_token(&e.token)?;
        let Some(policy) = rec.policy().copied() else {
            reject!("{} has no commanding-price policy", e.token);
        };
        let state = self.round_state(&e.token).expect("sponsored token has a market");
        if e.round != state.round {
            reject!("command for round {} but round {} is open", e.round, state.round);
        }
        if e.reference_price != state.reference {
            reject!("command recorded against reference {} not {}", e.reference_price, state.reference);
        }
        let trigger = policy.check(&state, e.price).map_err(|err| ValidationError(err.to_string()))?;
        if trigger != e.trigger {
            reject!("recorded trigger {:?} but {:?} holds", e.trigger, trigger);
        }
        self.markets.get_mut(&e.token).unwrap().commanded = Some(e.price);
        Ok(())
    }

    fn incentive_minted(&mut self, g: &IncentiveGrant) -> Result<(), ValidationError> {
        let rec = self.require_token(&g.token)?;
        Self::require_user(&g.grantee)?;
        let IssueKind::Incentive { schedule } = &rec.issued.kind else {
            reject!("{} is not an incentive token", g.token);
        };
        if &g.schedule != schedule {
            reject!("grant schedule {} does not match token schedule {}", g.schedule.id, schedule.id);
        }
        if g.granted_at != self.period {
            reject!("grant dated period {} during period {}", g.granted_at, self.period);
        }
        if g.amount.is_zero() {
            reject!("grant amount must be positive");
        }
        let rec = self.tokens.get_mut(&g.token).unwrap();
        rec.supply += g.amount;
        rec.incentive_minted += g.amount;
        self.sheet.credit(&g.grantee, &g.token, g.amount);
        self.grants
            .entry((g.grantee.clone(), g.token.clone()))
            .or_default()
            .push(g.clone());
        Ok(())
    }

    fn inflation_applied(&mut self, e: &InflationApplied) -> Result<(), ValidationError> {
        let rec = self.require_token(&e.token)?;
        if e.period != self.period {
            reject!("inflation for period {} during period {}", e.period, self.period);
        }
        if rec.last_inflation_period == Some(e.period) {
            reject!("{}", PolicyError::AlreadyAppliedThisPeriod(e.token.clone(), e.period));
        }
        if e.rate != rec.issued.definition.inflation_rate {
            reject!("inflation rate {} differs from the token's {}", e.rate, rec.issued.definition.inflation_rate);
        }
        if e.supply_before != rec.supply {
            reject!("supply before inflation is {} not {}", rec.supply, e.supply_before);
        }
        let minted = inflation_mint(rec.supply, e.rate);
        if e.minted != minted {
            reject!("inflation mints {minted}, not {}", e.minted);
        }
        if e.recipients != self.inflation_recipients(&e.token, minted) {
            reject!("inflation recipients do not follow the token's recipient rule");
        }
        for p in &e.recipients {
            self.sheet.credit(&p.account, &e.token, p.amount);
        }
        let rec = self.tokens.get_mut(&e.token).unwrap();
        rec.supply += minted;
        rec.inflated += minted;
        rec.last_inflation_period = Some(e.period);
        Ok(())
    }

    fn redistribution_applied(&mut self, e: &RedistributionApplied) -> Result<(), ValidationError> {
        let rec = self.require_token(&e.token)?;
        let Some(policy) = rec.issued.definition.redistribution else {
            reject!("{} has no redistribution policy", e.token);
        };
        if e.period != self.period || !policy.due(e.period) {
            reject!("redistribution for {} is not due in period {}", e.token, e.period);
        }
        if rec.last_redistribution_period == Some(e.period) {
            reject!("redistribution for {} already applied in period {}", e.token, e.period);
        }
        let base = self.redistribution_base(&e.token);
        match redistribute(&base, &policy) {
            Ok(t) if !e.skipped && t == e.transfers => {}
            Err(PolicyError::FewerThanTwoAccounts) if e.skipped && e.transfers.is_empty() => {}
            _ => reject!("recorded redistribution does not follow the token's policy"),
        }
        for t in &e.transfers {
            self.sheet.debit(&t.from, &e.token, t.amount);
            self.sheet.credit(&t.to, &e.token, t.amount);
        }
        self.tokens.get_mut(&e.token).unwrap().last_redistribution_period = Some(e.period);
        Ok(())
    }

    fn spend_denied(&mut self, e: &SpendDenied) -> Result<(), ValidationError> {
        let rec = self.require_token(&e.token)?;
        if rec.issued.definition.spending_domains.permits(&e.category) {
            reject!("{} may be spent on {}; nothing to deny", e.token, e.category);
        }
        Ok(())
    }

    fn growth_distributed(&mut self, e: &GrowthDistributed) -> Result<(), ValidationError> {
        let quote = self.require_quote()?.clone();
        let rec = self.require_token(&e.token)?;
        Self::require_user(&e.payer)?;
        if !matches!(rec.issued.kind, IssueKind::Incentive { .. }) {
            reject!("{} is not an incentive token", e.token);
        }
        let expected = distribute_growth(e.pool, &self.vested_holdings(&e.token))
            .map_err(|err| ValidationError(err.to_string()))?;
        if expected != e.payouts {
            reject!("growth payouts do not match vested holdings");
        }
        if self.available(&e.payer, &quote) < e.pool {
            reject!("{} cannot fund a pool of {}", e.payer, e.pool);
        }
        self.sheet.debit(&e.payer, &quote, e.pool);
        for p in &e.payouts {
            self.sheet.credit(&p.account, &quote, p.amount);
        }
        Ok(())
    }
}

//! Exchange plumbing shared by the scenarios. Only public `ito-core`
//! commands and queries are used.

use ito_core::auction::Side;
use ito_core::policy::{InflationRecipient, SpendingDomains, TokenDefinition};
use ito_core::sponsor::CommandingPricePolicy;
use ito_core::{AccountId, Amount, Command, Exchange, ExchangeConfig, Fraction, Outcome, Price, TokenId};

use crate::agents::Agent;
use crate::config::ScenarioConfig;
use crate::SimError;

/// Quote units minted for the treasury, which also acts as lender.
const TREASURY_SUPPLY: u64 = 1_000_000_000_000;

pub(crate) struct Cleared {
    pub clearing: Option<f64>,
    pub settlement: f64,
    pub volume: f64,
}

pub(crate) struct Market {
    pub ex: Exchange,
    pub quote: TokenId,
    pub token: TokenId,
    pub sponsor: AccountId,
    pub treasury: AccountId,
}

fn amount(x: f64, what: &str) -> Result<Amount, SimError> {
    Amount::from_f64(x).ok_or_else(|| SimError::ConfigInvalid(format!("{what} {x} is not representable")))
}

impl Market {
    /// Issues the quote currency and the sponsored token, then endows every
    /// agent with cash and tokens.
    pub fn setup(cfg: &ScenarioConfig, agents: &[Agent]) -> Result<Market, SimError> {
        let mut m = Market {
            ex: Exchange::in_memory(ExchangeConfig::default()),
            quote: TokenId::new("USD"),
            token: TokenId::new("ITO"),
            sponsor: AccountId::new("sponsor"),
            treasury: AccountId::new("treasury"),
        };
        let issue_price = Price::from_f64(cfg.fundamental)
            .filter(|p| !p.is_zero())
            .ok_or_else(|| SimError::ConfigInvalid("fundamental is below one price tick".into()))?;
        let per_agent = amount(cfg.agents.initial_tokens, "initial_tokens")?;
        let cash = amount(cfg.agents.initial_cash, "initial_cash")?;
        let inventory = amount(cfg.sponsor.inventory, "inventory")?;
        let supply = Amount::from_raw(per_agent.raw() * agents.len() as u64) + inventory;
        if supply.is_zero() {
            return Err(SimError::ConfigInvalid("token supply would be zero".into()));
        }
        let collateral = amount(cfg.sponsor.reserve_rate * supply.to_f64() * issue_price.to_f64(), "collateral")?;
        let inflation = Fraction::from_f64(cfg.sponsor.inflation_rate)
            .filter(|f| !f.is_zero())
            .ok_or_else(|| SimError::ConfigInvalid("inflation_rate rounds to zero".into()))?;

        m.ex.run(Command::IssueQuote {
            token: m.quote.clone(),
            treasury: m.treasury.clone(),
            supply: Amount::from_units(TREASURY_SUPPLY),
        })?;
        m.transfer(&m.treasury.clone(), &m.sponsor.clone(), &m.quote.clone(), collateral)?;
        m.ex.run(Command::IssueToken {
            definition: TokenDefinition {
                id: m.token.clone(),
                inflation_rate: inflation,
                inflation_recipient: InflationRecipient::Sponsor,
                redistribution: None,
                spending_domains: SpendingDomains::Universal,
                vesting_class: None,
            },
            sponsor: m.sponsor.clone(),
            supply,
            issue_price,
            collateral,
            policy: CommandingPricePolicy::default(),
        })?;
        for a in agents {
            m.transfer(&m.sponsor.clone(), &a.account, &m.token.clone(), per_agent)?;
            m.transfer(&m.treasury.clone(), &a.account, &m.quote.clone(), cash)?;
        }
        Ok(m)
    }

    /// Zero amounts are skipped.
    pub fn transfer(&mut self, from: &AccountId, to: &AccountId, token: &TokenId, amount: Amount) -> Result<(), SimError> {
        if amount.is_zero() {
            return Ok(());
        }
        self.ex.run(Command::Transfer {
            from: from.clone(),
            to: to.clone(),
            token: token.clone(),
            amount,
            category: None,
        })?;
        Ok(())
    }

    pub fn cash(&self, account: &AccountId) -> Amount {
        self.ex.state().available(account, &self.quote)
    }

    pub fn holdings(&self, account: &AccountId) -> Amount {
        self.ex.state().available(account, &self.token)
    }

    pub fn reference(&self) -> f64 {
        self.ex.state().market(&self.token).map_or(0.0, |m| m.reference.to_f64())
    }

    pub fn reserve_rate(&self) -> f64 {
        self.ex
            .state()
            .reserve_position(&self.token)
            .and_then(|p| p.reserve_rate().ok())
            .map_or(0.0, |r| r.to_f64())
    }

    /// Places a limit order after checking the account can cover it.
    /// Returns the submitted price, or `None` when the order was skipped.
    pub fn submit(&mut self, account: &AccountId, side: Side, size: Amount, limit: f64) -> Result<Option<Price>, SimError> {
        let Some(price) = Price::from_f64(limit).filter(|p| !p.is_zero()) else {
            return Ok(None);
        };
        let covered = match side {
            Side::Buy => self.cash(account) >= price.notional_ceil(size),
            Side::Sell => self.holdings(account) >= size,
        };
        if !covered || size.is_zero() {
            return Ok(None);
        }
        self.ex.run(Command::SubmitOrder {
            order_id: None,
            account: account.clone(),
            token: self.token.clone(),
            side,
            quantity: size,
            limit_price: price,
        })?;
        Ok(Some(price))
    }

    /// Proposes `target`, clamped into the band around the current
    /// reference. Rejections (no trigger, already commanded) are expected
    /// and ignored.
    pub fn command_toward(&mut self, target: f64) -> Result<bool, SimError> {
        let state = self.ex.state();
        let (Some(record), Some(market)) = (state.token(&self.token), state.market(&self.token)) else {
            return Ok(false);
        };
        let Some(policy) = record.policy().copied() else {
            return Ok(false);
        };
        let (lo, hi) = policy.band_edges(market.reference);
        let Some(want) = Price::from_f64(target) else {
            return Ok(false);
        };
        let price = want.clamp(lo, hi);
        if price == market.reference || price.is_zero() {
            return Ok(false);
        }
        match self.ex.run(Command::SetCommandingPrice { token: self.token.clone(), price }) {
            Ok(_) => Ok(true),
            Err(ito_core::ExchangeError::Sponsor(_)) => Ok(false),
            Err(e) => Err(e.into()),
        }
    }

    pub fn clear(&mut self) -> Result<Cleared, SimError> {
        match self.ex.run(Command::TriggerClear { token: self.token.clone() })? {
            Outcome::Cleared { result, sponsor_fills, .. } => {
                let backstop: Amount = sponsor_fills.iter().map(|f| f.quantity).sum();
                Ok(Cleared {
                    clearing: result.clearing_price.map(Price::to_f64),
                    settlement: result.settlement_price().to_f64(),
                    volume: (result.matched_volume + backstop).to_f64(),
                })
            }
            other => unreachable!("clearing produced {other:?}"),
        }
    }

    pub fn apply_policy_period(&mut self) -> Result<(), SimError> {
        self.ex.run(Command::ApplyPolicyPeriod)?;
        Ok(())
    }

    /// Gross wealth of each agent: cash plus tokens at `price`.
    pub fn wealth(&self, agents: &[Agent], price: f64) -> Vec<f64> {
        let sheet = self.ex.state().balances();
        agents
            .iter()
            .map(|a| sheet.get(&a.account, &self.quote).to_f64() + sheet.get(&a.account, &self.token).to_f64() * price)
            .collect()
    }
}

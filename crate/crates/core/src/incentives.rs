//! Performance-triggered incentive tokens with vesting, and pro-rata sharing
//! of growth pools among vested holders.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::fixed::{Amount, Fraction};
use crate::ids::{AccountId, TokenId};
use crate::policy::{split_pro_rata, Payout};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IncentiveError {
    #[error("UnknownTrigger: no incentive rule for `{0}`")]
    UnknownTrigger(String),
    #[error("InvalidSchedule: {0}")]
    InvalidSchedule(String),
    #[error("ZeroGrant: performance event mints nothing")]
    ZeroGrant,
    #[error("NoEligibleHolders: no holder has a positive vested balance")]
    NoEligibleHolders,
    #[error("EmptyPool: growth pool must be positive")]
    EmptyPool,
}

/// Linear vesting with a cliff. Periods are counted from the grant period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VestingSchedule {
    pub id: String,
    pub cliff: u64,
    pub duration: u64,
}

impl VestingSchedule {
    pub fn new(id: impl Into<String>, cliff: u64, duration: u64) -> Result<Self, IncentiveError> {
        let s = VestingSchedule { id: id.into(), cliff, duration };
        s.validate()?;
        Ok(s)
    }

    pub fn sales_default() -> Self {
        VestingSchedule { id: "sales".into(), cliff: 0, duration: 4 }
    }

    pub fn design_default() -> Self {
        VestingSchedule { id: "design".into(), cliff: 4, duration: 12 }
    }

    pub fn validate(&self) -> Result<(), IncentiveError> {
        if self.id.is_empty() {
            return Err(IncentiveError::InvalidSchedule("empty schedule id".into()));
        }
        if self.cliff > self.duration {
            return Err(IncentiveError::InvalidSchedule(format!(
                "cliff {} exceeds duration {}",
                self.cliff, self.duration
            )));
        }
        Ok(())
    }

    /// Vested share after `elapsed` periods as an exact ratio `(num, den)`:
    /// zero before the cliff, then `(elapsed - cliff + 1) / (duration - cliff + 1)`
    /// capped at one.
    pub fn vested_ratio(&self, elapsed: u64) -> (u64, u64) {
        if elapsed < self.cliff {
            return (0, 1);
        }
        let den = self.duration - self.cliff + 1;
        let num = (elapsed - self.cliff + 1).min(den);
        (num, den)
    }

    pub fn vested_amount(&self, amount: Amount, elapsed: u64) -> Amount {
        let (num, den) = self.vested_ratio(elapsed);
        Amount::from_raw((amount.raw() as u128 * num as u128 / den as u128) as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trigger {
    Sale,
    Design,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PerformanceEvent {
    Sale { notional: Amount },
    Design { milestone: String },
}

impl PerformanceEvent {
    pub fn trigger(&self) -> Trigger {
        match self {
            PerformanceEvent::Sale { .. } => Trigger::Sale,
            PerformanceEvent::Design { .. } => Trigger::Design,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MintRule {
    /// Tokens per unit of sale notional.
    PerNotional { rate: Fraction },
    Fixed { amount: Amount },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerRule {
    pub token: TokenId,
    pub mint: MintRule,
    pub schedule: VestingSchedule,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncentiveRules {
    #[serde(default)]
    pub sale: Option<TriggerRule>,
    #[serde(default)]
    pub design: Option<TriggerRule>,
}

impl IncentiveRules {
    pub fn rule(&self, trigger: Trigger) -> Option<&TriggerRule> {
        match trigger {
            Trigger::Sale => self.sale.as_ref(),
            Trigger::Design => self.design.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncentiveGrant {
    pub grantee: AccountId,
    pub token: TokenId,
    pub amount: Amount,
    pub granted_at: u64,
    pub schedule: VestingSchedule,
    pub trigger: Trigger,
}

impl IncentiveGrant {
    pub fn vested(&self, period: u64) -> Amount {
        self.schedule.vested_amount(self.amount, period.saturating_sub(self.granted_at))
    }

    pub fn unvested(&self, period: u64) -> Amount {
        self.amount - self.vested(period)
    }

    /// Units that may still leave the grantee's account given what has
    /// already been transferred out of this grant.
    pub fn transferable(&self, period: u64, already_transferred: Amount) -> Amount {
        self.vested(period).saturating_sub(already_transferred)
    }
}

/// Turns a performance event into a grant according to `rules`.
pub fn record_performance(
    grantee: &AccountId,
    event: &PerformanceEvent,
    rules: &IncentiveRules,
    period: u64,
) -> Result<IncentiveGrant, IncentiveError> {
    let trigger = event.trigger();
    let rule = rules.rule(trigger).ok_or_else(|| {
        IncentiveError::UnknownTrigger(format!("{trigger:?}").to_lowercase())
    })?;
    rule.schedule.validate()?;
    let amount = match (&rule.mint, event) {
        (MintRule::PerNotional { rate }, PerformanceEvent::Sale { notional }) => {
            notional.mul_fraction_floor(*rate)
        }
        (MintRule::Fixed { amount }, _) => *amount,
        (MintRule::PerNotional { .. }, PerformanceEvent::Design { .. }) => {
            return Err(IncentiveError::UnknownTrigger(
                "design events carry no notional for a per-notional rule".into(),
            ))
        }
    };
    if amount.is_zero() {
        return Err(IncentiveError::ZeroGrant);
    }
    Ok(IncentiveGrant {
        grantee: grantee.clone(),
        token: rule.token.clone(),
        amount,
        granted_at: period,
        schedule: rule.schedule.clone(),
        trigger,
    })
}

/// Splits a growth pool pro rata by vested holdings. The integer remainder
/// goes to the largest holder (lowest account id on ties).
pub fn distribute_growth(
    pool: Amount,
    vested_holdings: &BTreeMap<AccountId, Amount>,
) -> Result<Vec<Payout>, IncentiveError> {
    if pool.is_zero() {
        return Err(IncentiveError::EmptyPool);
    }
    split_pro_rata(pool, vested_holdings).ok_or(IncentiveError::NoEligibleHolders)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules() -> IncentiveRules {
        IncentiveRules {
            sale: Some(TriggerRule {
                token: TokenId::new("SALES"),
                mint: MintRule::PerNotional { rate: "0.01".parse().unwrap() },
                schedule: VestingSchedule::sales_default(),
            }),
            design: Some(TriggerRule {
                token: TokenId::new("DESIGN"),
                mint: MintRule::Fixed { amount: Amount::from_units(500) },
                schedule: VestingSchedule::design_default(),
            }),
        }
    }

    #[test]
    fn sale_grant_uses_rate() {
        let g = record_performance(
            &AccountId::new("sam"),
            &PerformanceEvent::Sale { notional: Amount::from_units(10_000) },
            &rules(),
            0,
        )
        .unwrap();
        assert_eq!(g.amount, Amount::from_units(100));
        assert_eq!(g.token, TokenId::new("SALES"));
    }

    #[test]
    fn design_grant_locked_before_cliff() {
        let g = record_performance(
            &AccountId::new("dee"),
            &PerformanceEvent::Design { milestone: "v1".into() },
            &rules(),
            0,
        )
        .unwrap();
        assert_eq!(g.amount, Amount::from_units(500));
        for t in 0..4 {
            assert_eq!(g.transferable(t, Amount::ZERO), Amount::ZERO, "period {t}");
        }
        assert!(!g.transferable(4, Amount::ZERO).is_zero());
        assert_eq!(g.transferable(12, Amount::ZERO), g.amount);
    }

    #[test]
    fn sales_vesting_pointwise() {
        let g = IncentiveGrant {
            grantee: AccountId::new("s"),
            token: TokenId::new("SALES"),
            amount: Amount::from_units(100),
            granted_at: 0,
            schedule: VestingSchedule::sales_default(),
            trigger: Trigger::Sale,
        };
        let got: Vec<u64> = (0..=4).map(|t| g.vested(t).raw() / 1_000_000).collect();
        assert_eq!(got, vec![20, 40, 60, 80, 100]);
        assert_eq!(g.transferable(2, Amount::from_units(50)), Amount::from_units(10));
    }

    #[test]
    fn unknown_trigger() {
        let mut r = rules();
        r.design = None;
        let err = record_performance(
            &AccountId::new("d"),
            &PerformanceEvent::Design { milestone: "m".into() },
            &r,
            0,
        );
        assert!(matches!(err, Err(IncentiveError::UnknownTrigger(_))));
    }

    #[test]
    fn growth_pool_pro_rata() {
        let h: BTreeMap<_, _> = [("X", 300u64), ("Y", 100)]
            .iter()
            .map(|(a, v)| (AccountId::new(*a), Amount::from_raw(*v)))
            .collect();
        let out = distribute_growth(Amount::from_raw(1000), &h).unwrap();
        assert_eq!(out[0].amount.raw(), 750);
        assert_eq!(out[1].amount.raw(), 250);

        let single: BTreeMap<_, _> = [(AccountId::new("X"), Amount::from_raw(7))].into();
        let out = distribute_growth(Amount::from_raw(1000), &single).unwrap();
        assert_eq!(out[0].amount.raw(), 1000);

        assert_eq!(
            distribute_growth(Amount::from_raw(1000), &BTreeMap::new()),
            Err(IncentiveError::NoEligibleHolders)
        );
    }

    #[test]
    fn schedule_rejects_cliff_after_duration() {
        assert!(VestingSchedule::new("x", 5, 4).is_err());
    }
}

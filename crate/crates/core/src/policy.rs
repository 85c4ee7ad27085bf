//! Per-token monetary policy: scheduled inflation, bottom-flow
//! redistribution and spending-domain restrictions.
//!
//! Everything here is a pure computation over balances. The exchange turns
//! the results into ledger events.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::fixed::{div_round_half_even, Amount, Fraction, FRACTION_SCALE};
use crate::ids::{AccountId, TokenId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("InvalidDefinition: {0}")]
    InvalidDefinition(String),
    #[error("FewerThanTwoAccounts: redistribution needs at least two holders")]
    FewerThanTwoAccounts,
    #[error("UnknownCategory: `{0}` is not a known spending category")]
    UnknownCategory(String),
    #[error("AlreadyAppliedThisPeriod: inflation for {0} already applied in period {1}")]
    AlreadyAppliedThisPeriod(TokenId, u64),
}

/// What a token may be spent on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpendingDomains {
    Universal,
    Only(BTreeSet<String>),
}

impl SpendingDomains {
    pub fn only<I, S>(categories: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        SpendingDomains::Only(categories.into_iter().map(Into::into).collect())
    }

    pub fn permits(&self, category: &str) -> bool {
        match self {
            SpendingDomains::Universal => true,
            SpendingDomains::Only(set) => set.contains(category),
        }
    }
}

/// The set of spending categories the exchange recognizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryUniverse(BTreeSet<String>);

impl CategoryUniverse {
    pub fn new<I, S>(categories: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        CategoryUniverse(categories.into_iter().map(Into::into).collect())
    }

    pub fn contains(&self, category: &str) -> bool {
        self.0.contains(category)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl Default for CategoryUniverse {
    fn default() -> Self {
        CategoryUniverse::new(["food", "groceries", "general", "investment", "luxury"])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedistributionPolicy {
    /// Redistribution runs in every period that is a multiple of this.
    pub every_periods: u64,
    /// Share of holders (by count) that are levied.
    pub top: Fraction,
    /// Share of each levied balance that is taken.
    pub levy: Fraction,
    /// Share of holders (by count) that receive the proceeds.
    pub bottom: Fraction,
}

impl RedistributionPolicy {
    pub fn due(&self, period: u64) -> bool {
        period > 0 && period.is_multiple_of(self.every_periods)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InflationRecipient {
    /// New units go to the issuer's inventory.
    #[default]
    Sponsor,
    /// New units are split across holders in proportion to their balances.
    ProRata,
}

/// A token's identity plus its policy bundle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenDefinition {
    pub id: TokenId,
    /// Per-period growth of total supply.
    pub inflation_rate: Fraction,
    #[serde(default)]
    pub inflation_recipient: InflationRecipient,
    #[serde(default)]
    pub redistribution: Option<RedistributionPolicy>,
    pub spending_domains: SpendingDomains,
    /// Vesting schedule id for incentive tokens.
    #[serde(default)]
    pub vesting_class: Option<String>,
}

impl TokenDefinition {
    /// The quote currency: no inflation, spendable on anything.
    pub fn quote(id: impl Into<TokenId>) -> Self {
        TokenDefinition {
            id: id.into(),
            inflation_rate: Fraction::ZERO,
            inflation_recipient: InflationRecipient::Sponsor,
            redistribution: None,
            spending_domains: SpendingDomains::Universal,
            vesting_class: None,
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.id.as_str().is_empty() || self.id.as_str().starts_with('@') {
            return Err(PolicyError::InvalidDefinition(format!("bad token id `{}`", self.id)));
        }
        if let Some(r) = &self.redistribution {
            if r.every_periods == 0 {
                return Err(PolicyError::InvalidDefinition(
                    "redistribution period must be at least 1".into(),
                ));
            }
            for (name, f) in [("top", r.top), ("levy", r.levy), ("bottom", r.bottom)] {
                if !f.is_proper() {
                    return Err(PolicyError::InvalidDefinition(format!(
                        "redistribution {name} fraction must lie in (0,1), got {f}"
                    )));
                }
            }
        }
        if let SpendingDomains::Only(set) = &self.spending_domains {
            if set.is_empty() {
                return Err(PolicyError::InvalidDefinition(
                    "spending domains must not be empty".into(),
                ));
            }
        }
        Ok(())
    }
}

/// New units minted by one inflation period: `round(supply × rate)`, ties to even.
pub fn inflation_mint(supply: Amount, rate: Fraction) -> Amount {
    supply.mul_fraction_round(rate)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Payout {
    pub account: AccountId,
    pub amount: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub from: AccountId,
    pub to: AccountId,
    pub amount: Amount,
}

/// Splits `total` across `weights` pro rata, flooring each share. The
/// leftover goes to the largest weight, ties broken by the lowest account id.
/// Zero-weight accounts receive nothing. Returns `None` if all weights are zero.
pub fn split_pro_rata(total: Amount, weights: &BTreeMap<AccountId, Amount>) -> Option<Vec<Payout>> {
    let sum: u128 = weights.values().map(|a| a.raw() as u128).sum();
    if sum == 0 {
        return None;
    }
    let mut out: Vec<Payout> = weights
        .iter()
        .filter(|(_, w)| !w.is_zero())
        .map(|(a, w)| Payout {
            account: a.clone(),
            amount: Amount::from_raw((total.raw() as u128 * w.raw() as u128 / sum) as u64),
        })
        .collect();
    let given: Amount = out.iter().map(|p| p.amount).sum();
    let remainder = total - given;
    if !remainder.is_zero() {
        // BTreeMap iteration is ascending by id, so the first max wins ties.
        let (largest, _) = weights
            .iter()
            .fold(None::<(&AccountId, Amount)>, |best, (a, w)| match best {
                Some((_, bw)) if *w <= bw => best,
                _ => Some((a, *w)),
            })
            .expect("non-empty weights");
        let slot = out.iter_mut().find(|p| &p.account == largest).expect("largest is paid");
        slot.amount += remainder;
    }
    Some(out)
}

fn count_share(n: usize, f: Fraction) -> usize {
    div_round_half_even(n as u128 * f.raw() as u128, FRACTION_SCALE as u128) as usize
}

/// Levies the top holders and pays the bottom holders.
///
/// Holders are ordered ascending by (balance, account id). The top
/// `round(n × top)` holders (at least one, at most `n - 1`) each pay
/// `floor(balance × levy)`, capped so no payer drops below the smallest
/// starting balance. The bottom `round(n × bottom)` holders (at least one,
/// disjoint from the payers) split the proceeds equally; the integer
/// remainder goes to the single poorest holder.
pub fn redistribute(
    balances: &BTreeMap<AccountId, Amount>,
    policy: &RedistributionPolicy,
) -> Result<Vec<Transfer>, PolicyError> {
    let n = balances.len();
    if n < 2 {
        return Err(PolicyError::FewerThanTwoAccounts);
    }
    let mut ranked: Vec<(&AccountId, Amount)> = balances.iter().map(|(a, b)| (a, *b)).collect();
    ranked.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(b.0)));

    let k_top = count_share(n, policy.top).clamp(1, n - 1);
    let k_bottom = count_share(n, policy.bottom).clamp(1, n - k_top);
    let floor_balance = ranked[0].1;

    let mut payers: Vec<(AccountId, Amount)> = Vec::new();
    for (account, balance) in &ranked[n - k_top..] {
        let levy = balance.mul_fraction_floor(policy.levy).min(*balance - floor_balance);
        if !levy.is_zero() {
            payers.push(((*account).clone(), levy));
        }
    }
    let proceeds: Amount = payers.iter().map(|(_, a)| *a).sum();
    if proceeds.is_zero() {
        return Ok(Vec::new());
    }

    let share = proceeds.raw() / k_bottom as u64;
    let remainder = proceeds.raw() % k_bottom as u64;
    let mut receivers: Vec<(AccountId, Amount)> = ranked[..k_bottom]
        .iter()
        .enumerate()
        .map(|(i, (a, _))| {
            let extra = if i == 0 { remainder } else { 0 };
            ((*a).clone(), Amount::from_raw(share + extra))
        })
        .filter(|(_, amt)| !amt.is_zero())
        .collect();

    // Route payer amounts to receivers in order.
    let mut transfers = Vec::new();
    let mut ri = 0;
    for (from, mut owed) in payers {
        while !owed.is_zero() {
            let (to, due) = &mut receivers[ri];
            let q = owed.min(*due);
            transfers.push(Transfer { from: from.clone(), to: to.clone(), amount: q });
            owed -= q;
            *due -= q;
            if due.is_zero() {
                ri += 1;
            }
        }
    }
    Ok(transfers)
}

/// Applies a transfer set to a balance map. Panics if a balance would go
/// negative; callers only pass transfer sets produced from the same map.
pub fn apply_transfers(balances: &mut BTreeMap<AccountId, Amount>, transfers: &[Transfer]) {
    for t in transfers {
        *balances.get_mut(&t.from).expect("payer present") -= t.amount;
        *balances.entry(t.to.clone()).or_default() += t.amount;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpendDecision {
    Allowed,
    Denied,
}

pub fn check_spend(
    definition: &TokenDefinition,
    category: &str,
    universe: &CategoryUniverse,
) -> Result<SpendDecision, PolicyError> {
    if !universe.contains(category) {
        return Err(PolicyError::UnknownCategory(category.to_string()));
    }
    Ok(if definition.spending_domains.permits(category) {
        SpendDecision::Allowed
    } else {
        SpendDecision::Denied
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bal(pairs: &[(&str, u64)]) -> BTreeMap<AccountId, Amount> {
        pairs.iter().map(|(a, b)| (AccountId::new(*a), Amount::from_units(*b))).collect()
    }

    fn third_policy() -> RedistributionPolicy {
        RedistributionPolicy {
            every_periods: 1,
            top: "0.333333".parse().unwrap(),
            levy: "0.1".parse().unwrap(),
            bottom: "0.333333".parse().unwrap(),
        }
    }

    #[test]
    fn inflation_two_percent() {
        let minted = inflation_mint(Amount::from_units(1_000_000), "0.02".parse().unwrap());
        assert_eq!(minted, Amount::from_units(20_000));
        assert_eq!(inflation_mint(Amount::from_units(5), Fraction::ZERO), Amount::ZERO);
    }

    #[test]
    fn redistribution_hand_example() {
        let mut b = bal(&[("A", 1000), ("B", 100), ("C", 10)]);
        let t = redistribute(&b, &third_policy()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].from, AccountId::new("A"));
        assert_eq!(t[0].to, AccountId::new("C"));
        assert_eq!(t[0].amount, Amount::from_units(100));
        apply_transfers(&mut b, &t);
        assert_eq!(b, bal(&[("A", 900), ("B", 100), ("C", 110)]));
    }

    #[test]
    fn equal_balances_move_nothing() {
        let b = bal(&[("A", 50), ("B", 50), ("C", 50)]);
        assert!(redistribute(&b, &third_policy()).unwrap().is_empty());
    }

    #[test]
    fn single_account_is_noop_error() {
        assert_eq!(
            redistribute(&bal(&[("A", 5)]), &third_policy()),
            Err(PolicyError::FewerThanTwoAccounts)
        );
    }

    #[test]
    fn remainder_goes_to_poorest() {
        let policy = RedistributionPolicy {
            every_periods: 1,
            top: "0.25".parse().unwrap(),
            levy: "0.5".parse().unwrap(),
            bottom: "0.5".parse().unwrap(),
        };
        let mut b: BTreeMap<AccountId, Amount> = [("A", 0u64), ("B", 1), ("C", 2), ("D", 7)]
            .iter()
            .map(|(a, v)| (AccountId::new(*a), Amount::from_raw(*v)))
            .collect();
        let t = redistribute(&b, &policy).unwrap();
        apply_transfers(&mut b, &t);
        // D pays 3; A gets 2, B gets 1
        assert_eq!(b[&AccountId::new("D")].raw(), 4);
        assert_eq!(b[&AccountId::new("A")].raw(), 2);
        assert_eq!(b[&AccountId::new("B")].raw(), 2);
    }

    #[test]
    fn pro_rata_remainder_to_largest() {
        let w = bal(&[("X", 1), ("Y", 1), ("Z", 1)]);
        let out = split_pro_rata(Amount::from_raw(100), &w).unwrap();
        let amounts: Vec<u64> = out.iter().map(|p| p.amount.raw()).collect();
        assert_eq!(amounts, vec![34, 33, 33]);
        assert!(split_pro_rata(Amount::from_raw(1), &bal(&[("X", 0)])).is_none());
    }

    #[test]
    fn food_coupons() {
        let universe = CategoryUniverse::default();
        let mut coupon = TokenDefinition::quote("FOOD");
        coupon.spending_domains = SpendingDomains::only(["food", "groceries"]);
        assert_eq!(check_spend(&coupon, "food", &universe), Ok(SpendDecision::Allowed));
        assert_eq!(check_spend(&coupon, "groceries", &universe), Ok(SpendDecision::Allowed));
        assert_eq!(check_spend(&coupon, "luxury", &universe), Ok(SpendDecision::Denied));
        assert_eq!(check_spend(&coupon, "investment", &universe), Ok(SpendDecision::Denied));
        assert!(matches!(
            check_spend(&coupon, "yachts", &universe),
            Err(PolicyError::UnknownCategory(_))
        ));
        let cash = TokenDefinition::quote("Q");
        for c in universe.iter() {
            assert_eq!(check_spend(&cash, c, &universe), Ok(SpendDecision::Allowed));
        }
    }

    #[test]
    fn definition_validation() {
        let mut d = TokenDefinition::quote("T");
        d.spending_domains = SpendingDomains::Only(BTreeSet::new());
        assert!(d.validate().is_err());
        let mut d = TokenDefinition::quote("T");
        d.redistribution = Some(RedistributionPolicy { levy: Fraction::ONE, ..third_policy() });
        assert!(d.validate().is_err());
        assert!(TokenDefinition::quote("@x").validate().is_err());
    }
}

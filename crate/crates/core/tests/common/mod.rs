#![allow(dead_code)]

use ito_core::auction::Side;
use ito_core::exchange::{Command, Exchange, ExchangeConfig};
use ito_core::incentives::{IncentiveRules, MintRule, PerformanceEvent, TriggerRule, VestingSchedule};
use ito_core::policy::{InflationRecipient, RedistributionPolicy, SpendingDomains, TokenDefinition};
use ito_core::sponsor::CommandingPricePolicy;
use ito_core::{AccountId, Amount, Price, TokenId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const USERS: [&str; 5] = ["ann", "ben", "cat", "dan", "eve"];

pub fn acct(s: &str) -> AccountId {
    AccountId::new(s)
}

pub fn units(n: u64) -> Amount {
    Amount::from_units(n)
}

pub fn price(s: &str) -> Price {
    s.parse().unwrap()
}

pub fn config() -> ExchangeConfig {
    ExchangeConfig {
        categories: Default::default(),
        incentives: IncentiveRules {
            sale: Some(TriggerRule {
                token: "SALES".into(),
                mint: MintRule::PerNotional { rate: "0.01".parse().unwrap() },
                schedule: VestingSchedule::sales_default(),
            }),
            design: Some(TriggerRule {
                token: "DESIGN".into(),
                mint: MintRule::Fixed { amount: units(50) },
                schedule: VestingSchedule::design_default(),
            }),
        },
    }
}

pub fn token_def(id: &str, rate: &str, redistribution: bool) -> TokenDefinition {
    TokenDefinition {
        id: id.into(),
        inflation_rate: rate.parse().unwrap(),
        inflation_recipient: InflationRecipient::Sponsor,
        redistribution: redistribution.then(|| RedistributionPolicy {
            every_periods: 2,
            top: "0.2".parse().unwrap(),
            levy: "0.1".parse().unwrap(),
            bottom: "0.4".parse().unwrap(),
        }),
        spending_domains: SpendingDomains::only(["food", "groceries"]),
        vesting_class: None,
    }
}

/// Quote currency USD, sponsored token T, incentive tokens SALES and DESIGN,
/// and five funded users.
pub fn seeded_exchange(ex: &mut Exchange) {
    let run = |ex: &mut Exchange, c: Command| {
        ex.run(c).unwrap();
    };
    run(ex, Command::IssueQuote { token: "USD".into(), treasury: acct("treasury"), supply: units(1_000_000) });
    run(
        ex,
        Command::Transfer { from: acct("treasury"), to: acct("sponsor"), token: "USD".into(), amount: units(50_000), category: None },
    );
    run(
        ex,
        Command::IssueToken {
            definition: token_def("T", "0.02", true),
            sponsor: acct("sponsor"),
            supply: units(10_000),
            issue_price: price("1"),
            collateral: units(6_000),
            policy: CommandingPricePolicy::default(),
        },
    );
    for (id, sched) in [("SALES", VestingSchedule::sales_default()), ("DESIGN", VestingSchedule::design_default())] {
        let mut def = token_def(id, "0", false);
        def.spending_domains = SpendingDomains::Universal;
        def.vesting_class = Some(sched.id.clone());
        run(ex, Command::IssueIncentive { definition: def, sponsor: acct("sponsor"), schedule: sched });
    }
    for u in USERS {
        run(ex, Command::Transfer { from: acct("treasury"), to: acct(u), token: "USD".into(), amount: units(2_000), category: None });
        run(ex, Command::Transfer { from: acct("sponsor"), to: acct(u), token: "T".into(), amount: units(300), category: None });
    }
}

pub struct Workload {
    pub rng: ChaCha8Rng,
}

impl Workload {
    pub fn new(seed: u64) -> Self {
        Workload { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn user(&mut self) -> AccountId {
        acct(USERS[self.rng.random_range(0..USERS.len())])
    }

    /// A command that may or may not be valid against the current state.
    pub fn command(&mut self, ex: &Exchange) -> Command {
        let t: TokenId = "T".into();
        let reference = ex.state().market(&t).map(|m| m.reference).unwrap_or(price("1"));
        let near = |rng: &mut ChaCha8Rng, spread: i64| {
            let ticks = reference.raw() as i64 + rng.random_range(-spread..=spread) * reference.raw() as i64 / 100;
            Price::from_raw(ticks.max(1) as u64)
        };
        match self.rng.random_range(0..100) {
            0..=39 => Command::SubmitOrder {
                order_id: None,
                account: self.user(),
                token: t,
                side: if self.rng.random_bool(0.5) { Side::Buy } else { Side::Sell },
                quantity: Amount::from_raw(self.rng.random_range(1..=40) * 1_000_000 + self.rng.random_range(0..3) * 250_000),
                limit_price: near(&mut self.rng, 20),
            },
            40..=54 => Command::TriggerClear { token: t },
            55..=69 => {
                let token = if self.rng.random_bool(0.5) { "USD" } else { "T" };
                let category = match self.rng.random_range(0..4) {
                    0 => Some("food".to_string()),
                    1 => Some("luxury".to_string()),
                    _ => None,
                };
                Command::Transfer {
                    from: self.user(),
                    to: self.user(),
                    token: token.into(),
                    amount: Amount::from_raw(self.rng.random_range(1..=200_000_000)),
                    category,
                }
            }
            70..=79 => Command::SetCommandingPrice { token: t, price: near(&mut self.rng, 15) },
            80..=87 => Command::ApplyPolicyPeriod,
            88..=93 => Command::RecordPerformance {
                grantee: self.user(),
                event: if self.rng.random_bool(0.6) {
                    PerformanceEvent::Sale { notional: units(self.rng.random_range(100..5_000)) }
                } else {
                    PerformanceEvent::Design { milestone: "m".into() }
                },
            },
            _ => Command::InjectGrowthPool {
                token: if self.rng.random_bool(0.5) { "SALES".into() } else { "DESIGN".into() },
                payer: acct("sponsor"),
                pool: units(self.rng.random_range(1..100)),
            },
        }
    }
}

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

/// Setup commands: quote currency USD, sponsored token T, incentive tokens
/// SALES and DESIGN, and five funded users.
pub fn seeding_commands() -> Vec<Command> {
    let mut out = vec![
        Command::IssueQuote { token: "USD".into(), treasury: acct("treasury"), supply: units(1_000_000) },
        Command::Transfer { from: acct("treasury"), to: acct("sponsor"), token: "USD".into(), amount: units(50_000), category: None },
        Command::IssueToken {
            definition: token_def("T", "0.02", true),
            sponsor: acct("sponsor"),
            supply: units(10_000),
            issue_price: price("1"),
            collateral: units(6_000),
            policy: CommandingPricePolicy::default(),
        },
    ];
    for (id, sched) in [("SALES", VestingSchedule::sales_default()), ("DESIGN", VestingSchedule::design_default())] {
        let mut def = token_def(id, "0", false);
        def.spending_domains = SpendingDomains::Universal;
        def.vesting_class = Some(sched.id.clone());
        out.push(Command::IssueIncentive { definition: def, sponsor: acct("sponsor"), schedule: sched });
    }
    for u in USERS {
        out.push(Command::Transfer { from: acct("treasury"), to: acct(u), token: "USD".into(), amount: units(2_000), category: None });
        out.push(Command::Transfer { from: acct("sponsor"), to: acct(u), token: "T".into(), amount: units(300), category: None });
    }
    out
}

pub fn seeded_exchange(ex: &mut Exchange) {
    for c in seeding_commands() {
        ex.run(c).unwrap();
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

/// Where a simulated kill lands relative to the interrupted command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KillPoint {
    /// Between two commands.
    Idle,
    /// After the record bytes hit the file, before the head sidecar moved.
    BeforeCommit,
    /// As `BeforeCommit`, with a torn partial record appended.
    TornWrite,
}

/// Runs `seeded_exchange` plus `n` workload commands against a file ledger,
/// kills it at `kill` while applying command `n + 1`, reopens, and compares
/// head and balance sheet with an uninterrupted in-memory run of the prefix
/// that should have survived. Both then continue for a few commands.
pub fn crash_trial(dir: &std::path::Path, seed: u64, n: usize, kill: KillPoint) -> Result<(), String> {
    use ito_core::ledger::store::{sidecar_path, Durability};
    use std::io::Write;

    let path = dir.join(format!("trial-{seed}-{n}.ledger"));
    let mut reference = Exchange::in_memory(config());
    seeded_exchange(&mut reference);
    let mut disk = Exchange::open(&path, Durability::Flush, config()).map_err(|e| e.to_string())?;
    seeded_exchange(&mut disk);
    let mut w = Workload::new(seed);
    for i in 0..n {
        let c = w.command(&reference);
        let a = reference.execute(None, &c).map(|r| r.entries).map_err(|e| e.code());
        let b = disk.execute(None, &c).map(|r| r.entries).map_err(|e| e.code());
        if a != b {
            return Err(format!("command {i} diverged before the kill"));
        }
    }

    let interrupted = w.command(&reference);
    let sidecar = sidecar_path(&path);
    let committed_head = std::fs::read(&sidecar).map_err(|e| e.to_string())?;
    let applied = disk.execute(None, &interrupted).is_ok_and(|r| !r.entries.is_empty());
    drop(disk);
    match kill {
        KillPoint::Idle => {
            std::fs::write(&sidecar, &committed_head).map_err(|e| e.to_string())?;
            let size = committed_len(&path, &committed_head)?;
            let f = std::fs::OpenOptions::new().write(true).open(&path).map_err(|e| e.to_string())?;
            f.set_len(size).map_err(|e| e.to_string())?;
        }
        KillPoint::BeforeCommit | KillPoint::TornWrite => {
            std::fs::write(&sidecar, &committed_head).map_err(|e| e.to_string())?;
            if kill == KillPoint::TornWrite {
                let mut f = std::fs::OpenOptions::new().append(true).open(&path).map_err(|e| e.to_string())?;
                let torn: Vec<u8> = (0..w.rng.random_range(1..60)).map(|_| w.rng.random()).collect();
                f.write_all(&torn).map_err(|e| e.to_string())?;
            }
        }
    }

    let mut recovered = Exchange::open(&path, Durability::Flush, config()).map_err(|e| format!("reopen: {e}"))?;
    if recovered.ledger().head() != reference.ledger().head() {
        return Err(format!(
            "head {} != {} (interrupted command {} applied before kill: {applied})",
            recovered.ledger().head().to_hex(),
            reference.ledger().head().to_hex(),
            interrupted.kind()
        ));
    }
    if recovered.state().balances() != reference.state().balances() {
        return Err("balance sheet differs after recovery".into());
    }
    for _ in 0..20 {
        let c = w.command(&reference);
        let a = reference.execute(None, &c).map(|r| r.entries).map_err(|e| e.code());
        let b = recovered.execute(None, &c).map(|r| r.entries).map_err(|e| e.code());
        if a != b {
            return Err("recovered ledger diverged after restart".into());
        }
    }
    Ok(())
}

/// Byte length of the records covered by a head sidecar.
fn committed_len(path: &std::path::Path, sidecar: &[u8]) -> Result<u64, String> {
    let count: usize = std::str::from_utf8(sidecar)
        .ok()
        .and_then(|t| t.lines().next())
        .and_then(|l| l.strip_prefix("count "))
        .and_then(|c| c.trim().parse().ok())
        .ok_or("unreadable sidecar")?;
    let bytes = std::fs::read(path).map_err(|e| e.to_string())?;
    let mut off = 0usize;
    for _ in 0..count {
        let len = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
        off += 4 + len;
    }
    Ok(off as u64)
}

mod common;

use common::*;
use ito_core::exchange::{Command, Exchange, ExchangeError};
use ito_core::ledger::event::{Event, Party};
use ito_core::sponsor::{CommandingPricePolicy, SponsorError};
use ito_core::{AccountId, Amount, Fraction, Price, TokenId};
use proptest::prelude::*;

/// `collateral / (supply × price)` at six places, half-even, computed in i128.
fn rate_oracle(collateral: u64, supply: u64, price: u64) -> u64 {
    let num = collateral as i128 * 10_000 * 1_000_000;
    let den = supply as i128 * price as i128;
    let q = num / den;
    let r = num % den;
    if 2 * r > den || (2 * r == den && q % 2 == 1) {
        (q + 1) as u64
    } else {
        q as u64
    }
}

fn band_oracle(policy: &CommandingPricePolicy, reference: Price, c: Price) -> bool {
    let d = policy.band.raw() as i128;
    let lhs = reference.raw() as i128 * (1_000_000 - d);
    let rhs = reference.raw() as i128 * (1_000_000 + d);
    let c = c.raw() as i128 * 1_000_000;
    lhs <= c && c <= rhs
}

/// Shadow bookkeeping of one sponsored token, maintained only from events.
struct Shadow {
    collateral: i128,
    inventory: i128,
    supply: i128,
    issue_price: u64,
    reference: Price,
    last_move: Option<(Price, Price)>,
    stalled: u32,
    commanded: Option<Price>,
}

impl Shadow {
    fn observe(&mut self, token: &TokenId, sponsor: &AccountId, e: &Event) {
        match e {
            Event::TradeExecuted(t) if &t.token == token => {
                let notional = t.price.notional(t.quantity).raw() as i128;
                match (&t.buyer, &t.seller) {
                    (_, Party::Sponsor) => {
                        self.collateral += notional;
                        self.inventory -= t.quantity.raw() as i128;
                    }
                    (Party::Sponsor, _) => {
                        self.collateral -= notional;
                        self.inventory += t.quantity.raw() as i128;
                    }
                    _ => {}
                }
            }
            Event::Transfer(t) if &t.token == token => {
                if &t.from == sponsor {
                    self.inventory -= t.amount.raw() as i128;
                }
                if &t.to == sponsor {
                    self.inventory += t.amount.raw() as i128;
                }
            }
            Event::InflationApplied(i) if &i.token == token => {
                self.supply += i.minted.raw() as i128;
                for p in &i.recipients {
                    if &p.account == sponsor {
                        self.inventory += p.amount.raw() as i128;
                    }
                }
            }
            Event::RedistributionApplied(r) if &r.token == token => {
                for t in &r.transfers {
                    assert_ne!(&t.from, sponsor);
                    assert_ne!(&t.to, sponsor);
                }
            }
            Event::CommandingPriceSet(c) if &c.token == token => {
                assert_eq!(c.reference_price, self.reference);
                self.commanded = Some(c.price);
            }
            Event::RoundCleared(r) if &r.token == token => {
                let expected = self.commanded.or(r.clearing_price).unwrap_or(self.reference);
                assert_eq!(r.reference_price_next, expected, "next-round linkage");
                match r.clearing_price {
                    Some(p) => {
                        self.last_move = Some((self.reference, p));
                        self.stalled = 0;
                    }
                    None => self.stalled += 1,
                }
                self.reference = r.reference_price_next;
                self.commanded = None;
            }
            _ => {}
        }
    }

    fn trigger_holds(&self, policy: &CommandingPricePolicy) -> bool {
        let rate = rate_oracle(self.collateral as u64, self.supply as u64, self.issue_price);
        let low = policy.min_reserve_rate.is_some_and(|m| rate < m.raw());
        let moved = match (policy.max_round_move, self.last_move) {
            (Some(m), Some((r, p))) => (p.raw().abs_diff(r.raw()) as i128) * 1_000_000 > r.raw() as i128 * m.raw() as i128,
            _ => false,
        };
        let stalled = policy.stalled_rounds.is_some_and(|n| self.stalled >= n);
        low || moved || stalled
    }
}

fn run_sequence(seed: u64, steps: usize) {
    let mut ex = Exchange::in_memory(config());
    seeded_exchange(&mut ex);
    let t: TokenId = "T".into();
    let sponsor = acct("sponsor");
    let policy = *ex.state().token(&t).unwrap().policy().unwrap();
    let pos = ex.state().reserve_position(&t).unwrap();
    let mut shadow = Shadow {
        collateral: pos.collateral.raw() as i128,
        inventory: pos.inventory.raw() as i128,
        supply: pos.issued_supply.raw() as i128,
        issue_price: pos.issue_price.raw(),
        reference: ex.state().market(&t).unwrap().reference,
        last_move: None,
        stalled: 0,
        commanded: None,
    };
    let mut w = Workload::new(seed);
    for _ in 0..steps {
        let cmd = w.command(&ex);
        let proposal = match &cmd {
            Command::SetCommandingPrice { price, .. } => Some(*price),
            _ => None,
        };
        let triggered = shadow.trigger_holds(&policy);
        let already = shadow.commanded.is_some();
        let reference = shadow.reference;
        let result = ex.execute(None, &cmd);
        if let Some(c) = proposal {
            match &result {
                Ok(_) => {
                    assert!(!already && triggered, "accepted without a trigger");
                    assert!(band_oracle(&policy, reference, c), "accepted {c} outside band of {reference}");
                }
                Err(ExchangeError::Sponsor(SponsorError::AlreadyCommandedThisRound(_))) => assert!(already),
                Err(ExchangeError::Sponsor(SponsorError::ConditionNotMet)) => assert!(!already && !triggered),
                Err(ExchangeError::Sponsor(SponsorError::OutOfBand { .. })) => {
                    assert!(!already && triggered && !band_oracle(&policy, reference, c))
                }
                Err(e) => panic!("unexpected {e}"),
            }
        }
        if let Ok(receipt) = &result {
            for e in &receipt.entries {
                shadow.observe(&t, &sponsor, &e.event);
            }
        }
        assert!(shadow.collateral >= 0 && shadow.inventory >= 0);
        let pos = ex.state().reserve_position(&t).unwrap();
        assert_eq!(pos.collateral.raw() as i128, shadow.collateral);
        assert_eq!(pos.inventory.raw() as i128, shadow.inventory);
        assert_eq!(pos.issued_supply.raw() as i128, shadow.supply);
        assert_eq!(pos.reserve_rate().unwrap().raw(), rate_oracle(pos.collateral.raw(), pos.issued_supply.raw(), pos.issue_price.raw()));
        assert_eq!(ex.state().market(&t).unwrap().reference, shadow.reference);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reserve_and_command_invariants_hold(seed in any::<u64>()) {
        run_sequence(seed, 150);
    }
}

#[test]
fn issuance_examples() {
    let mut ex = Exchange::in_memory(config());
    ex.run(Command::IssueQuote { token: "USD".into(), treasury: acct("sponsor"), supply: units(10_000_000) }).unwrap();
    for (id, supply, p, collateral, expect) in [
        ("A", 1_000_000, "0.1", 80_000, "0.800000"),
        ("B", 100, "1", 100, "1.000000"),
        ("C", 100, "1", 150, "1.500000"),
    ] {
        let out = ex
            .run(Command::IssueToken {
                definition: token_def(id, "0.01", false),
                sponsor: acct("sponsor"),
                supply: units(supply),
                issue_price: price(p),
                collateral: units(collateral),
                policy: CommandingPricePolicy::default(),
            })
            .unwrap();
        let ito_core::Outcome::Issued { reserve_rate: Some(r), .. } = out else { panic!() };
        assert_eq!(r.to_string(), expect);
    }
    let dup = ex.run(Command::IssueToken {
        definition: token_def("A", "0.01", false),
        sponsor: acct("sponsor"),
        supply: units(1),
        issue_price: price("1"),
        collateral: units(1),
        policy: CommandingPricePolicy::default(),
    });
    assert_eq!(dup.unwrap_err().code(), "DuplicateToken");
    let zero = ex.run(Command::IssueToken {
        definition: token_def("Z", "0.01", false),
        sponsor: acct("sponsor"),
        supply: units(0),
        issue_price: price("1"),
        collateral: units(1),
        policy: CommandingPricePolicy::default(),
    });
    assert_eq!(zero.unwrap_err().code(), "NonPositiveParameter");
    assert_eq!(ito_core::sponsor::reserve_rate(Amount::ZERO, units(5), price("1")).unwrap(), Fraction::ZERO);
}

#[test]
fn commanding_price_band_examples() {
    let mut ex = Exchange::in_memory(config());
    ex.run(Command::IssueQuote { token: "USD".into(), treasury: acct("sponsor"), supply: units(10_000_000) }).unwrap();
    ex.run(Command::IssueToken {
        definition: token_def("T", "0.01", false),
        sponsor: acct("sponsor"),
        supply: units(1000),
        issue_price: price("100"),
        collateral: units(40_000),
        policy: CommandingPricePolicy::default(),
    })
    .unwrap();
    let t: TokenId = "T".into();
    let cmd = |p: &str| Command::SetCommandingPrice { token: t.clone(), price: price(p) };
    assert_eq!(ex.run(cmd("120")).unwrap_err().code(), "OutOfBand");
    ex.run(cmd("105")).unwrap();
    assert_eq!(ex.run(cmd("100")).unwrap_err().code(), "AlreadyCommandedThisRound");
    ex.run(Command::TriggerClear { token: t.clone() }).unwrap();
    assert_eq!(ex.state().market(&t).unwrap().reference, price("105"));
    ex.run(cmd("105")).unwrap();
    ex.run(Command::TriggerClear { token: t.clone() }).unwrap();
    assert_eq!(ex.state().market(&t).unwrap().reference, price("105"));
}

#[test]
fn many_sequences() {
    for seed in 0..40 {
        run_sequence(seed, 120);
    }
}

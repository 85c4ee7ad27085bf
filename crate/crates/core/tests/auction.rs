use ito_core::auction::{candidate_schedule, clear_round, AuctionError, ClearingResult, Order, Side};
use ito_core::{AccountId, Amount, OrderId, Price, TokenId};
use proptest::prelude::*;

fn order(id: usize, side: Side, qty: u64, ticks: u64) -> Order {
    Order {
        order_id: OrderId::new(format!("o{id}")),
        account: AccountId::new(format!("a{id}")),
        token: TokenId::new("T"),
        side,
        quantity: Amount::from_units(qty),
        limit_price: Price::from_raw(ticks),
        round: 0,
        arrival: id as u64,
    }
}

fn p(s: &str) -> Price {
    s.parse().unwrap()
}

/// Literal exhaustive search: evaluate every candidate, then filter by each
/// tie-break in turn.
fn oracle_price(orders: &[Order], reference: Price) -> Option<(Price, u64)> {
    let mut cands: Vec<u64> = orders.iter().map(|o| o.limit_price.raw()).collect();
    cands.push(reference.raw());
    cands.sort();
    cands.dedup();
    let rows: Vec<(u64, u64, u64)> = cands
        .iter()
        .map(|&c| {
            let b: u64 = orders.iter().filter(|o| o.side == Side::Buy && o.limit_price.raw() >= c).map(|o| o.quantity.raw()).sum();
            let s: u64 = orders.iter().filter(|o| o.side == Side::Sell && o.limit_price.raw() <= c).map(|o| o.quantity.raw()).sum();
            (c, b.min(s), b.abs_diff(s))
        })
        .collect();
    let vmax = rows.iter().map(|r| r.1).max().unwrap();
    let step1: Vec<_> = rows.iter().filter(|r| r.1 == vmax).collect();
    let imin = step1.iter().map(|r| r.2).min().unwrap();
    let step2: Vec<_> = step1.into_iter().filter(|r| r.2 == imin).collect();
    let dmin = step2.iter().map(|r| r.0.abs_diff(reference.raw())).min().unwrap();
    let step3: Vec<_> = step2.into_iter().filter(|r| r.0.abs_diff(reference.raw()) == dmin).collect();
    let chosen = step3.iter().map(|r| r.0).min().unwrap();
    (vmax > 0).then_some((Price::from_raw(chosen), vmax))
}

/// Expected fill of each order: the constrained side fills completely;
/// the heavy side fills in (price, arrival) priority.
fn oracle_fills(orders: &[Order], price: Price, volume: u64) -> Vec<(String, u64)> {
    let mut out = Vec::new();
    for side in [Side::Buy, Side::Sell] {
        let mut q: Vec<&Order> = orders
            .iter()
            .filter(|o| o.side == side && if side == Side::Buy { o.limit_price >= price } else { o.limit_price <= price })
            .collect();
        q.sort_by_key(|o| (if side == Side::Buy { u64::MAX - o.limit_price.raw() } else { o.limit_price.raw() }, o.arrival));
        let mut left = volume;
        for o in q {
            let take = o.quantity.raw().min(left);
            left -= take;
            if take > 0 {
                out.push((o.order_id.as_str().to_string(), take));
            }
        }
    }
    out.sort();
    out
}

fn check_invariants(orders: &[Order], r: &ClearingResult) {
    let buys: u64 = r.fills.iter().filter(|f| f.side == Side::Buy).map(|f| f.quantity.raw()).sum();
    let sells: u64 = r.fills.iter().filter(|f| f.side == Side::Sell).map(|f| f.quantity.raw()).sum();
    assert_eq!(buys, r.matched_volume.raw());
    assert_eq!(sells, r.matched_volume.raw());
    for f in &r.fills {
        let o = orders.iter().find(|o| o.order_id == f.order_id).unwrap();
        assert!(f.quantity <= o.quantity);
    }
    let paired: u64 = r.pairings.iter().map(|x| x.quantity.raw()).sum();
    assert_eq!(paired, r.matched_volume.raw());
    if r.matched_volume.is_zero() {
        assert_eq!(r.clearing_price, None);
        assert_eq!(r.reference_price_next, r.reference_price);
    }
}

fn book() -> impl Strategy<Value = (Vec<Order>, Price)> {
    (
        prop::collection::vec((any::<bool>(), 1u64..=50, 1u64..=20), 0..=8),
        1u64..=20,
    )
        .prop_map(|(raw, r)| {
            let orders = raw
                .into_iter()
                .enumerate()
                .map(|(i, (buy, q, k))| order(i, if buy { Side::Buy } else { Side::Sell }, q, k * 5_000))
                .collect();
            (orders, Price::from_raw(r * 5_000))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn matches_exhaustive_oracle((orders, reference) in book()) {
        let r = clear_round(&orders, reference).unwrap();
        let expected = oracle_price(&orders, reference);
        prop_assert_eq!(r.clearing_price, expected.map(|e| e.0));
        prop_assert_eq!(r.matched_volume.raw(), expected.map_or(0, |e| e.1));
        if let Some((price, vol)) = expected {
            let mut got: Vec<(String, u64)> = r.fills.iter().map(|f| (f.order_id.as_str().to_string(), f.quantity.raw())).collect();
            got.sort();
            prop_assert_eq!(got, oracle_fills(&orders, price, vol));
        }
        check_invariants(&orders, &r);
    }

    #[test]
    fn removing_an_order_never_adds_volume((orders, reference) in book(), pick in any::<prop::sample::Index>()) {
        prop_assume!(!orders.is_empty());
        let full = clear_round(&orders, reference).unwrap();
        let mut fewer = orders.clone();
        fewer.remove(pick.index(orders.len()));
        let part = clear_round(&fewer, reference).unwrap();
        prop_assert!(part.matched_volume <= full.matched_volume);
    }

    #[test]
    fn chosen_price_maximizes_volume((orders, reference) in book()) {
        let r = clear_round(&orders, reference).unwrap();
        let rows = candidate_schedule(&orders, reference).unwrap();
        let best = rows.iter().map(|row| row.matched_volume).max().unwrap();
        prop_assert_eq!(r.matched_volume, best);
        if let Some(price) = r.clearing_price {
            prop_assert!(rows.iter().any(|row| row.price == price));
        }
    }

    #[test]
    fn residuals_are_marketable_remainders((orders, reference) in book()) {
        let r = clear_round(&orders, reference).unwrap();
        let settle = r.settlement_price();
        for res in &r.residual_buys {
            prop_assert!(res.limit_price >= settle);
        }
        for res in &r.residual_sells {
            prop_assert!(res.limit_price <= settle);
        }
        for o in &orders {
            let marketable = match o.side {
                Side::Buy => o.limit_price >= settle,
                Side::Sell => o.limit_price <= settle,
            };
            let filled = r.filled(&o.order_id);
            let residual: Amount = r.residual_buys.iter().chain(&r.residual_sells)
                .filter(|x| x.order_id == o.order_id).map(|x| x.quantity).sum();
            if marketable {
                prop_assert_eq!(filled + residual, o.quantity);
            } else {
                prop_assert!(filled.is_zero() && residual.is_zero());
            }
        }
    }
}

#[test]
fn worked_book() {
    let orders = vec![
        order(0, Side::Buy, 10, 90_000),
        order(1, Side::Buy, 20, 80_000),
        order(2, Side::Sell, 15, 70_000),
        order(3, Side::Sell, 10, 85_000),
    ];
    let rows = candidate_schedule(&orders, p("8")).unwrap();
    let v: Vec<u64> = rows.iter().map(|r| r.matched_volume.raw() / 1_000_000).collect();
    assert_eq!(v, vec![15, 15, 10, 10]);
    let prices: Vec<String> = rows.iter().map(|r| r.price.to_string()).collect();
    assert_eq!(prices, vec!["7.0000", "8.0000", "8.5000", "9.0000"]);
    let r = clear_round(&orders, p("8")).unwrap();
    assert_eq!(r.clearing_price, Some(p("8")));
    assert_eq!(r.matched_volume, Amount::from_units(15));
    assert_eq!(r.filled(&OrderId::new("o2")), Amount::from_units(15));
    assert_eq!(r.filled(&OrderId::new("o0")), Amount::from_units(10));
    assert_eq!(r.filled(&OrderId::new("o1")), Amount::from_units(5));
    assert_eq!(r.reference_price_next, p("8"));
}

#[test]
fn empty_and_degenerate_books() {
    let r = clear_round(&[], p("10")).unwrap();
    assert_eq!(r.clearing_price, None);
    assert_eq!(r.reference_price_next, p("10"));
    assert!(r.fills.is_empty());

    let rows = candidate_schedule(&[], p("7")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].price, p("7"));
    assert!(rows[0].buy_volume.is_zero() && rows[0].sell_volume.is_zero());

    let rows = candidate_schedule(&[order(0, Side::Buy, 5, 30_000)], p("3")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].buy_volume, Amount::from_units(5));
    assert!(rows[0].matched_volume.is_zero());

    let exact = clear_round(&[order(0, Side::Buy, 10, 50_000), order(1, Side::Sell, 10, 50_000)], p("5")).unwrap();
    assert_eq!(exact.clearing_price, Some(p("5")));
    assert_eq!(exact.matched_volume, Amount::from_units(10));

    let none = clear_round(&[order(0, Side::Buy, 10, 90_000), order(1, Side::Sell, 10, 100_000)], p("9.5")).unwrap();
    assert_eq!(none.clearing_price, None);
    assert!(none.matched_volume.is_zero());
}

#[test]
fn mixed_tokens_rejected() {
    let mut b = order(1, Side::Sell, 1, 10_000);
    b.token = TokenId::new("U");
    let err = clear_round(&[order(0, Side::Buy, 1, 10_000), b], p("1")).unwrap_err();
    assert_eq!(err, AuctionError::MixedTokens);
}

//! Credit-fuelled bubble: budgets grow at the asset rate `r` while the
//! fundamental grows at `g`.
//!
//! Round `t` has fundamental `v_t = v₀(1+g)^t` and per-agent budget
//! `B_t = budget·v₀(1+r)^t`. While credit flows, a bid is capped at `B_t`
//! per unit and any cash shortfall is lent by the treasury. Opinions
//! extrapolate the expected return:
//!
//! `o ← (1 - κ - φ)·o + κ·p·(1 + r_e) + φ·v_{t+1}`
//!
//! with `r_e = r` while credit flows. Once total debt exceeds
//! `max_leverage × Σ holdings × v_t` the lender freezes credit for good,
//! calls what cash can repay, expectations fall back to `g`, and indebted
//! agents dump at a discount to the last price.
//!
//! With `r = g` every bid stays at or below `budget × v_t`, so the price
//! never exceeds `budget` times the fundamental.

use ito_core::auction::Side;
use ito_core::Amount;
use serde::Serialize;

use crate::agents::draw_population;
use crate::config::ScenarioConfig;
use crate::harness::Market;
use crate::market::submit_quotes;
use crate::metrics::{coefficient_of_variation, gini, RoundMetrics};
use crate::{scenario_rng, SimError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BubbleReport {
    pub series: Vec<RoundMetrics>,
    /// First round whose price reached `threshold × fundamental`.
    pub fired_at: Option<u64>,
    /// Largest peak-to-trough fall of the settlement price from `fired_at`
    /// on, as a fraction of the peak.
    pub max_drawdown: f64,
    pub frozen_at: Option<u64>,
}

impl BubbleReport {
    fn from_series(series: Vec<RoundMetrics>, threshold: f64, frozen_at: Option<u64>) -> Self {
        let fired = series.iter().position(|r| r.ratio >= threshold);
        let mut max_drawdown: f64 = 0.0;
        if let Some(start) = fired {
            let mut peak = f64::MIN;
            for r in &series[start..] {
                peak = peak.max(r.settlement_price);
                max_drawdown = max_drawdown.max((peak - r.settlement_price) / peak);
            }
        }
        BubbleReport { fired_at: fired.map(|i| series[i].round), max_drawdown, frozen_at, series }
    }
}

pub fn run_bubble_scenario(cfg: &ScenarioConfig) -> Result<BubbleReport, SimError> {
    cfg.validate()?;
    let b = &cfg.bubble;
    if cfg.agents.count == 0 {
        return Ok(BubbleReport::from_series(Vec::new(), b.threshold, None));
    }
    let mut rng = scenario_rng(cfg.seed);
    let mut agents = draw_population(&cfg.agents, cfg.fundamental, &mut rng);
    let mut market = Market::setup(cfg, &agents)?;
    let size = Amount::from_f64(cfg.agents.order_size).unwrap_or(Amount::ZERO);
    let size_f = size.to_f64();
    let (kappa, phi) = (cfg.learning.price_weight, cfg.learning.anchor_weight);
    let (r, g, v0) = (cfg.asset_growth, cfg.gdp_growth, cfg.fundamental);
    let treasury = market.treasury.clone();
    let quote = market.quote.clone();

    let mut debt = vec![0.0f64; agents.len()];
    let mut frozen_at = None;
    let mut last_price = market.reference();
    let mut rows = Vec::with_capacity(cfg.rounds as usize);

    for round in 0..cfg.rounds {
        let v = v0 * (1.0 + g).powi(round as i32);
        let budget = b.budget * v0 * (1.0 + r).powi(round as i32);
        if frozen_at.is_none() {
            let held: f64 = agents.iter().map(|a| market.holdings(&a.account).to_f64()).sum();
            if debt.iter().sum::<f64>() > b.max_leverage * held * v {
                frozen_at = Some(round);
            }
        }
        let frozen = frozen_at.is_some();
        if frozen {
            repay(&mut market, &agents, &mut debt)?;
        }

        let reference = market.reference();
        let dump = last_price * (1.0 - b.fire_sale_discount);
        let quotes = submit_quotes(&mut market, &agents, &mut rng, size, cfg.agents.quote_noise, |m, i, side, q| {
            if frozen && debt[i] > 0.0 {
                return Ok(Some((Side::Sell, dump)));
            }
            if side == Side::Sell {
                return Ok(Some((side, q)));
            }
            let account = &agents[i].account;
            let cash = m.cash(account).to_f64();
            if frozen {
                // Without credit a bid is whatever cash affords.
                return Ok(Some((side, q.min(cash / size_f - 1e-4))));
            }
            let limit = q.min(budget / size_f);
            let need = limit * size_f + 1e-4;
            if cash < need {
                let loan = Amount::from_f64(need - cash).unwrap_or(Amount::ZERO);
                m.transfer(&treasury, account, &quote, loan)?;
                debt[i] += loan.to_f64();
            }
            Ok(Some((side, limit)))
        })?;
        let c = market.clear()?;
        last_price = c.settlement;
        let expect = if frozen { g } else { r };
        let v_next = v * (1.0 + g);
        for a in agents.iter_mut() {
            a.opinion = (1.0 - kappa - phi) * a.opinion + kappa * c.settlement * (1.0 + expect) + phi * v_next;
        }
        if frozen {
            repay(&mut market, &agents, &mut debt)?;
        }
        rows.push(RoundMetrics {
            round,
            fundamental: v,
            reference,
            clearing_price: c.clearing,
            settlement_price: c.settlement,
            volume: c.volume,
            reserve_rate: market.reserve_rate(),
            gini: gini(&market.wealth(&agents, c.settlement)),
            dispersion: coefficient_of_variation(&quotes),
            ratio: c.settlement / v,
            debt: debt.iter().sum(),
            credit_frozen: frozen,
        });
    }
    Ok(BubbleReport::from_series(rows, b.threshold, frozen_at))
}

/// Each indebted agent pays back what its free cash allows.
fn repay(market: &mut Market, agents: &[crate::agents::Agent], debt: &mut [f64]) -> Result<(), SimError> {
    let treasury = market.treasury.clone();
    let quote = market.quote.clone();
    for (a, d) in agents.iter().zip(debt.iter_mut()) {
        if *d <= 0.0 {
            continue;
        }
        let owed = Amount::from_f64(*d).unwrap_or(Amount::ZERO);
        let pay = owed.min(market.cash(&a.account));
        market.transfer(&a.account, &treasury, &quote, pay)?;
        *d = if pay == owed { 0.0 } else { *d - pay.to_f64() };
    }
    Ok(())
}

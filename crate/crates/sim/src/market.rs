//! Consensus market: a fixed fundamental, agents quoting their α-inflated
//! valuations, and valuations that learn from each round's price.
//!
//! Each round the agents are shuffled; the first half bid and the rest ask
//! one `order_size` each at `opinion × α × (1 + η)`. After clearing, every
//! opinion moves toward the settlement price `p` and the fundamental `v`:
//!
//! `o ← (1 - κ - φ)·o + κ·p + φ·v`
//!
//! With the price anchored to opinions, the spread of opinions contracts by
//! `1 - κ - φ` per round while the level settles where `κ·ᾱ` pulls up as
//! hard as `φ` pulls back to `v`.

use ito_core::auction::Side;
use ito_core::Amount;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::agents::{draw_population, symmetric, Agent};
use crate::config::ScenarioConfig;
use crate::harness::Market;
use crate::metrics::{coefficient_of_variation, gini, RoundMetrics};
use crate::{scenario_rng, SimError};

/// One round of quotes from a shuffled population. Returns the submitted
/// limit prices.
pub(crate) fn submit_quotes<R: Rng>(
    market: &mut Market,
    agents: &[Agent],
    rng: &mut R,
    size: Amount,
    noise: f64,
    mut shape: impl FnMut(&mut Market, usize, Side, f64) -> Result<Option<(Side, f64)>, SimError>,
) -> Result<Vec<f64>, SimError> {
    let mut order: Vec<usize> = (0..agents.len()).collect();
    order.shuffle(rng);
    let buyers = agents.len() / 2;
    let mut quotes = Vec::with_capacity(agents.len());
    for (slot, &i) in order.iter().enumerate() {
        let side = if slot < buyers { Side::Buy } else { Side::Sell };
        let q = agents[i].quote(symmetric(rng, noise));
        if let Some((side, limit)) = shape(market, i, side, q)? {
            if let Some(p) = market.submit(&agents[i].account, side, size, limit)? {
                quotes.push(p.to_f64());
            }
        }
    }
    Ok(quotes)
}

pub fn run_market_scenario(cfg: &ScenarioConfig) -> Result<Vec<RoundMetrics>, SimError> {
    cfg.validate()?;
    if cfg.agents.count == 0 {
        return Ok(Vec::new());
    }
    let mut rng = scenario_rng(cfg.seed);
    let mut agents = draw_population(&cfg.agents, cfg.fundamental, &mut rng);
    let mut market = Market::setup(cfg, &agents)?;
    let size = Amount::from_f64(cfg.agents.order_size).unwrap_or(Amount::ZERO);
    let v = cfg.fundamental;
    let (kappa, phi) = (cfg.learning.price_weight, cfg.learning.anchor_weight);
    let mut rows = Vec::with_capacity(cfg.rounds as usize);

    for round in 0..cfg.rounds {
        if cfg.sponsor.command_toward_fundamental {
            market.command_toward(v)?;
        }
        let reference = market.reference();
        let quotes = submit_quotes(&mut market, &agents, &mut rng, size, cfg.agents.quote_noise, |_, _, side, q| {
            Ok(Some((side, q)))
        })?;
        let c = market.clear()?;
        for a in agents.iter_mut() {
            a.opinion = (1.0 - kappa - phi) * a.opinion + kappa * c.settlement + phi * v;
        }
        if cfg.sponsor.policy_every > 0 && (round + 1) % cfg.sponsor.policy_every == 0 {
            market.apply_policy_period()?;
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
            debt: 0.0,
            credit_frozen: false,
        });
    }
    Ok(rows)
}

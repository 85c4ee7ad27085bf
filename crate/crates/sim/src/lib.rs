//! Agent-based scenarios over the public `ito-core` interfaces, plus the
//! compound-growth arithmetic behind the rule of 72.
//!
//! Every scenario draws from a single `ChaCha8Rng` seeded with
//! `ChaCha8Rng::seed_from_u64(seed)`, so a (config, seed) pair reproduces
//! its metric series bit for bit on any platform.

pub mod agents;
pub mod bubble;
pub mod config;
pub mod growth;
mod harness;
pub mod market;
pub mod metrics;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use bubble::{run_bubble_scenario, BubbleReport};
pub use config::{ScenarioConfig, ScenarioKind};
pub use growth::{doubling_report, growth_gap, rule_of_72, GrowthGap};
pub use market::run_market_scenario;
pub use metrics::RoundMetrics;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("NonPositiveRate: rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("ConfigInvalid: {0}")]
    ConfigInvalid(String),
    /// The exchange refused a command the harness believed valid.
    #[error("ExchangeRejected: {0}")]
    Exchange(#[from] ito_core::ExchangeError),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
    #[error("Csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Runs whichever scenario `cfg` selects and writes its CSV to `out`.
///
/// Market and bubble scenarios emit one [`RoundMetrics`] row per round.
/// The growth-gap scenario emits a single row with the columns
/// `r_percent, g_percent, horizon, asset_multiple_rounded, gdp_multiple_rounded,
/// gap_rounded, asset_multiple_exact, gdp_multiple_exact, gap_exact`.
pub fn run_scenario_csv<W: std::io::Write>(cfg: &ScenarioConfig, out: W) -> Result<(), SimError> {
    cfg.validate()?;
    match cfg.kind {
        ScenarioKind::Market => metrics::write_csv(&run_market_scenario(cfg)?, out),
        ScenarioKind::Bubble => metrics::write_csv(&run_bubble_scenario(cfg)?.series, out),
        ScenarioKind::GrowthGap => {
            let gap = growth_gap(cfg.asset_growth * 100.0, cfg.gdp_growth * 100.0, cfg.horizon)?;
            growth::write_csv(&gap, out)
        }
    }
}

/// The scenario generator: ChaCha with 8 rounds, seeded through
/// `seed_from_u64`.
pub fn scenario_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

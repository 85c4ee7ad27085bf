//! Declarative scenario files.
//!
//! A scenario is a TOML document. Every key is optional; omitted keys take
//! the defaults shown here.
//!
//! ```toml
//! kind = "market"            # market | bubble | growth_gap
//! seed = 1
//! rounds = 100
//! fundamental = 10.0         # fundamental value v in quote units
//! asset_growth = 0.10        # r, per period (bubble credit, growth_gap)
//! gdp_growth = 0.03          # g, per period (bubble fundamental, growth_gap)
//! horizon = 100              # periods (growth_gap)
//!
//! [agents]
//! count = 50
//! overconfident_fraction = 0.89   # presets: 0.89, 0.90, 0.86, 0.80
//! alpha_spread = 0.2              # overconfident α ~ U(1, 1 + spread)
//! valuation_spread = 0.2          # initial valuation v × (1 + U(-s, s))
//! quote_noise = 0.02              # per-quote factor 1 + U(-n, n)
//! order_size = 1.0
//! initial_tokens = 100.0
//! initial_cash = 2000.0
//!
//! [learning]
//! price_weight = 0.3         # κ, pull toward the last settlement price
//! anchor_weight = 0.1        # φ, pull toward the fundamental
//!
//! [sponsor]
//! reserve_rate = 0.8         # initial collateral / (supply × issue price)
//! inventory = 500.0          # units the sponsor keeps for backstop sales
//! inflation_rate = 0.01      # per policy period
//! policy_every = 0           # apply a policy period every n rounds; 0 = never
//! command_toward_fundamental = false
//!
//! [bubble]
//! threshold = 2.0            # bubble fires when price / fundamental reaches this
//! budget = 1.5               # round-0 per-round budget, in units of v
//! max_leverage = 0.75        # credit freezes when debt > this × holdings × v
//! fire_sale_discount = 0.2
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    #[default]
    Market,
    Bubble,
    GrowthGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentsConfig {
    pub count: usize,
    pub overconfident_fraction: f64,
    pub alpha_spread: f64,
    pub valuation_spread: f64,
    pub quote_noise: f64,
    pub order_size: f64,
    pub initial_tokens: f64,
    pub initial_cash: f64,
}

impl Default for AgentsConfig {
    fn default() -> Self {
        AgentsConfig {
            count: 50,
            overconfident_fraction: 0.89,
            alpha_spread: 0.2,
            valuation_spread: 0.2,
            quote_noise: 0.02,
            order_size: 1.0,
            initial_tokens: 100.0,
            initial_cash: 2000.0,
        }
    }
}

/// Overconfident-fraction presets from the self-assessment surveys.
pub const OVERCONFIDENCE_PRESETS: [f64; 4] = [0.89, 0.90, 0.86, 0.80];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    pub price_weight: f64,
    pub anchor_weight: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig { price_weight: 0.3, anchor_weight: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SponsorConfig {
    pub reserve_rate: f64,
    pub inventory: f64,
    pub inflation_rate: f64,
    pub policy_every: u64,
    pub command_toward_fundamental: bool,
}

impl Default for SponsorConfig {
    fn default() -> Self {
        SponsorConfig {
            reserve_rate: 0.8,
            inventory: 500.0,
            inflation_rate: 0.01,
            policy_every: 0,
            command_toward_fundamental: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BubbleConfig {
    pub threshold: f64,
    pub budget: f64,
    pub max_leverage: f64,
    pub fire_sale_discount: f64,
}

impl Default for BubbleConfig {
    fn default() -> Self {
        BubbleConfig { threshold: 2.0, budget: 1.5, max_leverage: 0.75, fire_sale_discount: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub rounds: u64,
    pub fundamental: f64,
    pub asset_growth: f64,
    pub gdp_growth: f64,
    pub horizon: u64,
    pub agents: AgentsConfig,
    pub learning: LearningConfig,
    pub sponsor: SponsorConfig,
    pub bubble: BubbleConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            kind: ScenarioKind::Market,
            seed: 1,
            rounds: 100,
            fundamental: 10.0,
            asset_growth: 0.10,
            gdp_growth: 0.03,
            horizon: 100,
            agents: AgentsConfig::default(),
            learning: LearningConfig::default(),
            sponsor: SponsorConfig::default(),
            bubble: BubbleConfig::default(),
        }
    }
}

impl ScenarioConfig {
    /// The default consensus market.
    pub fn market(seed: u64) -> Self {
        ScenarioConfig { seed, ..Default::default() }
    }

    /// Credit-fuelled market with r = 0.10 and g = 0.03. Expectations chase
    /// the price harder than in the plain market.
    pub fn bubble(seed: u64) -> Self {
        ScenarioConfig {
            kind: ScenarioKind::Bubble,
            seed,
            rounds: 200,
            learning: LearningConfig { price_weight: 0.5, anchor_weight: 0.1 },
            agents: AgentsConfig { initial_tokens: 20.0, initial_cash: 20.0, ..Default::default() },
            sponsor: SponsorConfig { inventory: 0.0, reserve_rate: 0.2, ..Default::default() },
            ..Default::default()
        }
    }

    /// r = 10%, g = 3% over 100 periods.
    pub fn growth_gap() -> Self {
        ScenarioConfig { kind: ScenarioKind::GrowthGap, ..Default::default() }
    }

    pub fn preset(name: &str, seed: u64) -> Result<Self, SimError> {
        match name {
            "market" => Ok(Self::market(seed)),
            "bubble" => Ok(Self::bubble(seed)),
            "growth-gap" | "growth_gap" => Ok(Self::growth_gap()),
            other => Err(SimError::ConfigInvalid(format!("unknown preset {other:?}"))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: &str| Err(SimError::ConfigInvalid(msg.to_string()));
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        let a = &self.agents;
        let l = &self.learning;
        let s = &self.sponsor;
        let b = &self.bubble;
        if !(self.fundamental.is_finite() && self.fundamental > 0.0) {
            return bad("fundamental must be positive");
        }
        if !(0.0..=1.0).contains(&a.overconfident_fraction) {
            return bad("overconfident_fraction must lie in [0, 1]");
        }
        if !finite_nonneg(a.alpha_spread) {
            return bad("alpha_spread must be non-negative");
        }
        if !(0.0..1.0).contains(&a.valuation_spread) || !(0.0..1.0).contains(&a.quote_noise) {
            return bad("valuation_spread and quote_noise must lie in [0, 1)");
        }
        if !(a.order_size.is_finite() && a.order_size > 0.0) {
            return bad("order_size must be positive");
        }
        if !finite_nonneg(a.initial_tokens) || !finite_nonneg(a.initial_cash) {
            return bad("initial holdings must be non-negative");
        }
        if !finite_nonneg(l.price_weight) || !finite_nonneg(l.anchor_weight) || l.price_weight + l.anchor_weight > 1.0 {
            return bad("learning weights must be non-negative and sum to at most 1");
        }
        if !(s.reserve_rate.is_finite() && s.reserve_rate > 0.0) {
            return bad("sponsor reserve_rate must be positive");
        }
        if !finite_nonneg(s.inventory) {
            return bad("sponsor inventory must be non-negative");
        }
        if !(s.inflation_rate.is_finite() && s.inflation_rate > 0.0 && s.inflation_rate < 1.0) {
            return bad("sponsor inflation_rate must lie in (0, 1)");
        }
        if !(self.asset_growth.is_finite() && self.asset_growth > -1.0)
            || !(self.gdp_growth.is_finite() && self.gdp_growth > -1.0)
        {
            return bad("growth rates must exceed -1");
        }
        if self.kind == ScenarioKind::GrowthGap && self.horizon == 0 {
            return bad("horizon must be positive");
        }
        if self.kind == ScenarioKind::Bubble {
            if !(b.threshold.is_finite() && b.threshold > 0.0) || !(b.budget.is_finite() && b.budget > 0.0) {
                return bad("bubble threshold and budget must be positive");
            }
            if !(b.max_leverage.is_finite() && b.max_leverage > 0.0) {
                return bad("max_leverage must be positive");
            }
            if !(0.0..1.0).contains(&b.fire_sale_discount) {
                return bad("fire_sale_discount must lie in [0, 1)");
            }
        }
        Ok(())
    }
}

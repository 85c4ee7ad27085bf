//! Self-assertive agents: each scales its private valuation by α ≥ 1.

use ito_core::AccountId;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::AgentsConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub account: AccountId,
    /// Self-assertiveness. Exactly 1 for agents that are not overconfident.
    pub alpha: f64,
    /// Current private valuation.
    pub opinion: f64,
}

impl Agent {
    /// Limit price for this round: valuation × α × noise factor.
    pub fn quote(&self, noise: f64) -> f64 {
        self.opinion * self.alpha * (1.0 + noise)
    }
}

/// Number of overconfident agents in a population of `count`.
pub fn overconfident_count(count: usize, fraction: f64) -> usize {
    ((count as f64 * fraction).round() as usize).min(count)
}

/// Draws the population. Which agents are overconfident is a uniform
/// shuffle; their α is uniform on `[1, 1 + alpha_spread)`.
pub fn draw_population<R: Rng>(cfg: &AgentsConfig, fundamental: f64, rng: &mut R) -> Vec<Agent> {
    let n = cfg.count;
    let mut confident = vec![false; n];
    for c in confident.iter_mut().take(overconfident_count(n, cfg.overconfident_fraction)) {
        *c = true;
    }
    confident.shuffle(rng);
    confident
        .into_iter()
        .enumerate()
        .map(|(i, over)| {
            let alpha = if over && cfg.alpha_spread > 0.0 { 1.0 + rng.random_range(0.0..cfg.alpha_spread) } else { 1.0 };
            let eps = symmetric(rng, cfg.valuation_spread);
            Agent { account: AccountId::new(format!("agent{i:03}")), alpha, opinion: fundamental * (1.0 + eps) }
        })
        .collect()
}

/// Uniform on `(-width, width)`, or exactly 0 for zero width.
pub fn symmetric<R: Rng>(rng: &mut R, width: f64) -> f64 {
    if width > 0.0 {
        rng.random_range(-width..width)
    } else {
        0.0
    }
}

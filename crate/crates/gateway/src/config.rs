//! Gateway configuration file.
//!
//! TOML, every key optional:
//!
//! ```toml
//! ledger = "ito.ledger"          # record file; the sidecar is <ledger>.head
//! listen = "127.0.0.1:8080"
//! durability = "sync"            # sync (fsync per command) | flush
//!
//! [auction]
//! clear_every_ms = 0             # 0: rounds clear only on request
//!
//! [sponsor]                      # policy for issues that omit one; a missing trigger is disabled
//! band = "0.1"
//! min_reserve_rate = "0.5"
//! max_round_move = "0.15"
//! stalled_rounds = 3
//!
//! [exchange]
//! categories = ["food", "groceries", "general", "investment", "luxury"]
//!
//! [exchange.incentives.sale]
//! token = "SALES"
//! mint = { kind = "per_notional", rate = "0.01" }
//! schedule = { id = "sales", cliff = 0, duration = 4 }
//!
//! [exchange.incentives.design]
//! token = "DESIGN"
//! mint = { kind = "fixed", amount = "50" }
//! schedule = { id = "design", cliff = 4, duration = 12 }
//! ```

use std::path::{Path, PathBuf};

use ito_core::ledger::store::Durability;
use ito_core::sponsor::CommandingPricePolicy;
use ito_core::ExchangeConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DurabilityMode {
    #[default]
    Sync,
    Flush,
}

impl From<DurabilityMode> for Durability {
    fn from(m: DurabilityMode) -> Self {
        match m {
            DurabilityMode::Sync => Durability::Sync,
            DurabilityMode::Flush => Durability::Flush,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuctionConfig {
    pub clear_every_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub ledger: PathBuf,
    pub listen: String,
    pub durability: DurabilityMode,
    pub auction: AuctionConfig,
    pub sponsor: CommandingPricePolicy,
    pub exchange: ExchangeConfig,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            ledger: PathBuf::from("ito.ledger"),
            listen: "127.0.0.1:8080".into(),
            durability: DurabilityMode::Sync,
            auction: AuctionConfig::default(),
            sponsor: CommandingPricePolicy::default(),
            exchange: ExchangeConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("ConfigInvalid: {path}: {message}")]
    Invalid { path: String, message: String },
    #[error("ConfigUnreadable: {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl GatewayConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: GatewayConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.sponsor.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: shown.clone(), source })?;
        Self::from_toml(&text).map_err(|message| ConfigError::Invalid { path: shown, message })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_example_parses() {
        let doc = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start_matches(' '))
            .collect::<Vec<_>>()
            .join("\n");
        let cfg = GatewayConfig::from_toml(&doc).unwrap();
        assert_eq!(cfg.listen, "127.0.0.1:8080");
        assert_eq!(cfg.sponsor, CommandingPricePolicy::default());
        assert!(cfg.exchange.incentives.sale.is_some());
        assert!(cfg.exchange.incentives.design.is_some());
        assert!(cfg.exchange.categories.contains("food"));
    }

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(GatewayConfig::from_toml("").unwrap(), GatewayConfig::default());
        assert!(GatewayConfig::from_toml("bogus = 1").is_err());
        assert!(GatewayConfig::from_toml("[sponsor]\nband = \"0\"").is_err());
    }
}

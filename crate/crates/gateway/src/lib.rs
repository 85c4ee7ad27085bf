//! Operational shell around `ito-core`: durable single-writer service, HTTP
//! and event-stream interface, and the `ito` command line.

pub mod cli;
pub mod config;
pub mod http;
pub mod service;

use std::net::SocketAddr;
use std::time::Duration;

use ito_core::{Command, Exchange, ExchangeError, LedgerError};

use crate::config::{ConfigError, GatewayConfig};
use crate::service::Service;

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("CorruptLedger: first bad sequence {first_bad}: {reason}")]
    CorruptLedger { first_bad: u64, reason: String },
    #[error("PortUnavailable: {addr}: {source}")]
    PortUnavailable { addr: String, source: std::io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Exchange(#[from] ExchangeError),
    #[error(transparent)]
    Sim(#[from] ito_sim::SimError),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
    #[error("Usage: {0}")]
    Usage(String),
}

impl From<LedgerError> for GatewayError {
    fn from(e: LedgerError) -> Self {
        match e {
            LedgerError::Corrupt { first_bad, reason } | LedgerError::ChainInvalid { first_bad, reason } => {
                GatewayError::CorruptLedger { first_bad, reason }
            }
            other => GatewayError::Exchange(ExchangeError::Ledger(other)),
        }
    }
}

impl GatewayError {
    /// Stable error name, the message text before the first colon.
    pub fn code(&self) -> String {
        self.to_string().split(':').next().unwrap_or_default().to_string()
    }
}

/// Opens the configured ledger, replaying it into an exchange. A ledger
/// that fails verification is refused.
pub fn open_exchange(cfg: &GatewayConfig) -> Result<Exchange, GatewayError> {
    Ok(Exchange::open(&cfg.ledger, cfg.durability.into(), cfg.exchange.clone())?)
}

/// Runs the HTTP service until ctrl-c. `on_ready` receives the bound
/// address once the listener is up.
pub async fn serve(cfg: GatewayConfig, on_ready: impl FnOnce(SocketAddr)) -> Result<(), GatewayError> {
    let exchange = open_exchange(&cfg)?;
    let listener = tokio::net::TcpListener::bind(&cfg.listen)
        .await
        .map_err(|source| GatewayError::PortUnavailable { addr: cfg.listen.clone(), source })?;
    let addr = listener.local_addr()?;
    let (service, writer) = Service::start(exchange);

    let cadence = (cfg.auction.clear_every_ms > 0).then(|| {
        let svc = service.clone();
        let period = Duration::from_millis(cfg.auction.clear_every_ms);
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            tick.tick().await;
            loop {
                tick.tick().await;
                let snap = svc.snapshot();
                let markets: Vec<_> = snap.state.tokens().filter(|t| t.policy().is_some()).map(|t| t.id().clone()).collect();
                for token in markets {
                    // A failed clear leaves the round open for the next tick.
                    let _ = svc.submit(None, Command::TriggerClear { token }).await;
                }
            }
        })
    });

    on_ready(addr);
    let app = http::router(service, cfg.sponsor);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    if let Some(task) = cadence {
        task.abort();
    }
    // The writer drains once the last service handle is gone.
    tokio::task::spawn_blocking(move || writer.join()).await.ok();
    Ok(())
}

//! Single-writer command applier.
//!
//! One OS thread owns the [`Exchange`]. Requests reach it over a bounded
//! channel and wait on a oneshot reply, which is sent only after the batch
//! is durable. Readers never touch the writer: they see the latest
//! committed [`Snapshot`] through a watch channel, and committed entries
//! are fanned out on a broadcast channel for the event stream.

use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;

use ito_core::ledger::State;
use ito_core::{Command, Digest, Exchange, ExchangeError, LedgerEntry, Receipt};
use tokio::sync::{broadcast, mpsc, oneshot, watch};

const QUEUE_DEPTH: usize = 1024;
const STREAM_BUFFER: usize = 4096;

/// State after a whole number of commands.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub state: State,
    pub len: u64,
    pub head: Digest,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Rejected(#[from] ExchangeError),
    #[error("ServiceStopped: the command writer has shut down")]
    Stopped,
}

struct Job {
    key: Option<String>,
    command: Command,
    reply: oneshot::Sender<Result<Receipt, ExchangeError>>,
}

#[derive(Clone)]
pub struct Service {
    tx: mpsc::Sender<Job>,
    snapshot: watch::Receiver<Arc<Snapshot>>,
    log: Arc<RwLock<Vec<LedgerEntry>>>,
    events: broadcast::Sender<LedgerEntry>,
}

impl Service {
    /// Starts the writer thread. Joining the handle after every `Service`
    /// clone is dropped returns the exchange.
    pub fn start(exchange: Exchange) -> (Service, JoinHandle<Exchange>) {
        let (tx, mut rx) = mpsc::channel::<Job>(QUEUE_DEPTH);
        let (snap_tx, snapshot) = watch::channel(Arc::new(snapshot_of(&exchange)));
        let log = Arc::new(RwLock::new(exchange.ledger().entries().to_vec()));
        let (events, _) = broadcast::channel(STREAM_BUFFER);
        let service = Service { tx, snapshot, log: log.clone(), events: events.clone() };

        let writer = std::thread::Builder::new()
            .name("ito-writer".into())
            .spawn(move || {
                let mut exchange = exchange;
                while let Some(job) = rx.blocking_recv() {
                    let result = exchange.execute(job.key.as_deref(), &job.command);
                    if let Ok(receipt) = &result {
                        if !receipt.entries.is_empty() {
                            log.write().expect("log lock poisoned").extend(receipt.entries.iter().cloned());
                            snap_tx.send_replace(Arc::new(snapshot_of(&exchange)));
                            for e in &receipt.entries {
                                // No subscribers is fine.
                                let _ = events.send(e.clone());
                            }
                        }
                    }
                    let _ = job.reply.send(result);
                }
                exchange
            })
            .expect("spawn writer thread");
        (service, writer)
    }

    /// Queues a command and waits until it is durable or rejected.
    pub async fn submit(&self, key: Option<String>, command: Command) -> Result<Receipt, ServiceError> {
        let (reply, rx) = oneshot::channel();
        self.tx.send(Job { key, command, reply }).await.map_err(|_| ServiceError::Stopped)?;
        Ok(rx.await.map_err(|_| ServiceError::Stopped)??)
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.borrow().clone()
    }

    /// Committed entries with sequence at least `from`, at most `limit`.
    pub fn entries_from(&self, from: u64, limit: usize) -> Vec<LedgerEntry> {
        let log = self.log.read().expect("log lock poisoned");
        let start = (from as usize).min(log.len());
        log[start..].iter().take(limit).cloned().collect()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<LedgerEntry> {
        self.events.subscribe()
    }
}

fn snapshot_of(ex: &Exchange) -> Snapshot {
    Snapshot { state: ex.state().clone(), len: ex.ledger().len() as u64, head: ex.ledger().head() }
}

//! Append-only, hash-chained event ledger.
//!
//! Each entry commits to its predecessor:
//!
//! ```text
//! payload    = u64 LE sequence || u64 LE timestamp || canonical(event)
//! entry_hash = SHA-256(prev_hash || payload)
//! ```
//!
//! Entry 0 links to the all-zero digest. The canonical event encoding is
//! described in [`codec`]; the on-disk framing in [`store`].

pub mod codec;
pub mod event;
pub mod state;
pub mod store;

use std::fmt;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

use codec::{Canonical, DecodeError, Reader, Writer};
pub use event::Event;
pub use state::{BalanceSheet, State, ValidationError};
use store::{parse_records, Durability, FileStore, Head, MemoryStore, RawRecord, Store};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0; 32]);

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Digest> {
        let v = hex::decode(s).ok()?;
        v.try_into().ok().map(Digest)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 64 hex characters"))
    }
}

/// `SHA-256(prev_hash || payload)`.
pub fn chain_hash(prev: &Digest, payload: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update(prev.0);
    h.update(payload);
    Digest(h.finalize().into())
}

pub fn encode_payload(sequence: u64, timestamp: u64, event: &Event) -> Vec<u8> {
    let mut w = Writer::new();
    w.u64(sequence);
    w.u64(timestamp);
    event.encode(&mut w);
    w.into_bytes()
}

pub fn decode_payload(bytes: &[u8]) -> Result<(u64, u64, Event), DecodeError> {
    let mut r = Reader::new(bytes);
    let seq = r.u64()?;
    let ts = r.u64()?;
    let ev = Event::decode(&mut r)?;
    r.finish()?;
    Ok((seq, ts, ev))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub sequence: u64,
    /// Logical tick assigned by the writer.
    pub timestamp: u64,
    pub event: Event,
    pub prev_hash: Digest,
    pub entry_hash: Digest,
}

impl LedgerEntry {
    fn seal(sequence: u64, timestamp: u64, event: Event, prev_hash: Digest) -> (LedgerEntry, RawRecord) {
        let payload = encode_payload(sequence, timestamp, &event);
        let entry_hash = chain_hash(&prev_hash, &payload);
        (
            LedgerEntry { sequence, timestamp, event, prev_hash, entry_hash },
            RawRecord { prev_hash, entry_hash, payload },
        )
    }

    pub fn payload(&self) -> Vec<u8> {
        encode_payload(self.sequence, self.timestamp, &self.event)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum VerificationReport {
    Ok { entries: u64, head: Digest },
    Corrupt { first_bad: u64, reason: String },
}

impl VerificationReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, VerificationReport::Ok { .. })
    }

    pub fn first_bad(&self) -> Option<u64> {
        match self {
            VerificationReport::Ok { .. } => None,
            VerificationReport::Corrupt { first_bad, .. } => Some(*first_bad),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("ValidationFailed: {0}")]
    ValidationFailed(#[from] ValidationError),
    #[error("StorageFailed: {0}")]
    StorageFailed(#[from] io::Error),
    #[error("ChainInvalid: first bad sequence {first_bad}: {reason}")]
    ChainInvalid { first_bad: u64, reason: String },
    #[error("CorruptLedger: first bad sequence {first_bad}: {reason}")]
    Corrupt { first_bad: u64, reason: String },
    #[error("TickRegressed: timestamp {got} precedes the last tick {last}")]
    TickRegressed { got: u64, last: u64 },
}

fn corrupt(first_bad: u64, reason: impl Into<String>) -> VerificationReport {
    VerificationReport::Corrupt { first_bad, reason: reason.into() }
}

/// Checks sequence numbering, hash links and canonical decoding of records.
fn verify_records<'a>(records: impl IntoIterator<Item = &'a RawRecord>) -> (VerificationReport, Vec<LedgerEntry>) {
    let mut prev = Digest::ZERO;
    let mut out = Vec::new();
    for (i, rec) in records.into_iter().enumerate() {
        let i = i as u64;
        if rec.prev_hash != prev {
            return (corrupt(i, "prev_hash does not link to the previous entry"), out);
        }
        if chain_hash(&rec.prev_hash, &rec.payload) != rec.entry_hash {
            return (corrupt(i, "entry_hash does not match contents"), out);
        }
        let (seq, ts, event) = match decode_payload(&rec.payload) {
            Ok(v) => v,
            Err(e) => return (corrupt(i, format!("undecodable payload: {e}")), out),
        };
        if seq != i {
            return (corrupt(i, format!("sequence {seq} at position {i}")), out);
        }
        if encode_payload(seq, ts, &event) != rec.payload {
            return (corrupt(i, "non-canonical payload encoding"), out);
        }
        prev = rec.entry_hash;
        out.push(LedgerEntry { sequence: seq, timestamp: ts, event, prev_hash: rec.prev_hash, entry_hash: rec.entry_hash });
    }
    (VerificationReport::Ok { entries: out.len() as u64, head: prev }, out)
}

/// Verifies persisted ledger bytes. Any framing break is reported at the
/// record where it occurs.
pub fn verify_bytes(bytes: &[u8]) -> VerificationReport {
    let (records, framing) = parse_records(bytes);
    let (report, _) = verify_records(records.iter().map(|(r, _)| r));
    match (report, framing) {
        (VerificationReport::Ok { .. }, Some(f)) => corrupt(f.index, f.reason),
        (r, _) => r,
    }
}

/// Verifies a ledger file against its own bytes (not against the sidecar).
pub fn verify_file(path: &Path) -> io::Result<VerificationReport> {
    Ok(verify_bytes(&std::fs::read(path)?))
}

/// Reads the committed prefix of a ledger file without modifying it.
/// Returns the entries, the replayed state and the committed byte length.
fn load_committed(path: &Path) -> Result<(Vec<LedgerEntry>, State, u64), LedgerError> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let head = FileStore::read_head(path)?;
    let (records, framing) = parse_records(&bytes);
    let committed = match head {
        Some(h) => h.count as usize,
        None => records.len(),
    };
    if records.len() < committed {
        let (first_bad, reason) = match framing {
            Some(f) => (f.index, f.reason.to_string()),
            None => (records.len() as u64, "ledger is shorter than its committed head".to_string()),
        };
        return Err(LedgerError::Corrupt { first_bad, reason });
    }
    let (report, entries) = verify_records(records[..committed].iter().map(|(r, _)| r));
    if let VerificationReport::Corrupt { first_bad, reason } = report {
        return Err(LedgerError::Corrupt { first_bad, reason });
    }
    let head_hash = entries.last().map(|e| e.entry_hash).unwrap_or(Digest::ZERO);
    if let Some(h) = head {
        if h.hash != head_hash {
            return Err(LedgerError::Corrupt {
                first_bad: h.count.saturating_sub(1),
                reason: "head hash differs from the committed sidecar".into(),
            });
        }
    }
    let state = replay_state(&entries).map_err(|e| match e {
        LedgerError::ChainInvalid { first_bad, reason } => LedgerError::Corrupt { first_bad, reason },
        other => other,
    })?;
    let len = if committed == 0 { 0 } else { records[committed - 1].1 as u64 };
    Ok((entries, state, len))
}

/// Committed entries of a ledger file and the state they replay to,
/// without modifying the file.
pub fn read_committed(path: &Path) -> Result<(Vec<LedgerEntry>, State), LedgerError> {
    load_committed(path).map(|(entries, state, _)| (entries, state))
}

/// Verifies the committed prefix of a ledger file: framing, hash links,
/// the head sidecar and event validity on replay. Records past the commit
/// point are ignored, and nothing is written.
pub fn verify_committed(path: &Path) -> io::Result<VerificationReport> {
    match load_committed(path) {
        Ok((entries, _, _)) => Ok(VerificationReport::Ok {
            entries: entries.len() as u64,
            head: entries.last().map(|e| e.entry_hash).unwrap_or(Digest::ZERO),
        }),
        Err(LedgerError::Corrupt { first_bad, reason }) => Ok(corrupt(first_bad, reason)),
        Err(LedgerError::StorageFailed(e)) => Err(e),
        Err(other) => Ok(corrupt(0, other.to_string())),
    }
}

/// Folds `entries` from genesis, validating each event.
pub fn replay_state<'a>(entries: impl IntoIterator<Item = &'a LedgerEntry>) -> Result<State, LedgerError> {
    let mut state = State::default();
    for e in entries {
        state.apply(&e.event).map_err(|err| LedgerError::ChainInvalid {
            first_bad: e.sequence,
            reason: format!("event fails validation on replay: {err}"),
        })?;
    }
    Ok(state)
}

pub struct Ledger {
    entries: Vec<LedgerEntry>,
    state: State,
    store: Box<dyn Store>,
}

impl fmt::Debug for Ledger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ledger")
            .field("entries", &self.entries.len())
            .field("head", &self.head())
            .finish()
    }
}

impl Default for Ledger {
    fn default() -> Self {
        Ledger::in_memory()
    }
}

impl Ledger {
    pub fn in_memory() -> Ledger {
        Ledger { entries: Vec::new(), state: State::default(), store: Box::new(MemoryStore::default()) }
    }

    /// Opens or creates a file-backed ledger, dropping any uncommitted tail.
    /// Refuses to open a ledger whose committed prefix fails verification.
    pub fn open(path: &Path, durability: Durability) -> Result<Ledger, LedgerError> {
        let (entries, state, len) = load_committed(path)?;
        let store = FileStore::open(path, len, durability)?;
        Ok(Ledger { entries, state, store: Box::new(store) })
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn head(&self) -> Digest {
        self.entries.last().map(|e| e.entry_hash).unwrap_or(Digest::ZERO)
    }

    pub fn last_tick(&self) -> Option<u64> {
        self.entries.last().map(|e| e.timestamp)
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn balances(&self) -> &BalanceSheet {
        self.state.balances()
    }

    /// Raw persisted bytes, exactly as stored.
    pub fn persisted_bytes(&self) -> io::Result<Vec<u8>> {
        self.store.persisted()
    }

    pub fn append(&mut self, event: Event, tick: u64) -> Result<LedgerEntry, LedgerError> {
        let mut out = self.append_batch(vec![event], tick)?;
        Ok(out.pop().expect("one entry"))
    }

    /// Appends `events` atomically: either all are validated, persisted and
    /// committed, or none are and the chain head is unchanged.
    pub fn append_batch(&mut self, events: Vec<Event>, tick: u64) -> Result<Vec<LedgerEntry>, LedgerError> {
        if let Some(last) = self.last_tick() {
            if tick < last {
                return Err(LedgerError::TickRegressed { got: tick, last });
            }
        }
        for (i, ev) in events.iter().enumerate() {
            if let Err(err) = self.state.apply(ev) {
                if i > 0 {
                    self.rebuild_state();
                }
                return Err(err.into());
            }
        }
        let mut prev = self.head();
        let mut bytes = Vec::new();
        let mut sealed = Vec::with_capacity(events.len());
        for (i, ev) in events.into_iter().enumerate() {
            let (entry, raw) = LedgerEntry::seal(self.entries.len() as u64 + i as u64, tick, ev, prev);
            raw.write_to(&mut bytes);
            prev = entry.entry_hash;
            sealed.push(entry);
        }
        if sealed.is_empty() {
            return Ok(sealed);
        }
        let head = Head { count: (self.entries.len() + sealed.len()) as u64, hash: prev };
        if let Err(e) = self.store.append(&bytes, head) {
            self.rebuild_state();
            return Err(e.into());
        }
        self.entries.extend(sealed.iter().cloned());
        Ok(sealed)
    }

    fn rebuild_state(&mut self) {
        self.state = replay_state(&self.entries).expect("committed entries always replay");
    }

    /// Recomputes every hash and link from the entries' contents.
    pub fn verify_chain(&self) -> VerificationReport {
        verify_entries(&self.entries)
    }

    /// Balances rebuilt from genesis. Fails if the chain does not verify.
    pub fn replay(&self) -> Result<BalanceSheet, LedgerError> {
        if let VerificationReport::Corrupt { first_bad, reason } = self.verify_chain() {
            return Err(LedgerError::ChainInvalid { first_bad, reason });
        }
        Ok(replay_state(&self.entries)?.balances().clone())
    }

    /// One JSON object per entry, hashes hex-encoded.
    pub fn export_jsonl(&self, mut out: impl Write) -> io::Result<()> {
        export_jsonl(&self.entries, &mut out)
    }
}

pub fn export_jsonl(entries: &[LedgerEntry], out: &mut impl Write) -> io::Result<()> {
    for e in entries {
        serde_json::to_writer(&mut *out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Verifies decoded entries by re-encoding their payloads.
pub fn verify_entries(entries: &[LedgerEntry]) -> VerificationReport {
    let mut prev = Digest::ZERO;
    for (i, e) in entries.iter().enumerate() {
        let i = i as u64;
        if e.sequence != i {
            return corrupt(i, format!("sequence {} at position {i}", e.sequence));
        }
        if e.prev_hash != prev {
            return corrupt(i, "prev_hash does not link to the previous entry");
        }
        if chain_hash(&e.prev_hash, &e.payload()) != e.entry_hash {
            return corrupt(i, "entry_hash does not match contents");
        }
        prev = e.entry_hash;
    }
    VerificationReport::Ok { entries: entries.len() as u64, head: prev }
}

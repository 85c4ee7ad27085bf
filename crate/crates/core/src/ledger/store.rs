//! Persistence for ledger records.
//!
//! On disk a ledger is two files:
//!
//! - `<name>`: concatenated records, each `u32 LE body length` followed by
//!   `prev_hash (32) || entry_hash (32) || payload`;
//! - `<name>.head`: a text sidecar, `count <n>\nhead <64 hex>\n`, replaced
//!   atomically after every committed batch.
//!
//! The sidecar is the commit point. Records past the sidecar count were
//! never acknowledged and are dropped when the ledger is reopened.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use super::Digest;

/// Fully-encoded record body as persisted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub prev_hash: Digest,
    pub entry_hash: Digest,
    pub payload: Vec<u8>,
}

impl RawRecord {
    pub fn write_to(&self, out: &mut Vec<u8>) {
        let len = 64 + self.payload.len();
        out.extend_from_slice(&(len as u32).to_le_bytes());
        out.extend_from_slice(&self.prev_hash.0);
        out.extend_from_slice(&self.entry_hash.0);
        out.extend_from_slice(&self.payload);
    }
}

/// Why a byte stream stopped parsing as records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramingError {
    pub index: u64,
    pub offset: usize,
    pub reason: &'static str,
}

/// Splits persisted bytes into records. Returns the parsed records with
/// their end offsets, and the framing error that stopped parsing, if any.
pub fn parse_records(bytes: &[u8]) -> (Vec<(RawRecord, usize)>, Option<FramingError>) {
    let mut out = Vec::new();
    let mut off = 0;
    while off < bytes.len() {
        let index = out.len() as u64;
        let fail = |reason| Some(FramingError { index, offset: off, reason });
        if bytes.len() - off < 4 {
            return (out, fail("truncated length prefix"));
        }
        let len = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
        if len < 64 {
            return (out, fail("record shorter than its hashes"));
        }
        if bytes.len() - off - 4 < len {
            return (out, fail("record runs past end of file"));
        }
        let body = &bytes[off + 4..off + 4 + len];
        off += 4 + len;
        out.push((
            RawRecord {
                prev_hash: Digest(body[..32].try_into().unwrap()),
                entry_hash: Digest(body[32..64].try_into().unwrap()),
                payload: body[64..].to_vec(),
            },
            off,
        ));
    }
    (out, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Head {
    pub count: u64,
    pub hash: Digest,
}

impl Head {
    pub fn render(&self) -> String {
        format!("count {}\nhead {}\n", self.count, self.hash.to_hex())
    }

    pub fn parse(text: &str) -> Option<Head> {
        let mut count = None;
        let mut hash = None;
        for line in text.lines() {
            match line.split_once(' ') {
                Some(("count", v)) => count = v.trim().parse().ok(),
                Some(("head", v)) => hash = Digest::from_hex(v.trim()),
                _ => {}
            }
        }
        Some(Head { count: count?, hash: hash? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Durability {
    /// `fsync` records and sidecar before acknowledging.
    #[default]
    Sync,
    /// Flush to the OS only. Survives process crashes, not power loss.
    Flush,
}

pub trait Store: Send + Sync {
    /// Persists `bytes` (one or more whole records) and then commits `head`.
    fn append(&mut self, bytes: &[u8], head: Head) -> io::Result<()>;

    /// Everything persisted so far.
    fn persisted(&self) -> io::Result<Vec<u8>>;
}

#[derive(Debug, Default)]
pub struct MemoryStore {
    bytes: Vec<u8>,
    head: Option<Head>,
}

impl MemoryStore {
    pub fn head(&self) -> Option<Head> {
        self.head
    }
}

impl Store for MemoryStore {
    fn append(&mut self, bytes: &[u8], head: Head) -> io::Result<()> {
        self.bytes.extend_from_slice(bytes);
        self.head = Some(head);
        Ok(())
    }

    fn persisted(&self) -> io::Result<Vec<u8>> {
        Ok(self.bytes.clone())
    }
}

#[derive(Debug)]
pub struct FileStore {
    path: PathBuf,
    file: File,
    len: u64,
    durability: Durability,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".head");
    path.with_file_name(name)
}

impl FileStore {
    /// Opens (creating if needed) the record file, positioned at `len`.
    /// Anything beyond `len` is cut off.
    pub fn open(path: &Path, len: u64, durability: Durability) -> io::Result<FileStore> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        let file = OpenOptions::new().create(true).truncate(false).read(true).write(true).open(path)?;
        if file.metadata()?.len() != len {
            file.set_len(len)?;
            file.sync_all()?;
        }
        Ok(FileStore { path: path.to_path_buf(), file, len, durability })
    }

    pub fn read_head(path: &Path) -> io::Result<Option<Head>> {
        match fs::read_to_string(sidecar_path(path)) {
            Ok(text) => Head::parse(&text)
                .map(Some)
                .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "malformed head sidecar")),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn write_head(&self, head: Head) -> io::Result<()> {
        let side = sidecar_path(&self.path);
        let mut tmp_name = side.file_name().unwrap_or_default().to_os_string();
        tmp_name.push(".tmp");
        let tmp = side.with_file_name(tmp_name);
        {
            let mut f = File::create(&tmp)?;
            f.write_all(head.render().as_bytes())?;
            if self.durability == Durability::Sync {
                f.sync_all()?;
            }
        }
        fs::rename(&tmp, &side)
    }
}

impl Store for FileStore {
    fn append(&mut self, bytes: &[u8], head: Head) -> io::Result<()> {
        use std::io::{Seek, SeekFrom};
        let result = (|| {
            self.file.seek(SeekFrom::Start(self.len))?;
            self.file.write_all(bytes)?;
            self.file.flush()?;
            if self.durability == Durability::Sync {
                self.file.sync_data()?;
            }
            self.write_head(head)
        })();
        match result {
            Ok(()) => {
                self.len += bytes.len() as u64;
                Ok(())
            }
            Err(e) => {
                let _ = self.file.set_len(self.len);
                Err(e)
            }
        }
    }

    fn persisted(&self) -> io::Result<Vec<u8>> {
        let mut bytes = fs::read(&self.path)?;
        bytes.truncate(self.len as usize);
        Ok(bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn head_round_trip() {
        let h = Head { count: 3, hash: Digest([7; 32]) };
        assert_eq!(Head::parse(&h.render()), Some(h));
        assert_eq!(Head::parse("count x\n"), None);
    }

    #[test]
    fn framing_errors() {
        let rec = RawRecord { prev_hash: Digest([0; 32]), entry_hash: Digest([1; 32]), payload: vec![9, 9] };
        let mut bytes = Vec::new();
        rec.write_to(&mut bytes);
        rec.write_to(&mut bytes);
        let (ok, err) = parse_records(&bytes);
        assert_eq!(ok.len(), 2);
        assert!(err.is_none());
        let (ok, err) = parse_records(&bytes[..bytes.len() - 1]);
        assert_eq!(ok.len(), 1);
        assert_eq!(err.unwrap().index, 1);
    }
}

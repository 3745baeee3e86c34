//! On-disk log: one directory per evaluation holding `events.log` and
//! `snapshot-<seq>.json` files.
//!
//! `events.log` starts with [`LOG_MAGIC`] followed by records framed as
//! `len: u32 LE | crc32: u32 LE | JSON bytes`. A record cut short at the end
//! of the file is a torn write from a crash and is dropped; a complete record
//! with a bad checksum makes the log corrupt.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tracing::warn;

use super::{check_sequence, EventLog, PersistenceError, StorageError, SNAPSHOT_EVERY};
use crate::ids::EvaluationId;
use crate::lifecycle::{Evaluation, EventRecord};

pub const LOG_FILE: &str = "events.log";
pub const LOG_MAGIC: &[u8; 8] = b"EVKLOG\x00\x01";
const SNAPSHOT_FORMAT: &str = "evalkit-snapshot/1";

pub struct FileLog {
    dir: PathBuf,
    file: File,
    sync: bool,
    snapshot_every: u64,
}

impl FileLog {
    /// Creates a fresh log in `dir`; fails if one already exists.
    pub fn create(dir: &Path) -> Result<Self, StorageError> {
        fs::create_dir_all(dir)?;
        let mut file = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(dir.join(LOG_FILE))?;
        file.write_all(LOG_MAGIC)?;
        file.sync_all()?;
        Ok(Self {
            dir: dir.to_path_buf(),
            file,
            sync: true,
            snapshot_every: SNAPSHOT_EVERY,
        })
    }

    /// Opens an existing log for appending, dropping a torn trailing record.
    pub fn open(dir: &Path) -> Result<(Self, Vec<EventRecord>), PersistenceError> {
        let path = dir.join(LOG_FILE);
        let scan = scan(&path)?;
        if scan.torn {
            warn!(path = %path.display(), valid = scan.valid_len, "dropping torn record at end of log");
            let f = OpenOptions::new().write(true).open(&path)?;
            f.set_len(scan.valid_len)?;
            f.sync_all()?;
        }
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok((
            Self {
                dir: dir.to_path_buf(),
                file,
                sync: true,
                snapshot_every: SNAPSHOT_EVERY,
            },
            scan.records,
        ))
    }

    /// Disables `fsync` after each append (tests and bulk imports only).
    pub fn with_sync(mut self, sync: bool) -> Self {
        self.sync = sync;
        self
    }

    /// Snapshot cadence in events; 0 disables snapshots.
    pub fn with_snapshot_every(mut self, every: u64) -> Self {
        self.snapshot_every = every;
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl EventLog for FileLog {
    fn append(&mut self, record: &EventRecord) -> Result<(), StorageError> {
        let body = serde_json::to_vec(record)?;
        let mut frame = Vec::with_capacity(body.len() + 8);
        frame.extend_from_slice(&(body.len() as u32).to_le_bytes());
        frame.extend_from_slice(&crc32fast::hash(&body).to_le_bytes());
        frame.extend_from_slice(&body);
        self.file.write_all(&frame)?;
        if self.sync {
            self.file.sync_data()?;
        }
        Ok(())
    }

    fn after_apply(&mut self, state: &Evaluation) -> Result<(), StorageError> {
        if self.snapshot_every > 0 && state.last_seq.is_multiple_of(self.snapshot_every) {
            write_snapshot(&self.dir, state)?;
        }
        Ok(())
    }

    fn read_all(&self) -> Result<Vec<EventRecord>, StorageError> {
        read_log(&self.dir).map_err(|e| match e {
            PersistenceError::Storage(s) => s,
            other => StorageError::Io(io::Error::other(other.to_string())),
        })
    }
}

struct Scan {
    records: Vec<EventRecord>,
    valid_len: u64,
    torn: bool,
}

fn scan(path: &Path) -> Result<Scan, PersistenceError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < LOG_MAGIC.len() || &bytes[..LOG_MAGIC.len()] != LOG_MAGIC {
        return Err(PersistenceError::CorruptLog("missing log header".into()));
    }
    let mut pos = LOG_MAGIC.len();
    let mut records = Vec::new();
    let mut torn = false;
    while pos < bytes.len() {
        if bytes.len() - pos < 8 {
            torn = true;
            break;
        }
        let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        let crc = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap());
        if bytes.len() - pos - 8 < len {
            torn = true;
            break;
        }
        let body = &bytes[pos + 8..pos + 8 + len];
        if crc32fast::hash(body) != crc {
            return Err(PersistenceError::CorruptLog(format!(
                "checksum mismatch in record {} at byte {pos}",
                records.len() + 1
            )));
        }
        let record: EventRecord = serde_json::from_slice(body).map_err(|e| {
            PersistenceError::CorruptLog(format!("undecodable record at byte {pos}: {e}"))
        })?;
        records.push(record);
        pos += 8 + len;
    }
    Ok(Scan {
        records,
        valid_len: pos as u64,
        torn,
    })
}

/// Reads and validates every record of the log in `dir`.
pub fn read_log(dir: &Path) -> Result<Vec<EventRecord>, PersistenceError> {
    let path = dir.join(LOG_FILE);
    if !path.exists() {
        return Err(PersistenceError::UnknownEvaluation(
            dir.display().to_string(),
        ));
    }
    let records = scan(&path)?.records;
    check_sequence(&records)?;
    Ok(records)
}

/// Rebuilds the evaluation in `dir` from its full log, optionally stopping at
/// `up_to_seq`.
pub fn replay_dir(dir: &Path, up_to_seq: Option<u64>) -> Result<Evaluation, PersistenceError> {
    super::replay(&read_log(dir)?, up_to_seq)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SnapshotHeader {
    format: String,
    evaluation_id: EvaluationId,
    up_to_seq: u64,
    checksum: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub evaluation_id: EvaluationId,
    pub up_to_seq: u64,
    pub state: Evaluation,
}

pub fn snapshot_path(dir: &Path, seq: u64) -> PathBuf {
    dir.join(format!("snapshot-{seq:012}.json"))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes a snapshot of `state` atomically (temp file + rename).
pub fn write_snapshot(dir: &Path, state: &Evaluation) -> Result<PathBuf, StorageError> {
    let body = serde_json::to_vec(state)?;
    let header = SnapshotHeader {
        format: SNAPSHOT_FORMAT.into(),
        evaluation_id: state.id.clone(),
        up_to_seq: state.last_seq,
        checksum: sha256_hex(&body),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.extend_from_slice(&body);

    let path = snapshot_path(dir, state.last_seq);
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(&out)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &path)?;
    Ok(path)
}

fn load_snapshot(path: &Path) -> Result<Snapshot, PersistenceError> {
    let bytes = fs::read(path)?;
    let bad = |m: &str| PersistenceError::CorruptSnapshot(format!("{}: {m}", path.display()));
    let split = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| bad("no header"))?;
    let header: SnapshotHeader =
        serde_json::from_slice(&bytes[..split]).map_err(|e| bad(&e.to_string()))?;
    let body = &bytes[split + 1..];
    if header.format != SNAPSHOT_FORMAT || sha256_hex(body) != header.checksum {
        return Err(bad("checksum mismatch"));
    }
    let state: Evaluation = serde_json::from_slice(body).map_err(|e| bad(&e.to_string()))?;
    if state.last_seq != header.up_to_seq || state.id != header.evaluation_id {
        return Err(bad("header does not match state"));
    }
    Ok(Snapshot {
        evaluation_id: header.evaluation_id,
        up_to_seq: header.up_to_seq,
        state,
    })
}

fn snapshots_newest_first(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("snapshot-") && n.ends_with(".json"))
        })
        .collect();
    out.sort();
    out.reverse();
    Ok(out)
}

pub struct Recovered {
    pub state: Evaluation,
    pub log: FileLog,
    /// Sequence number of the snapshot recovery started from, if any.
    pub snapshot_seq: Option<u64>,
}

/// Restores the evaluation in `dir`: newest usable snapshot plus the log
/// tail, falling back to a full replay when no snapshot loads.
pub fn recover(dir: &Path) -> Result<Recovered, PersistenceError> {
    let (log, records) = FileLog::open(dir)?;
    check_sequence(&records)?;
    let last = records.last().map(|r| r.seq).unwrap_or(0);

    for path in snapshots_newest_first(dir)? {
        match load_snapshot(&path) {
            Ok(snap) if snap.up_to_seq <= last => {
                let mut state = snap.state;
                for r in &records[snap.up_to_seq as usize..] {
                    state.apply(r)?;
                }
                return Ok(Recovered {
                    state,
                    log,
                    snapshot_seq: Some(snap.up_to_seq),
                });
            }
            Ok(snap) => warn!(
                seq = snap.up_to_seq,
                "snapshot is ahead of the log, ignoring"
            ),
            Err(e) => warn!(error = %e, "ignoring unusable snapshot"),
        }
    }
    Ok(Recovered {
        state: Evaluation::replay(&records)?,
        log,
        snapshot_seq: None,
    })
}

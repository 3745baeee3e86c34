//! Append-only event logs, snapshots, replay and result export.
//!
//! The log is the source of truth for an evaluation. Every mutation is
//! appended (and, for [`FileLog`], synced) before it is applied, so an
//! acknowledged command survives a crash.

mod export;
mod file;

use std::io;
use std::sync::Arc;

use parking_lot::Mutex;
use thiserror::Error;

use crate::lifecycle::{ApplyError, Evaluation, EventRecord};

pub use export::{export_full_json, export_scores_csv, import_full_json, ExportFormat, FullExport};
pub use file::{
    read_log, recover, replay_dir, snapshot_path, write_snapshot, FileLog, Recovered, Snapshot,
    LOG_FILE, LOG_MAGIC,
};

/// Default number of events between snapshots.
pub const SNAPSHOT_EVERY: u64 = 500;

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("storage failure: {0}")]
    Io(#[from] io::Error),
    #[error("could not encode event: {0}")]
    Encode(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum PersistenceError {
    #[error("corrupt log: {0}")]
    CorruptLog(String),
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("unknown evaluation {0}")]
    UnknownEvaluation(String),
    #[error("import mismatch: {0}")]
    ImportMismatch(String),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Apply(#[from] ApplyError),
}

impl From<io::Error> for PersistenceError {
    fn from(e: io::Error) -> Self {
        Self::Storage(StorageError::Io(e))
    }
}

/// Destination of an evaluation's events.
pub trait EventLog: Send {
    /// Durably records `record`. Must not return before the record would
    /// survive a crash.
    fn append(&mut self, record: &EventRecord) -> Result<(), StorageError>;

    /// Called after `record` has been folded into `state`.
    fn after_apply(&mut self, _state: &Evaluation) -> Result<(), StorageError> {
        Ok(())
    }

    /// Every record appended so far, in order.
    fn read_all(&self) -> Result<Vec<EventRecord>, StorageError>;
}

/// In-memory log. Clones share the same records, which lets a test keep a
/// handle after giving the log to a runtime.
#[derive(Debug, Clone, Default)]
pub struct MemoryLog {
    records: Arc<Mutex<Vec<EventRecord>>>,
}

impl MemoryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> Vec<EventRecord> {
        self.records.lock().clone()
    }

    pub fn len(&self) -> usize {
        self.records.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl EventLog for MemoryLog {
    fn append(&mut self, record: &EventRecord) -> Result<(), StorageError> {
        self.records.lock().push(record.clone());
        Ok(())
    }

    fn read_all(&self) -> Result<Vec<EventRecord>, StorageError> {
        Ok(self.records())
    }
}

/// Folds `records` up to and including `up_to_seq`, checking the sequence is
/// gapless from 1.
pub fn replay(
    records: &[EventRecord],
    up_to_seq: Option<u64>,
) -> Result<Evaluation, PersistenceError> {
    check_sequence(records)?;
    let limit = up_to_seq.unwrap_or(u64::MAX);
    Ok(Evaluation::replay(
        records.iter().take_while(|r| r.seq <= limit),
    )?)
}

pub(crate) fn check_sequence(records: &[EventRecord]) -> Result<(), PersistenceError> {
    if records.is_empty() {
        return Err(PersistenceError::CorruptLog("log is empty".into()));
    }
    for (i, r) in records.iter().enumerate() {
        let expected = i as u64 + 1;
        if r.seq != expected {
            return Err(PersistenceError::CorruptLog(format!(
                "expected seq {expected}, found {}",
                r.seq
            )));
        }
    }
    Ok(())
}

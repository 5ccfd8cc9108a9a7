//! Append-only JSONL audit log of flagged completions.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Serialize;

#[derive(Debug, Serialize)]
struct FlagRecord<'a> {
    timestamp: String,
    reason: &'a str,
    raw_text: &'a str,
    attempt: u32,
}

/// Single-writer flag log. Every flagged completion is appended as one JSON
/// line `{timestamp, reason, raw_text, attempt}` for later audit.
#[derive(Debug)]
pub struct FlagLog {
    path: PathBuf,
    lock: Mutex<()>,
}

impl FlagLog {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        FlagLog {
            path: path.into(),
            lock: Mutex::new(()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, reason: &str, raw_text: &str, attempt: u32) -> std::io::Result<()> {
        let record = FlagRecord {
            timestamp: chrono::Utc::now().to_rfc3339(),
            reason,
            raw_text,
            attempt,
        };
        let line = serde_json::to_string(&record).expect("flag record serializes");
        let _guard = self.lock.lock().unwrap();
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        writeln!(file, "{line}")
    }
}

//! Append-only JSON-lines journal of submitted label batches.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::corpus::Code;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEvent {
    pub id: usize,
    pub code: Code,
}

/// One submitted batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub seq: u64,
    pub labels: Vec<LabelEvent>,
    /// Milliseconds since the Unix epoch; informational only.
    pub ts: u64,
}

pub fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    /// Opens (creating if needed) and returns the journal with its complete
    /// entries. A torn last line from an interrupted append is cut off.
    pub fn open(path: impl Into<PathBuf>) -> io::Result<(Journal, Vec<Entry>)> {
        let path = path.into();
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e),
        };
        let mut entries = Vec::new();
        let mut good_len = 0usize;
        let mut start = 0usize;
        while start < bytes.len() {
            let Some(nl) = bytes[start..].iter().position(|&b| b == b'\n') else {
                tracing::warn!("dropping incomplete journal line in {}", path.display());
                break;
            };
            let line = &bytes[start..start + nl];
            if !line.iter().all(u8::is_ascii_whitespace) {
                let entry: Entry = serde_json::from_slice(line).map_err(|e| {
                    io::Error::new(
                        io::ErrorKind::InvalidData,
                        format!("{}: entry {}: {e}", path.display(), entries.len() + 1),
                    )
                })?;
                entries.push(entry);
            }
            start += nl + 1;
            good_len = start;
        }
        if good_len < bytes.len() {
            OpenOptions::new().write(true).open(&path)?.set_len(good_len as u64)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok((Journal { path, file }, entries))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes one entry and syncs it to disk before returning.
    pub fn append(&mut self, entry: &Entry) -> io::Result<()> {
        let mut line = serde_json::to_vec(entry).map_err(io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()
    }

    pub fn truncate(&mut self) -> io::Result<()> {
        self.file.set_len(0)?;
        self.file.sync_all()
    }
}

//! Simulation results as JSON lines, one result per line. Appending is
//! resumable: a run is identified by (corpus, treatment, seed).

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use super::SimulationResult;
use crate::active::TreatmentCode;

pub type RunKey = (String, TreatmentCode, u64);

pub fn key_of(r: &SimulationResult) -> RunKey {
    (r.corpus.clone(), r.treatment, r.seed)
}

/// Reads every complete line. A torn final line (no trailing newline and not
/// valid JSON) is skipped with a warning; any other bad line is an error.
pub fn read(path: &Path) -> io::Result<Vec<SimulationResult>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let lines: Vec<String> = BufReader::new(file).lines().collect::<io::Result<_>>()?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(e) if i + 1 == lines.len() => {
                tracing::warn!("ignoring incomplete last line of {}: {e}", path.display());
            }
            Err(e) => {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), i + 1),
                ))
            }
        }
    }
    Ok(out)
}

pub fn completed(path: &Path) -> io::Result<HashSet<RunKey>> {
    Ok(read(path)?.iter().map(key_of).collect())
}

/// Appends results in the order given and flushes to disk.
pub fn append(path: &Path, results: &[SimulationResult]) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    // drop a torn tail left by an interrupted write
    let existing = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e),
    };
    if existing.last().is_some_and(|&b| b != b'\n') {
        let keep = existing.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        OpenOptions::new().write(true).open(path)?.set_len(keep as u64)?;
    }
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut buf = Vec::new();
    for r in results {
        serde_json::to_writer(&mut buf, r).map_err(io::Error::other)?;
        buf.push(b'\n');
    }
    file.write_all(&buf)?;
    file.sync_all()
}

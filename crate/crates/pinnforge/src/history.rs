//! Solved-PDE history cache: a JSONL file of [`HistoryRecord`], appended
//! under an exclusive advisory lock.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::Path;

use pinnforge_core::pinn::HistoryRecord;

/// Reads the cache; a missing file is an empty history.
pub fn load(path: &Path) -> io::Result<Vec<HistoryRecord>> {
    let mut file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    file.lock_shared()?;
    let mut text = String::new();
    file.read_to_string(&mut text)?;
    file.unlock()?;
    parse(&text)
}

pub fn parse(text: &str) -> io::Result<Vec<HistoryRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("history line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn append(path: &Path, record: &HistoryRecord) -> io::Result<()> {
    if !record.score.is_finite() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "history score must be finite"));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut file = OpenOptions::new().create(true).append(true).read(true).open(path)?;
    file.lock()?;
    let mut line = serde_json::to_string(record).map_err(io::Error::other)?;
    line.push('\n');
    // A previous writer may have died mid-line; start on a fresh line.
    let len = file.seek(SeekFrom::End(0))?;
    if len > 0 {
        let mut last = [0u8; 1];
        let mut reader = File::open(path)?;
        reader.seek(SeekFrom::Start(len - 1))?;
        reader.read_exact(&mut last)?;
        if last[0] != b'\n' {
            line.insert(0, '\n');
        }
    }
    file.write_all(line.as_bytes())?;
    file.flush()?;
    file.unlock()
}

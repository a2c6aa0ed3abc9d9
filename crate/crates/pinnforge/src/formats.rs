//! On-disk formats: loss traces as JSONL and pretty JSON documents.

use std::fs;
use std::path::Path;

use pinnforge_core::trainer::{LossTrace, TraceRecord};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// One `{"t", "loss", "grad_norm"}` object per line.
pub fn trace_to_jsonl(trace: &LossTrace) -> String {
    let mut out = String::new();
    for r in &trace.records {
        out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
        out.push('\n');
    }
    out
}

/// Parses and validates a trace: steps run 1, 2, 3, ... and every value is
/// finite and nonnegative. Blank lines are ignored.
pub fn trace_from_jsonl(text: &str) -> Result<LossTrace, FormatError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fail = |message: String| FormatError::Line { line: i + 1, message };
        let r: TraceRecord = serde_json::from_str(line).map_err(|e| fail(e.to_string()))?;
        for (name, v) in [("loss", r.loss), ("grad_norm", r.grad_norm)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(fail(format!("{name} {v} is not a finite nonnegative value")));
            }
        }
        if r.t != records.len() + 1 {
            return Err(fail(format!("step {} out of sequence, expected {}", r.t, records.len() + 1)));
        }
        records.push(r);
    }
    Ok(LossTrace {
        records,
        ..LossTrace::default()
    })
}

pub fn read_text(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), FormatError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| FormatError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json {
        path: path.display().to_string(),
        source,
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    write_text(path, &to_pretty(value))
}

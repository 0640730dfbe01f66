//! Append-only JSONL streams and atomic snapshots.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: corrupt record: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("cannot serialize record: {0}")]
    Serialize(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Appends one record as a single line.
pub fn append_jsonl<T: Serialize>(path: &Path, record: &T) -> Result<(), StoreError> {
    let mut line = serde_json::to_string(record)?;
    line.push('\n');
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    f.write_all(line.as_bytes()).map_err(io_err(path))?;
    f.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct JsonlRead<T> {
    pub records: Vec<T>,
    /// A partial final line was found and skipped.
    pub truncated: bool,
}

/// Reads every record. A missing file reads as empty. An unparsable final
/// line without its newline is taken as an interrupted write and skipped
/// with a warning; anything else unparsable is corruption.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<JsonlRead<T>, StoreError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Ok(JsonlRead {
                records: Vec::new(),
                truncated: false,
            })
        }
        Err(e) => return Err(io_err(path)(e)),
    };
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut records = Vec::with_capacity(lines.len());
    let mut truncated = false;
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => records.push(r),
            Err(_) if i + 1 == lines.len() && !complete => {
                log::warn!("{}: ignoring truncated final line {}", path.display(), i + 1);
                truncated = true;
            }
            Err(e) => {
                return Err(StoreError::Corrupt {
                    path: path.to_owned(),
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(JsonlRead { records, truncated })
}

/// Write-then-rename so readers never see a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Replaces a stream with exactly `records`.
pub fn rewrite_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), StoreError> {
    let mut buf = String::new();
    for r in records {
        buf.push_str(&serde_json::to_string(r)?);
        buf.push('\n');
    }
    write_atomic(path, buf.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct Rec {
        id: u64,
        text: String,
    }

    fn rec(id: u64) -> Rec {
        Rec {
            id,
            text: format!("line\n{id}"),
        }
    }

    #[test]
    fn roundtrip_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        for i in 0..3 {
            append_jsonl(&p, &rec(i)).unwrap();
        }
        let r: JsonlRead<Rec> = read_jsonl(&p).unwrap();
        assert_eq!(r.records, vec![rec(0), rec(1), rec(2)]);
        assert!(!r.truncated);
    }

    #[test]
    fn truncated_tail_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        for i in 0..3 {
            append_jsonl(&p, &rec(i)).unwrap();
        }
        let text = fs::read_to_string(&p).unwrap();
        fs::write(&p, &text[..text.len() - 6]).unwrap();
        let r: JsonlRead<Rec> = read_jsonl(&p).unwrap();
        assert_eq!(r.records.len(), 2);
        assert!(r.truncated);
    }

    #[test]
    fn corrupt_middle_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        fs::write(&p, "{\"id\":0,\"text\":\"a\"}\n{oops\n{\"id\":2,\"text\":\"c\"}\n").unwrap();
        let err = read_jsonl::<Rec>(&p).unwrap_err();
        assert!(matches!(err, StoreError::Corrupt { line: 2, .. }));
    }

    #[test]
    fn missing_is_empty_and_rewrite_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        assert!(read_jsonl::<Rec>(&p).unwrap().records.is_empty());
        append_jsonl(&p, &rec(9)).unwrap();
        rewrite_jsonl(&p, &[rec(1)]).unwrap();
        assert_eq!(read_jsonl::<Rec>(&p).unwrap().records, vec![rec(1)]);
    }
}

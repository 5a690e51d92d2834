//! Append-only JSON-lines event log.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use mrbanks_core::session::EventRecord;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("event log {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("event log line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
}

/// Events read from a log. `torn_tail` is set when the last line was cut
/// mid-write and skipped.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadedLog {
    pub events: Vec<EventRecord>,
    pub torn_tail: bool,
    /// Byte length of the well-formed prefix.
    pub valid_len: u64,
    /// The last kept line had no terminating newline.
    pub missing_newline: bool,
}

/// Parses a JSON-lines stream. An unterminated final line that fails to
/// parse is treated as a torn write; any other bad line is an error.
pub fn read_events(source: impl Read) -> Result<LoadedLog, StoreError> {
    let mut reader = BufReader::new(source);
    let mut out = LoadedLog::default();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(|e| StoreError::Corrupt {
            line: line_no + 1,
            reason: e.to_string(),
        })?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let complete = buf.ends_with(b"\n");
        let text = String::from_utf8_lossy(&buf);
        let text = text.trim();
        if text.is_empty() {
            out.valid_len += n as u64;
            continue;
        }
        match serde_json::from_str::<EventRecord>(text) {
            Ok(ev) => {
                out.events.push(ev);
                out.valid_len += n as u64;
                out.missing_newline = !complete;
            }
            Err(_) if !complete => {
                out.torn_tail = true;
                break;
            }
            Err(e) => {
                return Err(StoreError::Corrupt {
                    line: line_no,
                    reason: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

pub fn read_log(path: &Path) -> Result<LoadedLog, StoreError> {
    let file = File::open(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_events(file)
}

/// Writable handle on the log. Appends are whole lines, flushed and synced
/// before returning.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl EventLog {
    /// Opens or creates the log and returns its current contents. A torn
    /// final line is cut off so later appends start on a clean line.
    pub fn open(path: &Path) -> Result<(EventLog, LoadedLog), StoreError> {
        let io = |source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        };
        let loaded = if path.exists() { read_log(path)? } else { LoadedLog::default() };
        let file = OpenOptions::new().create(true).read(true).append(true).open(path).map_err(io)?;
        let mut file = file;
        if loaded.torn_tail {
            file.set_len(loaded.valid_len).map_err(io)?;
        }
        if loaded.missing_newline {
            file.write_all(b"\n").map_err(io)?;
        }
        Ok((
            EventLog {
                path: path.to_path_buf(),
                file: Mutex::new(file),
            },
            loaded,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, events: &[EventRecord]) -> Result<(), StoreError> {
        if events.is_empty() {
            return Ok(());
        }
        let mut text = String::new();
        for ev in events {
            text.push_str(&ev.to_json_line());
            text.push('\n');
        }
        let io = |source| StoreError::Io {
            path: self.path.clone(),
            source,
        };
        let mut file = self.file.lock().unwrap_or_else(|p| p.into_inner());
        file.write_all(text.as_bytes()).map_err(io)?;
        file.flush().map_err(io)?;
        file.sync_data().map_err(io)
    }

    pub fn read(&self) -> Result<LoadedLog, StoreError> {
        let _guard = self.file.lock().unwrap_or_else(|p| p.into_inner());
        read_log(&self.path)
    }
}

//! Append-only JSON-lines journal.
//!
//! The first line is a [`JournalHeader`]; each following line is one
//! [`Judgment`]. Every record is written with a single `write_all`, then
//! flushed and synced before the caller is told it succeeded. A record
//! without its trailing newline can only come from an interrupted write and
//! is discarded on replay; any other unreadable line is fatal.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{canonical_json, SessionError};

pub const JOURNAL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub trial_index: u32,
    pub stimulus_id: String,
    pub score: u32,
    pub view_time_ms: u64,
    pub wall_clock: DateTime<Utc>,
    pub participant_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalHeader {
    pub format_version: u32,
    pub config_digest: String,
    pub participant_name: String,
    pub seed: u64,
    pub trial_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum JournalRecord {
    Header(JournalHeader),
    Judgment(Judgment),
}

impl JournalRecord {
    pub fn to_line(&self) -> Vec<u8> {
        let mut line = canonical_json(self).into_bytes();
        line.push(b'\n');
        line
    }
}

/// Durable destination for journal lines.
pub trait JournalSink: Send {
    fn append(&mut self, line: &[u8]) -> io::Result<()>;
}

pub struct FileSink {
    file: File,
}

impl FileSink {
    pub fn open_append(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(FileSink { file })
    }
}

impl JournalSink for FileSink {
    fn append(&mut self, line: &[u8]) -> io::Result<()> {
        self.file.write_all(line)?;
        self.file.flush()?;
        self.file.sync_data()
    }
}

pub struct Journal {
    path: PathBuf,
    sink: Box<dyn JournalSink>,
}

impl std::fmt::Debug for Journal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Journal").field("path", &self.path).finish()
    }
}

impl Journal {
    pub fn new(path: PathBuf, sink: Box<dyn JournalSink>) -> Self {
        Journal { path, sink }
    }

    pub fn open(path: &Path) -> Result<Self, SessionError> {
        let sink = FileSink::open_append(path).map_err(|e| SessionError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Ok(Journal::new(path.to_path_buf(), Box::new(sink)))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &JournalRecord) -> Result<(), SessionError> {
        self.sink
            .append(&record.to_line())
            .map_err(SessionError::JournalWriteFailure)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct JournalContents {
    pub header: Option<JournalHeader>,
    pub judgments: Vec<Judgment>,
    /// Byte length of the intact prefix.
    pub valid_len: u64,
    pub discarded_tail: bool,
}

pub fn parse_journal(bytes: &[u8]) -> Result<JournalContents, SessionError> {
    let mut out = JournalContents::default();
    let mut offset = 0usize;
    let mut line_no = 0usize;
    while offset < bytes.len() {
        line_no += 1;
        let Some(rel) = bytes[offset..].iter().position(|&b| b == b'\n') else {
            tracing::warn!(
                "discarding truncated trailing journal record at line {line_no} ({} bytes)",
                bytes.len() - offset
            );
            out.discarded_tail = true;
            break;
        };
        let raw = &bytes[offset..offset + rel];
        offset += rel + 1;
        if raw.iter().all(u8::is_ascii_whitespace) {
            out.valid_len = offset as u64;
            continue;
        }
        let record: JournalRecord = serde_json::from_slice(raw).map_err(|e| SessionError::CorruptJournal {
            line: line_no,
            message: e.to_string(),
        })?;
        match record {
            JournalRecord::Header(h) => {
                if out.header.is_some() || !out.judgments.is_empty() {
                    return Err(SessionError::CorruptJournal {
                        line: line_no,
                        message: "header record after the first line".into(),
                    });
                }
                if h.format_version != JOURNAL_FORMAT_VERSION {
                    return Err(SessionError::CorruptJournal {
                        line: line_no,
                        message: format!("unsupported journal format {}", h.format_version),
                    });
                }
                out.header = Some(h);
            }
            JournalRecord::Judgment(j) => {
                if out.header.is_none() {
                    return Err(SessionError::CorruptJournal {
                        line: line_no,
                        message: "judgment before header".into(),
                    });
                }
                out.judgments.push(j);
            }
        }
        out.valid_len = offset as u64;
    }
    Ok(out)
}

pub fn read_journal(path: &Path) -> Result<JournalContents, SessionError> {
    let bytes = std::fs::read(path).map_err(|e| SessionError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_journal(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> JournalRecord {
        JournalRecord::Header(JournalHeader {
            format_version: 1,
            config_digest: "abc".into(),
            participant_name: "p".into(),
            seed: 3,
            trial_count: 2,
        })
    }

    fn judgment(i: u32) -> JournalRecord {
        JournalRecord::Judgment(Judgment {
            trial_index: i,
            stimulus_id: format!("s{i}"),
            score: 3,
            view_time_ms: 1000,
            wall_clock: DateTime::from_timestamp(1_700_000_000 + i as i64, 0).unwrap(),
            participant_name: "p".into(),
        })
    }

    #[test]
    fn lines_are_canonical() {
        let line = String::from_utf8(judgment(0).to_line()).unwrap();
        assert_eq!(
            line,
            "{\"participant_name\":\"p\",\"record\":\"judgment\",\"score\":3,\"stimulus_id\":\"s0\",\"trial_index\":0,\"view_time_ms\":1000,\"wall_clock\":\"2023-11-14T22:13:20Z\"}\n"
        );
    }

    #[test]
    fn truncated_tail_is_dropped() {
        let mut bytes = header().to_line();
        bytes.extend(judgment(0).to_line());
        let intact = bytes.len();
        let partial = judgment(1).to_line();
        bytes.extend(&partial[..partial.len() / 2]);
        let c = parse_journal(&bytes).unwrap();
        assert_eq!(c.judgments.len(), 1);
        assert!(c.discarded_tail);
        assert_eq!(c.valid_len as usize, intact);
    }

    #[test]
    fn earlier_corruption_is_fatal() {
        let mut bytes = header().to_line();
        bytes.extend(b"{not json}\n");
        bytes.extend(judgment(0).to_line());
        assert!(matches!(
            parse_journal(&bytes),
            Err(SessionError::CorruptJournal { line: 2, .. })
        ));
        assert!(matches!(
            parse_journal(&judgment(0).to_line()),
            Err(SessionError::CorruptJournal { line: 1, .. })
        ));
    }

    #[test]
    fn empty_journal() {
        assert_eq!(parse_journal(b"").unwrap(), JournalContents::default());
    }
}

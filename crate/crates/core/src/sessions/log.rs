//! Append-only, newline-delimited JSON event log.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::StoreError;
use crate::scoring::AggregateResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event_type", content = "payload", rename_all = "snake_case")]
pub enum Event {
    UserCreated {
        user_id: String,
        display_name: String,
    },
    SessionCreated {
        session_id: String,
        user_id: String,
        framework_id: String,
    },
    AnswerSubmitted {
        session_id: String,
        leaf_id: String,
        grade: i64,
    },
    SessionFinalized {
        session_id: String,
        final_result: AggregateResult,
    },
}

impl Event {
    pub fn event_type(&self) -> &'static str {
        match self {
            Self::UserCreated { .. } => "user_created",
            Self::SessionCreated { .. } => "session_created",
            Self::AnswerSubmitted { .. } => "answer_submitted",
            Self::SessionFinalized { .. } => "session_finalized",
        }
    }
}

/// One log line: `{"event_type": ..., "timestamp": ..., "payload": {...}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub timestamp: DateTime<Utc>,
    pub event: Event,
}

#[derive(Serialize, Deserialize)]
struct Line {
    event_type: String,
    timestamp: DateTime<Utc>,
    payload: serde_json::Value,
}

impl LogRecord {
    pub fn to_line(&self) -> String {
        // Adjacently tagged enum gives {"event_type", "payload"}; the
        // timestamp is spliced in between to keep the documented field order.
        let tagged = serde_json::to_value(&self.event).expect("events serialize");
        let payload = tagged.get("payload").cloned().unwrap_or_default();
        let line = Line {
            event_type: self.event.event_type().to_owned(),
            timestamp: self.timestamp,
            payload,
        };
        serde_json::to_string(&line).expect("events serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        let raw: Line = serde_json::from_str(line)?;
        let event = serde_json::from_value(serde_json::json!({
            "event_type": raw.event_type,
            "payload": raw.payload,
        }))?;
        Ok(Self {
            timestamp: raw.timestamp,
            event,
        })
    }
}

/// A record read back from disk together with where it started.
#[derive(Debug, Clone)]
pub struct ReadRecord {
    pub offset: u64,
    pub line_no: usize,
    pub record: LogRecord,
}

pub struct EventLog {
    path: PathBuf,
    file: File,
    len: u64,
}

impl EventLog {
    /// Open (creating if needed) and read every record. A final line with no
    /// trailing newline that does not parse is a torn append and is cut off;
    /// any other bad line is corruption.
    pub fn open(path: &Path) -> Result<(Self, Vec<ReadRecord>), StoreError> {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)?;
        let records = read_records(&mut file)?;
        let good_len = match records.torn_tail_at {
            Some(offset) => {
                tracing::warn!(offset, "dropping torn final record in {}", path.display());
                file.set_len(offset)?;
                file.sync_data()?;
                offset
            }
            None => file.metadata()?.len(),
        };
        Ok((
            Self {
                path: path.to_owned(),
                file,
                len: good_len,
            },
            records.records,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Bytes of valid log on disk.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Append one record and flush it to stable storage.
    pub fn append(&mut self, record: &LogRecord) -> Result<(), StoreError> {
        let mut line = record.to_line();
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        self.len += line.len() as u64;
        Ok(())
    }
}

struct Records {
    records: Vec<ReadRecord>,
    torn_tail_at: Option<u64>,
}

fn read_records(file: &mut File) -> Result<Records, StoreError> {
    file.seek(SeekFrom::Start(0))?;
    let mut reader = BufReader::new(Read::by_ref(file));
    let mut records = Vec::new();
    let mut offset = 0u64;
    let mut line_no = 0usize;
    let mut buf = String::new();
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let complete = buf.ends_with('\n');
        let text = buf.trim_end_matches(['\n', '\r']);
        if text.trim().is_empty() && complete {
            offset += n as u64;
            continue;
        }
        match LogRecord::from_line(text) {
            Ok(record) if complete => records.push(ReadRecord {
                offset,
                line_no,
                record,
            }),
            // A parseable but unterminated line is still a partial append.
            Ok(_) => {
                return Ok(Records {
                    records,
                    torn_tail_at: Some(offset),
                })
            }
            Err(_) if !complete => {
                return Ok(Records {
                    records,
                    torn_tail_at: Some(offset),
                })
            }
            Err(e) => {
                return Err(StoreError::Corrupt {
                    line: line_no,
                    last_good_offset: offset,
                    message: e.to_string(),
                })
            }
        }
        offset += n as u64;
    }
    Ok(Records {
        records,
        torn_tail_at: None,
    })
}

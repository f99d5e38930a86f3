use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::Event;

#[derive(Debug, Error)]
pub enum JournalError {
    #[error("event tick {got} is before the last recorded tick {last}")]
    OutOfOrderTick { last: u64, got: u64 },
    #[error("journal storage failure: {0}")]
    StorageFailure(#[from] std::io::Error),
    #[error("journal line {line} is corrupt: {source}")]
    Corrupt {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// How hard `record` pushes each line to disk before returning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Durability {
    /// Flush to the OS.
    Flush,
    /// Flush and `fsync` the data.
    #[default]
    Sync,
}

/// File name for a session's journal.
pub fn journal_file_name(session_id: &str) -> String {
    format!("session_{session_id}.jsonl")
}

struct Sink {
    file: File,
    path: PathBuf,
    durability: Durability,
}

/// Append-only event log with non-decreasing ticks, optionally mirrored to
/// a JSONL file.
#[derive(Default)]
pub struct Journal {
    events: Vec<Event>,
    sink: Option<Sink>,
}

impl std::fmt::Debug for Journal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Journal")
            .field("len", &self.events.len())
            .field("path", &self.sink.as_ref().map(|s| &s.path))
            .finish()
    }
}

impl Journal {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Starts a new journal file, truncating any previous content.
    pub fn create(path: impl AsRef<Path>, durability: Durability) -> Result<Self, JournalError> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path)?;
        Ok(Self {
            events: Vec::new(),
            sink: Some(Sink {
                file,
                path,
                durability,
            }),
        })
    }

    /// Reopens an existing journal, replaying its events. A final line
    /// without a terminating newline is a torn write and is dropped.
    pub fn open(path: impl AsRef<Path>, durability: Durability) -> Result<Self, JournalError> {
        let path = path.as_ref().to_path_buf();
        let (events, valid_len) = read_events(&path)?;
        let file = OpenOptions::new().write(true).open(&path)?;
        file.set_len(valid_len)?;
        let mut file = file;
        std::io::Seek::seek(&mut file, std::io::SeekFrom::End(0))?;
        let mut journal = Self {
            events: Vec::with_capacity(events.len()),
            sink: Some(Sink {
                file,
                path,
                durability,
            }),
        };
        for e in events {
            journal.check_order(&e)?;
            journal.events.push(e);
        }
        Ok(journal)
    }

    /// Reads a journal file without opening it for append.
    pub fn load(path: impl AsRef<Path>) -> Result<Vec<Event>, JournalError> {
        read_events(path.as_ref()).map(|(events, _)| events)
    }

    fn check_order(&self, event: &Event) -> Result<(), JournalError> {
        match self.last_tick() {
            Some(last) if event.tick < last => Err(JournalError::OutOfOrderTick {
                last,
                got: event.tick,
            }),
            _ => Ok(()),
        }
    }

    /// Appends an event; when file-backed, the line is written before this
    /// returns.
    pub fn record(&mut self, event: Event) -> Result<(), JournalError> {
        self.check_order(&event)?;
        if let Some(sink) = &mut self.sink {
            let mut line = event.to_line();
            line.push('\n');
            sink.file.write_all(line.as_bytes())?;
            sink.file.flush()?;
            if sink.durability == Durability::Sync {
                sink.file.sync_data()?;
            }
        }
        self.events.push(event);
        Ok(())
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last_tick(&self) -> Option<u64> {
        self.events.last().map(|e| e.tick)
    }

    pub fn path(&self) -> Option<&Path> {
        self.sink.as_ref().map(|s| s.path.as_path())
    }
}

fn read_events(path: &Path) -> Result<(Vec<Event>, u64), JournalError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut events = Vec::new();
    let mut valid = 0u64;
    let mut buf = String::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        if !buf.ends_with('\n') {
            break;
        }
        let event = serde_json::from_str(buf.trim_end()).map_err(|source| JournalError::Corrupt {
            line: line_no,
            source,
        })?;
        events.push(event);
        valid += n as u64;
    }
    Ok((events, valid))
}

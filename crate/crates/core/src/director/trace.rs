use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::session::Session;
use super::world::{Input, Rules};
use super::DirectorConfig;
use crate::agent_brain::{LyingCars, PromptBundle};
use crate::domain::ScenarioConfig;
use crate::memory::{Journal, JournalError};

pub const TRACE_VERSION: u32 = 1;

/// Everything a replay needs besides the inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub version: u32,
    pub session_id: String,
    pub nickname: String,
    pub seed: u64,
    pub lying_cars: LyingCars,
    pub anchor_ms: u64,
    pub scenario: ScenarioConfig,
    pub director: DirectorConfig,
    pub prompts: PromptBundle,
}

impl TraceHeader {
    pub fn rules(&self) -> Rules {
        Rules::new(self.scenario.clone(), self.director.clone(), self.lying_cars, self.seed)
    }

    pub fn session(&self, journal: Journal) -> Session {
        Session::new(self.rules(), self.prompts.clone(), journal, &self.nickname, self.anchor_ms)
    }
}

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceLine {
    Header(Box<TraceHeader>),
    Tick { tick: u64, inputs: Vec<Input> },
    End { end_tick: u64 },
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("trace has no header")]
    MissingHeader,
    #[error("trace version {0} is not supported")]
    Version(u32),
    #[error("trace has no end marker")]
    MissingEnd,
    #[error("trace line {0}: tick out of order")]
    OutOfOrder(usize),
    #[error(transparent)]
    Journal(#[from] JournalError),
}

/// Streams a trace to disk as the session runs. Only ticks with inputs
/// are written.
pub struct TraceWriter {
    out: BufWriter<File>,
}

impl TraceWriter {
    pub fn create(path: impl AsRef<Path>, header: &TraceHeader) -> Result<Self, TraceError> {
        let mut w = Self {
            out: BufWriter::new(File::create(path)?),
        };
        w.write(&TraceLine::Header(Box::new(header.clone())))?;
        Ok(w)
    }

    pub fn tick(&mut self, tick: u64, inputs: &[Input]) -> Result<(), TraceError> {
        if inputs.is_empty() {
            return Ok(());
        }
        self.write(&TraceLine::Tick {
            tick,
            inputs: inputs.to_vec(),
        })
    }

    /// Writes the end marker; `end_tick` is the number of ticks stepped.
    pub fn finish(mut self, end_tick: u64) -> Result<(), TraceError> {
        self.write(&TraceLine::End { end_tick })?;
        self.out.flush()?;
        Ok(())
    }

    fn write(&mut self, line: &TraceLine) -> Result<(), TraceError> {
        serde_json::to_writer(&mut self.out, line).map_err(|e| TraceError::Parse { line: 0, source: e })?;
        self.out.write_all(b"\n")?;
        Ok(())
    }
}

/// A fully loaded trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub ticks: BTreeMap<u64, Vec<Input>>,
    pub end_tick: u64,
}

impl Trace {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        Self::read(BufReader::new(File::open(path)?))
    }

    pub fn read(reader: impl BufRead) -> Result<Self, TraceError> {
        let mut header = None;
        let mut ticks = BTreeMap::new();
        let mut end_tick = None;
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: TraceLine =
                serde_json::from_str(&line).map_err(|source| TraceError::Parse { line: n + 1, source })?;
            match parsed {
                TraceLine::Header(h) => {
                    if h.version != TRACE_VERSION {
                        return Err(TraceError::Version(h.version));
                    }
                    header = Some(*h);
                }
                TraceLine::Tick { tick, inputs } => {
                    if ticks.last_key_value().is_some_and(|(&last, _)| tick <= last) {
                        return Err(TraceError::OutOfOrder(n + 1));
                    }
                    ticks.insert(tick, inputs);
                }
                TraceLine::End { end_tick: t } => end_tick = Some(t),
            }
        }
        Ok(Self {
            header: header.ok_or(TraceError::MissingHeader)?,
            ticks,
            end_tick: end_tick.ok_or(TraceError::MissingEnd)?,
        })
    }
}

/// Re-runs a recorded session into `journal`. Decision rounds take their
/// replies from the trace, so no provider is involved.
pub fn replay(trace: &Trace, journal: Journal) -> Result<Session, TraceError> {
    let mut session = trace.header.session(journal);
    for tick in 0..trace.end_tick {
        let inputs = trace.ticks.get(&tick).map(Vec::as_slice).unwrap_or(&[]);
        session.tick(inputs)?;
    }
    Ok(session)
}

//! Append-only session journal: the language model's scene memory and the
//! source for performance statistics.

mod context;
mod event;
mod journal;
mod stats;

pub use context::{snapshot_context, ContextText, DEFAULT_MAX_EVENTS, MAX_LINE_CHARS};
pub use event::{
    AnomalyPayload, CarLeavingPayload, CollisionPayload, CueKind, Event, EventKind, Payload,
    PhasePayload, PositionPayload, Provenance, ScaffoldPayload, SpawnPayload, StarPayload,
    UtterancePayload,
};
pub use journal::{journal_file_name, Durability, Journal, JournalError};
pub use stats::{performance, trials, ErrorStats, DEFAULT_WINDOW};

//! Session host for the crossing trainer: the live tick loop, the client
//! wire protocol, speech synthesis adapters and offline analysis.

pub mod analyze;
pub mod live;
pub mod net;
pub mod tts;
pub mod wire;

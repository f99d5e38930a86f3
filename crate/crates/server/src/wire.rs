//! Messages between the server and UI clients, and their framing: a 4-byte
//! big-endian length followed by one UTF-8 JSON envelope.

use std::io::{self, Read, Write};

use roadsense_core::analytics::TrialPoint;
use roadsense_core::director::{Control, DifficultyState, Hud, PedestrianView, SceneSnapshot, VehicleView};
use roadsense_core::domain::{Point, SessionPhase};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest accepted frame body.
pub const MAX_FRAME_BYTES: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Participant,
    Facilitator,
}

/// Reference to synthesized audio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioRef {
    /// Null provider output: nothing to play.
    Silent,
    File { path: String },
}

/// One scene entity. A delta lists all of them; anything missing is gone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Entity {
    Participant { x: f64, y: f64, area: String },
    Vehicle(VehicleView),
    Pedestrian(PedestrianView),
    Star { x: f64, y: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub outcomes: Vec<TrialPoint>,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WireMessage {
    ClientHello {
        nickname: String,
        role: Role,
    },
    PositionUpdate {
        raw: [f64; 2],
        client_tick: u64,
    },
    StateDelta {
        tick: u64,
        /// Sent on join so a reconnecting client can rebuild the scene.
        full: bool,
        phase: SessionPhase,
        paused: bool,
        difficulty: DifficultyState,
        entities: Vec<Entity>,
        hud: Hud,
    },
    AudioCue {
        utterance_id: String,
        speaker: String,
        text: String,
        audio_ref: Option<AudioRef>,
        duration_ms: u64,
    },
    Control {
        control: Control,
    },
    SessionSummary(SessionSummary),
    /// The server refused a client message.
    Reject {
        reason: String,
    },
}

impl WireMessage {
    pub fn delta(tick: u64, scene: &SceneSnapshot, full: bool) -> Self {
        let p = scene.participant;
        let mut entities = vec![Entity::Participant {
            x: p.x,
            y: p.y,
            area: scene.participant_area.clone(),
        }];
        entities.extend(scene.vehicles.iter().cloned().map(Entity::Vehicle));
        entities.extend(scene.pedestrians.iter().cloned().map(Entity::Pedestrian));
        if let Some(Point { x, y }) = scene.star {
            entities.push(Entity::Star { x, y });
        }
        WireMessage::StateDelta {
            tick,
            full,
            phase: scene.phase,
            paused: scene.paused,
            difficulty: scene.difficulty,
            entities,
            hud: scene.hud,
        }
    }
}

/// A message with its per-connection sequence number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub seq: u64,
    pub message: WireMessage,
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("connection closed mid-frame after {got} of {want} bytes")]
    Truncated { got: usize, want: usize },
    #[error("frame of {0} bytes exceeds the {MAX_FRAME_BYTES} byte limit")]
    Oversize(usize),
    #[error("frame is not valid UTF-8 at byte {0}")]
    InvalidUtf8(usize),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("sequence number {got} does not follow {last}")]
    SequenceViolation { last: u64, got: u64 },
    #[error("transport: {0}")]
    Io(#[from] io::Error),
}

pub fn encode_envelope(env: &Envelope) -> String {
    serde_json::to_string(env).expect("wire messages always serialize")
}

pub fn decode_envelope(text: &str) -> Result<Envelope, WireError> {
    serde_json::from_str(text).map_err(|e| WireError::Malformed(e.to_string()))
}

/// Length prefix plus body.
pub fn encode_frame(env: &Envelope) -> Vec<u8> {
    let body = encode_envelope(env);
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(body.as_bytes());
    out
}

pub fn write_frame(w: &mut impl Write, env: &Envelope) -> Result<(), WireError> {
    w.write_all(&encode_frame(env))?;
    w.flush()?;
    Ok(())
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> Result<usize, io::Error> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(got)
}

/// Reads one frame. `Ok(None)` is a clean close between frames.
pub fn read_frame(r: &mut impl Read) -> Result<Option<Envelope>, WireError> {
    let mut len = [0u8; 4];
    match read_full(r, &mut len)? {
        0 => return Ok(None),
        4 => {}
        got => return Err(WireError::Truncated { got, want: 4 }),
    }
    let want = u32::from_be_bytes(len) as usize;
    if want > MAX_FRAME_BYTES {
        return Err(WireError::Oversize(want));
    }
    let mut body = vec![0u8; want];
    let got = read_full(r, &mut body)?;
    if got < want {
        return Err(WireError::Truncated { got, want });
    }
    let text = String::from_utf8(body).map_err(|e| WireError::InvalidUtf8(e.utf8_error().valid_up_to()))?;
    decode_envelope(&text).map(Some)
}

/// Incoming sequence numbers must strictly increase.
#[derive(Debug, Default, Clone)]
pub struct SequenceCheck {
    last: Option<u64>,
}

impl SequenceCheck {
    pub fn accept(&mut self, seq: u64) -> Result<(), WireError> {
        match self.last {
            Some(last) if seq <= last => Err(WireError::SequenceViolation { last, got: seq }),
            _ => {
                self.last = Some(seq);
                Ok(())
            }
        }
    }
}

/// Outgoing sequence numbers, starting at 1.
#[derive(Debug, Default, Clone)]
pub struct SequenceCounter {
    next: u64,
}

impl SequenceCounter {
    pub fn wrap(&mut self, message: WireMessage) -> Envelope {
        self.next += 1;
        Envelope {
            seq: self.next,
            message,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hello(seq: u64) -> Envelope {
        Envelope {
            seq,
            message: WireMessage::ClientHello {
                nickname: "Mo".into(),
                role: Role::Participant,
            },
        }
    }

    #[test]
    fn envelope_shape() {
        assert_eq!(
            encode_envelope(&hello(1)),
            r#"{"seq":1,"message":{"ClientHello":{"nickname":"Mo","role":"participant"}}}"#
        );
    }

    #[test]
    fn frame_round_trip() {
        let frame = encode_frame(&hello(3));
        let back = read_frame(&mut frame.as_slice()).unwrap().unwrap();
        assert_eq!(back, hello(3));
        assert!(read_frame(&mut [].as_slice()).unwrap().is_none());
    }

    #[test]
    fn rejects_bad_frames() {
        let frame = encode_frame(&hello(1));
        assert!(matches!(
            read_frame(&mut &frame[..frame.len() - 2]),
            Err(WireError::Truncated { .. })
        ));
        assert!(matches!(read_frame(&mut &frame[..2]), Err(WireError::Truncated { got: 2, want: 4 })));
        let big = ((MAX_FRAME_BYTES + 1) as u32).to_be_bytes();
        assert!(matches!(read_frame(&mut big.as_slice()), Err(WireError::Oversize(_))));
        let mut bad = 3u32.to_be_bytes().to_vec();
        bad.extend_from_slice(&[b'{', 0xff, b'}']);
        assert!(matches!(read_frame(&mut bad.as_slice()), Err(WireError::InvalidUtf8(1))));
        let mut junk = 2u32.to_be_bytes().to_vec();
        junk.extend_from_slice(b"{}");
        assert!(matches!(read_frame(&mut junk.as_slice()), Err(WireError::Malformed(_))));
    }

    #[test]
    fn sequence_must_increase() {
        let mut check = SequenceCheck::default();
        check.accept(1).unwrap();
        check.accept(5).unwrap();
        assert!(matches!(check.accept(5), Err(WireError::SequenceViolation { last: 5, got: 5 })));
        assert!(check.accept(2).is_err());
        check.accept(6).unwrap();
    }
}

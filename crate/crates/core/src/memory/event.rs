use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::adjudicator::{CrossingOutcome, Verdict};
use crate::domain::{DrivingStyle, GestureKind, SessionPhase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PositionUpdate,
    Spawn,
    CarLeaving,
    Collision,
    StarCollected,
    Utterance,
    PhaseChange,
    ScaffoldShown,
    Anomaly,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::PositionUpdate => "position_update",
            EventKind::Spawn => "spawn",
            EventKind::CarLeaving => "car_leaving",
            EventKind::Collision => "collision",
            EventKind::StarCollected => "star_collected",
            EventKind::Utterance => "utterance",
            EventKind::PhaseChange => "phase_change",
            EventKind::ScaffoldShown => "scaffold_shown",
            EventKind::Anomaly => "anomaly",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionPayload {
    pub x: f64,
    pub y: f64,
    pub area: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnPayload {
    pub vehicle_id: u32,
    pub trial_id: u32,
    pub style: DrivingStyle,
    pub lane: u8,
    pub gesture: Option<GestureKind>,
    pub lying: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarLeavingPayload {
    pub vehicle_id: u32,
    pub trial_id: u32,
    pub style: DrivingStyle,
    /// Set unless the trial already ended in a collision.
    pub verdict: Option<Verdict>,
    pub marginal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionPayload {
    pub vehicle_id: u32,
    pub trial_id: u32,
    pub style: DrivingStyle,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarPayload {
    pub index: u32,
    pub collected: u32,
    pub target: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtterancePayload {
    pub speaker: String,
    pub vehicle_id: Option<u32>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhasePayload {
    pub from: SessionPhase,
    pub to: SessionPhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CueKind {
    GestureHint,
    VoiceHint,
    /// Difficulty level change.
    Level,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Auto,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaffoldPayload {
    pub cue: CueKind,
    pub vehicle_id: Option<u32>,
    pub scaffolding: u8,
    pub challenge: u8,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalyPayload {
    pub reason: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    PositionUpdate(PositionPayload),
    Spawn(SpawnPayload),
    CarLeaving(CarLeavingPayload),
    Collision(CollisionPayload),
    StarCollected(StarPayload),
    Utterance(UtterancePayload),
    PhaseChange(PhasePayload),
    ScaffoldShown(ScaffoldPayload),
    Anomaly(AnomalyPayload),
}

impl Payload {
    pub fn kind(&self) -> EventKind {
        match self {
            Payload::PositionUpdate(_) => EventKind::PositionUpdate,
            Payload::Spawn(_) => EventKind::Spawn,
            Payload::CarLeaving(_) => EventKind::CarLeaving,
            Payload::Collision(_) => EventKind::Collision,
            Payload::StarCollected(_) => EventKind::StarCollected,
            Payload::Utterance(_) => EventKind::Utterance,
            Payload::PhaseChange(_) => EventKind::PhaseChange,
            Payload::ScaffoldShown(_) => EventKind::ScaffoldShown,
            Payload::Anomaly(_) => EventKind::Anomaly,
        }
    }
}

/// One journal record.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub tick: u64,
    /// Milliseconds since the Unix epoch on the session clock.
    pub wall_time: u64,
    pub payload: Payload,
}

impl Event {
    pub fn new(tick: u64, wall_time: u64, payload: Payload) -> Self {
        Self {
            tick,
            wall_time,
            payload,
        }
    }

    pub fn kind(&self) -> EventKind {
        self.payload.kind()
    }

    /// The adjudicated trial this event concludes, if any.
    pub fn outcome(&self) -> Option<CrossingOutcome> {
        match &self.payload {
            Payload::Collision(c) => Some(CrossingOutcome::collision(c.trial_id, c.style, self.tick)),
            Payload::CarLeaving(CarLeavingPayload {
                trial_id,
                style,
                verdict: Some(Verdict::Correct),
                marginal,
                ..
            }) => Some(CrossingOutcome::safe(*trial_id, *style, self.tick, *marginal)),
            _ => None,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events always serialize")
    }
}

#[derive(Serialize)]
struct EventOut<'a, P: Serialize> {
    tick: u64,
    wall_time: u64,
    kind: EventKind,
    payload: &'a P,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EventIn {
    tick: u64,
    wall_time: u64,
    kind: EventKind,
    payload: serde_json::Value,
}

impl Serialize for Event {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        fn out<S: Serializer, P: Serialize>(e: &Event, p: &P, s: S) -> Result<S::Ok, S::Error> {
            EventOut {
                tick: e.tick,
                wall_time: e.wall_time,
                kind: e.kind(),
                payload: p,
            }
            .serialize(s)
        }
        match &self.payload {
            Payload::PositionUpdate(p) => out(self, p, s),
            Payload::Spawn(p) => out(self, p, s),
            Payload::CarLeaving(p) => out(self, p, s),
            Payload::Collision(p) => out(self, p, s),
            Payload::StarCollected(p) => out(self, p, s),
            Payload::Utterance(p) => out(self, p, s),
            Payload::PhaseChange(p) => out(self, p, s),
            Payload::ScaffoldShown(p) => out(self, p, s),
            Payload::Anomaly(p) => out(self, p, s),
        }
    }
}

impl<'de> Deserialize<'de> for Event {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = EventIn::deserialize(d)?;
        let v = raw.payload;
        let payload = match raw.kind {
            EventKind::PositionUpdate => serde_json::from_value(v).map(Payload::PositionUpdate),
            EventKind::Spawn => serde_json::from_value(v).map(Payload::Spawn),
            EventKind::CarLeaving => serde_json::from_value(v).map(Payload::CarLeaving),
            EventKind::Collision => serde_json::from_value(v).map(Payload::Collision),
            EventKind::StarCollected => serde_json::from_value(v).map(Payload::StarCollected),
            EventKind::Utterance => serde_json::from_value(v).map(Payload::Utterance),
            EventKind::PhaseChange => serde_json::from_value(v).map(Payload::PhaseChange),
            EventKind::ScaffoldShown => serde_json::from_value(v).map(Payload::ScaffoldShown),
            EventKind::Anomaly => serde_json::from_value(v).map(Payload::Anomaly),
        }
        .map_err(D::Error::custom)?;
        Ok(Event {
            tick: raw.tick,
            wall_time: raw.wall_time,
            payload,
        })
    }
}

impl fmt::Display for Event {
    /// Compact one-line rendering used in language-model context.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} ", self.tick)?;
        match &self.payload {
            Payload::PositionUpdate(p) => {
                write!(f, "participant moved to ({:.1}, {:.1}) in {}", p.x, p.y, p.area)
            }
            Payload::Spawn(p) => {
                write!(f, "{} car #{} entered lane {}", p.style, p.vehicle_id, p.lane)?;
                if let Some(g) = p.gesture {
                    write!(f, " showing {}", g.animation_id())?;
                }
                Ok(())
            }
            Payload::CarLeaving(p) => match p.verdict {
                Some(Verdict::Correct) if p.marginal => {
                    write!(f, "car #{} left; participant uncaught on the road", p.vehicle_id)
                }
                Some(Verdict::Correct) => write!(f, "car #{} left; participant was safe", p.vehicle_id),
                _ => write!(f, "car #{} left", p.vehicle_id),
            },
            Payload::Collision(p) => {
                write!(f, "participant collided with {} car #{}", p.style, p.vehicle_id)
            }
            Payload::StarCollected(p) => {
                write!(f, "star collected ({}/{})", p.collected, p.target)
            }
            Payload::Utterance(p) => write!(f, "{} said \"{}\"", p.speaker, p.text),
            Payload::PhaseChange(p) => write!(f, "phase {:?} -> {:?}", p.from, p.to),
            Payload::ScaffoldShown(p) => write!(
                f,
                "scaffold {:?} ({:?}) support={} challenge={}",
                p.cue, p.provenance, p.scaffolding, p.challenge
            ),
            Payload::Anomaly(p) => write!(f, "anomaly: {}", p.reason),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_has_fixed_field_order() {
        let e = Event::new(
            100,
            1_000,
            Payload::Spawn(SpawnPayload {
                vehicle_id: 3,
                trial_id: 2,
                style: DrivingStyle::Patient,
                lane: 1,
                gesture: Some(GestureKind::CrossInvitation),
                lying: false,
            }),
        );
        let line = e.to_line();
        assert!(line.starts_with(r#"{"tick":100,"wall_time":1000,"kind":"spawn","payload":{"vehicle_id":3"#));
        let back: Event = serde_json::from_str(&line).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.to_line(), line);
    }

    #[test]
    fn rejects_kind_payload_mismatch() {
        let line = r#"{"tick":1,"wall_time":0,"kind":"collision","payload":{"index":0,"collected":1,"target":6}}"#;
        assert!(serde_json::from_str::<Event>(line).is_err());
    }

    #[test]
    fn outcome_extraction() {
        let hit = Event::new(
            9,
            0,
            Payload::Collision(CollisionPayload {
                vehicle_id: 1,
                trial_id: 4,
                style: DrivingStyle::Risky,
                x: 0.0,
                y: 0.0,
            }),
        );
        assert_eq!(hit.outcome().unwrap().verdict, Verdict::Incorrect);
        let left = Event::new(
            12,
            0,
            Payload::CarLeaving(CarLeavingPayload {
                vehicle_id: 1,
                trial_id: 4,
                style: DrivingStyle::Risky,
                verdict: None,
                marginal: false,
            }),
        );
        assert!(left.outcome().is_none());
    }
}

use proptest::prelude::*;
use roadsense_core::analytics::TrialPoint;
use roadsense_core::director::{Control, DifficultyState, Hud, PedestrianView, VehicleView};
use roadsense_core::domain::{DrivingStyle, GestureKind, SessionPhase};
use roadsense_server::wire::{AudioRef, Entity, Envelope, Role, SessionSummary, WireMessage};

fn coord() -> impl Strategy<Value = f64> {
    prop_oneof![-1e3..1e3f64, any::<f64>().prop_filter("finite", |v| v.is_finite())]
}

fn text() -> impl Strategy<Value = String> {
    proptest::collection::vec(any::<char>(), 0..24).prop_map(|c| c.into_iter().collect())
}

fn style() -> impl Strategy<Value = DrivingStyle> {
    (0..4usize).prop_map(|i| DrivingStyle::ALL[i])
}

fn phase() -> impl Strategy<Value = SessionPhase> {
    prop_oneof![
        Just(SessionPhase::Onboarding),
        Just(SessionPhase::Training),
        Just(SessionPhase::Completed)
    ]
}

fn control() -> impl Strategy<Value = Control> {
    prop_oneof![
        Just(Control::Start),
        Just(Control::Pause),
        Just(Control::End),
        (any::<u8>(), any::<u8>()).prop_map(|(scaffolding, challenge)| Control::DifficultyOverride {
            scaffolding,
            challenge
        }),
    ]
}

fn entity() -> impl Strategy<Value = Entity> {
    let gesture = prop_oneof![
        Just(None),
        Just(Some(GestureKind::CrossInvitation)),
        Just(Some(GestureKind::Warning))
    ];
    prop_oneof![
        (coord(), coord(), text()).prop_map(|(x, y, area)| Entity::Participant { x, y, area }),
        (any::<u32>(), style(), 1..=4u8, coord(), coord(), prop_oneof![Just(1i8), Just(-1)], text(), any::<u32>(), gesture)
            .prop_map(|(id, style, lane, x, y, heading, animation, frame, gesture)| Entity::Vehicle(VehicleView {
                id,
                style,
                lane,
                x,
                y,
                heading,
                animation,
                frame,
                gesture
            })),
        (any::<u32>(), coord(), coord()).prop_map(|(id, x, y)| Entity::Pedestrian(PedestrianView { id, x, y })),
        (coord(), coord()).prop_map(|(x, y)| Entity::Star { x, y }),
    ]
}

fn summary() -> impl Strategy<Value = SessionSummary> {
    proptest::collection::vec((any::<u32>(), style(), any::<bool>(), any::<bool>(), any::<u64>()), 0..8).prop_map(
        |rows| {
            let mut correct = 0;
            let outcomes: Vec<TrialPoint> = rows
                .into_iter()
                .enumerate()
                .map(|(i, (trial_id, style, success, marginal, tick))| {
                    correct += success as usize;
                    TrialPoint {
                        index: i + 1,
                        trial_id,
                        style,
                        success,
                        marginal,
                        tick,
                        cumulative_accuracy: correct as f64 / (i + 1) as f64,
                    }
                })
                .collect();
            let total = outcomes.len();
            SessionSummary {
                accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
                outcomes,
                correct,
                total,
            }
        },
    )
}

pub fn message() -> impl Strategy<Value = WireMessage> {
    let audio = prop_oneof![
        Just(None),
        Just(Some(AudioRef::Silent)),
        text().prop_map(|path| Some(AudioRef::File { path }))
    ];
    prop_oneof![
        (text(), prop_oneof![Just(Role::Participant), Just(Role::Facilitator)])
            .prop_map(|(nickname, role)| WireMessage::ClientHello { nickname, role }),
        (coord(), coord(), any::<u64>()).prop_map(|(x, y, client_tick)| WireMessage::PositionUpdate {
            raw: [x, y],
            client_tick
        }),
        (
            any::<u64>(),
            any::<bool>(),
            phase(),
            any::<bool>(),
            0..12usize,
            proptest::collection::vec(entity(), 0..6),
            (any::<u32>(), any::<u32>(), any::<u32>())
        )
            .prop_map(|(tick, full, phase, paused, d, entities, (collected, target, remaining_seconds))| {
                WireMessage::StateDelta {
                    tick,
                    full,
                    phase,
                    paused,
                    difficulty: DifficultyState::all().nth(d).unwrap(),
                    entities,
                    hud: Hud {
                        collected,
                        target,
                        remaining_seconds,
                    },
                }
            }),
        (text(), text(), text(), audio, any::<u64>()).prop_map(|(utterance_id, speaker, text, audio_ref, duration_ms)| {
            WireMessage::AudioCue {
                utterance_id,
                speaker,
                text,
                audio_ref,
                duration_ms,
            }
        }),
        control().prop_map(|control| WireMessage::Control { control }),
        summary().prop_map(WireMessage::SessionSummary),
        text().prop_map(|reason| WireMessage::Reject { reason }),
    ]
}

pub fn envelope() -> impl Strategy<Value = Envelope> {
    (any::<u64>(), message()).prop_map(|(seq, message)| Envelope { seq, message })
}

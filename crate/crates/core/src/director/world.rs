use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::schedule::{build_spawn_schedule, PedestrianSpec, ScheduledVehicle, SpawnSchedule};
use super::{next_difficulty, select_gesture, DifficultyState, DirectorConfig};
use crate::adjudicator::{collides, AreaIndex, Verdict};
use crate::agent_brain::{
    intent_bank, screen_output, CommandBatch, FilterVerdict, LyingCars, ScaffoldCue, SpawnCommand,
};
use crate::domain::{
    DrivingStyle, GestureKind, Point, ScenarioConfig, SessionPhase, SpiritKind, VehicleTimeline,
    TICK_HZ,
};
use crate::memory::{
    AnomalyPayload, CarLeavingPayload, CollisionPayload, CueKind, ErrorStats, Payload,
    PhasePayload, PositionPayload, Provenance, ScaffoldPayload, SpawnPayload, StarPayload,
    UtterancePayload,
};

/// Speaker id for narrator lines that belong to no spirit.
pub const NARRATOR: &str = "narrator";

/// Facilitator and participant commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Control {
    /// Leave onboarding, or resume after a pause.
    Start,
    Pause,
    DifficultyOverride { scaffolding: u8, challenge: u8 },
    End,
}

/// Everything that can change the world from outside, as recorded in traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Input {
    /// Participant position, already in virtual coordinates.
    Position { x: f64, y: f64 },
    Control { control: Control },
    /// Provider reply for a decision round.
    Decision { round: u32, text: String },
    /// The provider call for a round failed or timed out.
    DecisionFailed { round: u32, error: String },
}

/// Static inputs of a session: the scene, the ladder and the seed.
#[derive(Debug, Clone)]
pub struct Rules {
    pub scenario: ScenarioConfig,
    pub director: DirectorConfig,
    pub areas: AreaIndex,
    pub lying_cars: LyingCars,
    pub seed: u64,
}

impl Rules {
    pub fn new(scenario: ScenarioConfig, director: DirectorConfig, lying_cars: LyingCars, seed: u64) -> Self {
        let areas = AreaIndex::new(&scenario.layout);
        Self {
            scenario,
            director,
            areas,
            lying_cars,
            seed,
        }
    }

    fn star(&self, index: u32) -> Option<Point> {
        let stars = &self.scenario.stars;
        (!stars.is_empty()).then(|| stars[index as usize % stars.len()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarTask {
    pub collected: u32,
    pub target: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveVehicle {
    pub timeline: VehicleTimeline,
    pub collided: bool,
    pub utterance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingVehicle {
    /// Earliest simulation tick at which the vehicle may enter.
    pub due: u64,
    pub vehicle: ScheduledVehicle,
    pub gesture_hint: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionState {
    /// Last round requested; 0 before the first.
    pub round: u32,
    pub in_flight: bool,
    /// Failed attempts in the current round.
    pub failures: u8,
}

/// A request for the next command batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionRequest {
    pub round: u32,
    /// 1 for the first try, 2 for the retry.
    pub attempt: u8,
}

/// Result of one tick.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutput {
    /// Journal payloads, all stamped with the tick that was stepped.
    pub events: Vec<Payload>,
    pub request: Option<DecisionRequest>,
    /// Diagnostics that do not belong in the journal.
    pub notes: Vec<String>,
}

/// Authoritative session state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    /// Session tick; advances on every step.
    pub tick: u64,
    /// Simulation tick; frozen while paused or outside Training.
    pub sim_tick: u64,
    pub phase: SessionPhase,
    pub paused: bool,
    pub participant: Point,
    pub participant_area: String,
    pub stars: StarTask,
    pub difficulty: DifficultyState,
    pub verdicts: Vec<Verdict>,
    pub vehicles: Vec<ActiveVehicle>,
    pub pending: VecDeque<PendingVehicle>,
    pub pedestrians: Vec<PedestrianSpec>,
    /// Simulation tick the current walkers started at.
    pub pedestrians_since: u64,
    pub next_vehicle_id: u32,
    pub decision: DecisionState,
    pub greeted: BTreeSet<String>,
    pub nickname: String,
}

impl WorldState {
    pub fn new(rules: &Rules, nickname: &str) -> Self {
        let start = rules.scenario.layout.participant_start;
        let area = rules.areas.classify(start).area_id;
        Self {
            tick: 0,
            sim_tick: 0,
            phase: SessionPhase::Onboarding,
            paused: false,
            participant: start,
            participant_area: area,
            stars: StarTask {
                collected: 0,
                target: rules.director.target_stars,
            },
            difficulty: DifficultyState::cold_start(),
            verdicts: Vec::new(),
            vehicles: Vec::new(),
            pending: VecDeque::new(),
            pedestrians: Vec::new(),
            pedestrians_since: 0,
            next_vehicle_id: 1,
            decision: DecisionState::default(),
            greeted: BTreeSet::new(),
            nickname: crate::agent_brain::effective_nickname(nickname).to_string(),
        }
    }

    pub fn stats(&self, rules: &Rules) -> ErrorStats {
        ErrorStats::from_verdicts(&self.verdicts, rules.director.short_window)
    }

    pub fn active_star(&self, rules: &Rules) -> Option<Point> {
        (self.phase == SessionPhase::Training && self.stars.collected < self.stars.target)
            .then(|| rules.star(self.stars.collected))
            .flatten()
    }

    pub fn remaining_seconds(&self, rules: &Rules) -> u32 {
        rules
            .director
            .time_limit_s
            .saturating_sub((self.sim_tick / TICK_HZ as u64) as u32)
    }

    pub fn is_finished(&self) -> bool {
        self.phase == SessionPhase::Completed
    }

    fn set_phase(&mut self, to: SessionPhase, out: &mut StepOutput) {
        if self.phase.can_advance_to(to) {
            out.events.push(Payload::PhaseChange(PhasePayload { from: self.phase, to }));
            self.phase = to;
        }
    }

    fn level_cue(&self, provenance: Provenance) -> Payload {
        Payload::ScaffoldShown(ScaffoldPayload {
            cue: CueKind::Level,
            vehicle_id: None,
            scaffolding: self.difficulty.scaffolding(),
            challenge: self.difficulty.challenge(),
            provenance,
        })
    }

    fn cue(&self, cue: CueKind, vehicle_id: Option<u32>) -> Payload {
        Payload::ScaffoldShown(ScaffoldPayload {
            cue,
            vehicle_id,
            scaffolding: self.difficulty.scaffolding(),
            challenge: self.difficulty.challenge(),
            provenance: Provenance::Auto,
        })
    }
}

/// Advances the world by one tick. Inputs are applied in order: controls,
/// then the latest position, then decisions; dynamics follow.
pub fn step(state: &mut WorldState, inputs: &[Input], rules: &Rules) -> StepOutput {
    let mut out = StepOutput::default();
    if state.is_finished() {
        state.tick += 1;
        return out;
    }

    for input in inputs {
        if let Input::Control { control } = input {
            apply_control(state, control, &mut out);
        }
    }
    let latest = inputs.iter().rev().find_map(|i| match i {
        Input::Position { x, y } => Some(Point::new(*x, *y)),
        _ => None,
    });
    if let (Some(p), false) = (latest, state.is_finished()) {
        apply_position(state, p, rules, &mut out);
    }
    for input in inputs {
        match input {
            Input::Decision { round, text } => apply_decision(state, *round, Ok(text), rules, &mut out),
            Input::DecisionFailed { round, error } => {
                apply_decision(state, *round, Err(error), rules, &mut out)
            }
            _ => {}
        }
    }

    match state.phase {
        SessionPhase::Onboarding => greet_nearby(state, rules, &mut out),
        SessionPhase::Training if !state.paused => {
            advance(state, rules, &mut out);
            state.sim_tick += 1;
        }
        _ => {}
    }

    if state.phase == SessionPhase::Training
        && !state.decision.in_flight
        && state.pending.len() + state.vehicles.len() <= rules.director.queue_low_water
    {
        state.decision = DecisionState {
            round: state.decision.round + 1,
            in_flight: true,
            failures: 0,
        };
        out.request = Some(DecisionRequest {
            round: state.decision.round,
            attempt: 1,
        });
    }

    state.tick += 1;
    out
}

fn apply_control(state: &mut WorldState, control: &Control, out: &mut StepOutput) {
    match control {
        Control::Start => match state.phase {
            SessionPhase::Onboarding => {
                state.set_phase(SessionPhase::Training, out);
                out.events.push(state.level_cue(Provenance::Auto));
            }
            _ => state.paused = false,
        },
        Control::Pause => state.paused = true,
        Control::DifficultyOverride {
            scaffolding,
            challenge,
        } => match DifficultyState::new(*scaffolding, *challenge) {
            Ok(d) => {
                state.difficulty = d;
                out.events.push(state.level_cue(Provenance::Manual));
            }
            Err(e) => out.notes.push(format!("override ignored: {e}")),
        },
        Control::End => {
            state.set_phase(SessionPhase::Training, out);
            state.set_phase(SessionPhase::Completed, out);
        }
    }
}

fn apply_position(state: &mut WorldState, p: Point, rules: &Rules, out: &mut StepOutput) {
    let c = rules.areas.classify(p);
    if c.clamped {
        out.events.push(Payload::Anomaly(AnomalyPayload {
            reason: "position outside playfield, clamped".into(),
            x: p.x,
            y: p.y,
        }));
    }
    if c.position != state.participant {
        state.participant = c.position;
        state.participant_area = c.area_id;
        out.events.push(Payload::PositionUpdate(PositionPayload {
            x: c.position.x,
            y: c.position.y,
            area: state.participant_area.clone(),
        }));
    }
}

fn apply_decision(
    state: &mut WorldState,
    round: u32,
    reply: Result<&String, &String>,
    rules: &Rules,
    out: &mut StepOutput,
) {
    if !state.decision.in_flight || round != state.decision.round {
        out.notes.push(format!("stale decision for round {round} ignored"));
        return;
    }
    let seed = rules.seed ^ (round as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let schedule = reply
        .map_err(|e| format!("provider: {e}"))
        .and_then(|text| screen_output(text, rules.lying_cars).map_err(|e| format!("parse: {e}")))
        .and_then(|screened| {
            if screened.report.verdict != FilterVerdict::Clean {
                out.notes.push(format!(
                    "filter {:?}: {}",
                    screened.report.verdict,
                    screened.report.details.join("; ")
                ));
            }
            build_spawn_schedule(&screened.batch, state.difficulty, seed, &rules.scenario)
                .map_err(|e| format!("schedule: {e}"))
        });
    match schedule {
        Ok(s) => accept_schedule(state, s, out),
        Err(reason) => {
            state.decision.failures += 1;
            out.notes.push(format!("round {round} attempt {} failed: {reason}", state.decision.failures));
            if state.decision.failures < 2 {
                out.request = Some(DecisionRequest {
                    round,
                    attempt: state.decision.failures + 1,
                });
            } else {
                out.notes.push(format!("round {round}: using fallback batch"));
                let fallback = fallback_batch(round);
                let s = build_spawn_schedule(&fallback, state.difficulty, seed, &rules.scenario)
                    .expect("fallback batch always schedules");
                accept_schedule(state, s, out);
            }
        }
    }
}

fn accept_schedule(state: &mut WorldState, schedule: SpawnSchedule, out: &mut StepOutput) {
    state.decision.in_flight = false;
    let narrate = state.difficulty.scaffolding() >= 1;
    if narrate {
        if schedule.scaffolds.contains(&ScaffoldCue::VoiceHint) {
            out.events.push(state.cue(CueKind::VoiceHint, None));
        }
        for line in &schedule.narration {
            out.events.push(Payload::Utterance(UtterancePayload {
                speaker: NARRATOR.into(),
                vehicle_id: None,
                text: line.clone(),
            }));
        }
    }
    let hint = schedule.scaffolds.contains(&ScaffoldCue::GestureHint);
    for v in schedule.vehicles {
        state.pending.push_back(PendingVehicle {
            due: state.sim_tick + v.delay_ticks as u64,
            vehicle: v,
            gesture_hint: hint,
        });
    }
    state.pedestrians = schedule.pedestrians;
    state.pedestrians_since = state.sim_tick;
}

/// Used when the provider fails twice in one round.
pub fn fallback_batch(round: u32) -> CommandBatch {
    let styles = DrivingStyle::ALL;
    let make = |lane: u8, style: DrivingStyle, delay: u32| SpawnCommand {
        style,
        lane,
        delay_ticks: delay,
        utterance: intent_bank(style)[0].to_string(),
        gesture: None,
        lying: false,
    };
    let r = round as usize;
    CommandBatch {
        spawns: vec![
            make(1, styles[r % styles.len()], 30),
            make(2, styles[(r + 2) % styles.len()], 120),
        ],
        ..Default::default()
    }
}

fn greet_nearby(state: &mut WorldState, rules: &Rules, out: &mut StepOutput) {
    for spirit in &rules.scenario.spirits {
        if matches!(spirit.kind, SpiritKind::Star | SpiritKind::Pedestrian)
            || state.greeted.contains(&spirit.id)
            || spirit.position.distance(state.participant) > rules.director.onboarding_radius
        {
            continue;
        }
        let Some(line) = spirit.lines.first() else {
            continue;
        };
        state.greeted.insert(spirit.id.clone());
        out.events.push(Payload::Utterance(UtterancePayload {
            speaker: spirit.id.clone(),
            vehicle_id: None,
            text: line.replace("{{nickname}}", &state.nickname),
        }));
    }
}

fn gesture_for(state: &WorldState, p: &PendingVehicle, rules: &Rules) -> Option<GestureKind> {
    let v = &p.vehicle;
    if v.lying {
        return v.requested_gesture;
    }
    let style = v.style();
    let stats = state.stats(rules);
    select_gesture(style, &stats, state.difficulty, &rules.director)
        .or_else(|| {
            (p.gesture_hint && style.yields() && state.difficulty.scaffolding() >= 2)
                .then_some(GestureKind::CrossInvitation)
        })
        .or_else(|| {
            (v.requested_gesture == Some(GestureKind::Warning) && !style.yields())
                .then_some(GestureKind::Warning)
        })
}

fn advance(state: &mut WorldState, rules: &Rules, out: &mut StepOutput) {
    let now = state.sim_tick;

    // spawn pending vehicles whose lane is clear
    let mut waiting = VecDeque::with_capacity(state.pending.len());
    while let Some(p) = state.pending.pop_front() {
        let lane_busy = state.vehicles.iter().any(|a| a.timeline.lane.id == p.vehicle.lane.id)
            || waiting.iter().any(|w: &PendingVehicle| w.vehicle.lane.id == p.vehicle.lane.id);
        if p.due > now || lane_busy {
            waiting.push_back(p);
            continue;
        }
        let id = state.next_vehicle_id;
        state.next_vehicle_id += 1;
        let gesture = gesture_for(state, &p, rules);
        let v = p.vehicle;
        out.events.push(Payload::Spawn(SpawnPayload {
            vehicle_id: id,
            trial_id: id,
            style: v.style(),
            lane: v.lane.id,
            gesture,
            lying: v.lying,
        }));
        if gesture.is_some() {
            out.events.push(state.cue(CueKind::GestureHint, Some(id)));
        }
        if state.difficulty.scaffolding() >= 1 {
            out.events.push(Payload::Utterance(UtterancePayload {
                speaker: format!("vehicle_{id}"),
                vehicle_id: Some(id),
                text: v.utterance.clone(),
            }));
        }
        state.vehicles.push(ActiveVehicle {
            timeline: VehicleTimeline {
                vehicle_id: id,
                trial_id: id,
                style: v.style(),
                lane: v.lane,
                size: rules.scenario.road.vehicle,
                spawn_tick: now,
                distances: v.distances,
                gesture,
                lying: v.lying,
            },
            collided: false,
            utterance: v.utterance,
        });
    }
    state.pending = waiting;

    // adjudicate live vehicles
    let mut i = 0;
    while i < state.vehicles.len() {
        let pos = state.participant;
        let av = &mut state.vehicles[i];
        let tl = &av.timeline;
        let mut concluded = None;
        if !av.collided && collides(tl, now, pos) {
            av.collided = true;
            out.events.push(Payload::Collision(CollisionPayload {
                vehicle_id: tl.vehicle_id,
                trial_id: tl.trial_id,
                style: tl.style,
                x: pos.x,
                y: pos.y,
            }));
            concluded = Some(Verdict::Incorrect);
        }
        let leaving = now >= tl.car_leaving_tick();
        if leaving {
            let correct = !av.collided;
            out.events.push(Payload::CarLeaving(CarLeavingPayload {
                vehicle_id: tl.vehicle_id,
                trial_id: tl.trial_id,
                style: tl.style,
                verdict: correct.then_some(Verdict::Correct),
                marginal: correct && !rules.areas.is_safe(pos),
            }));
            if correct {
                concluded = Some(Verdict::Correct);
            }
            state.vehicles.remove(i);
        } else {
            i += 1;
        }
        if let Some(v) = concluded {
            state.verdicts.push(v);
            let next = next_difficulty(&state.stats(rules), state.difficulty, &rules.director);
            if next != state.difficulty {
                state.difficulty = next;
                out.events.push(state.level_cue(Provenance::Auto));
            }
        }
    }

    // stars
    if let Some(star) = state.active_star(rules) {
        if star.distance(state.participant) <= rules.director.star_radius {
            let index = state.stars.collected;
            state.stars.collected += 1;
            out.events.push(Payload::StarCollected(StarPayload {
                index,
                collected: state.stars.collected,
                target: state.stars.target,
            }));
            if state.stars.collected >= state.stars.target {
                state.set_phase(SessionPhase::Completed, out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleView {
    pub id: u32,
    pub style: DrivingStyle,
    pub lane: u8,
    pub x: f64,
    pub y: f64,
    /// +1 east, -1 west.
    pub heading: i8,
    pub animation: String,
    pub frame: u32,
    pub gesture: Option<GestureKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianView {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hud {
    pub collected: u32,
    pub target: u32,
    pub remaining_seconds: u32,
}

/// What the UI needs to draw one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSnapshot {
    pub phase: SessionPhase,
    pub paused: bool,
    pub participant: Point,
    pub participant_area: String,
    pub vehicles: Vec<VehicleView>,
    pub pedestrians: Vec<PedestrianView>,
    pub star: Option<Point>,
    pub difficulty: DifficultyState,
    pub hud: Hud,
}

impl WorldState {
    /// Scene as of the last completed step.
    pub fn snapshot(&self, rules: &Rules) -> SceneSnapshot {
        // vehicles were advanced at sim_tick - 1
        let t = self.sim_tick.saturating_sub(1);
        let vehicles = self
            .vehicles
            .iter()
            .filter_map(|a| {
                let tl = &a.timeline;
                let front = tl.front_at(t)?;
                let age = t - tl.spawn_tick;
                let animation = clip_for(tl, age);
                let frames = rules.scenario.animation(animation).map_or(1, |a| a.frames.max(1));
                Some(VehicleView {
                    id: tl.vehicle_id,
                    style: tl.style,
                    lane: tl.lane.id,
                    x: front.x,
                    y: front.y,
                    heading: tl.lane.heading,
                    animation: animation.to_string(),
                    frame: (age % frames as u64) as u32,
                    gesture: tl.gesture,
                })
            })
            .collect();
        let elapsed = self.sim_tick.saturating_sub(self.pedestrians_since);
        let pedestrians = if self.phase == SessionPhase::Training {
            self.pedestrians
                .iter()
                .map(|p| {
                    let pos = p.position(elapsed);
                    PedestrianView {
                        id: p.id,
                        x: pos.x,
                        y: pos.y,
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        SceneSnapshot {
            phase: self.phase,
            paused: self.paused,
            participant: self.participant,
            participant_area: self.participant_area.clone(),
            vehicles,
            pedestrians,
            star: self.active_star(rules),
            difficulty: self.difficulty,
            hud: Hud {
                collected: self.stars.collected,
                target: self.stars.target,
                remaining_seconds: self.remaining_seconds(rules),
            },
        }
    }
}

fn clip_for(tl: &VehicleTimeline, age: u64) -> &'static str {
    let d = &tl.distances;
    let i = age as usize;
    if i + 1 >= d.len() {
        return "depart";
    }
    let speed = (d[i] - d[i + 1]).abs();
    let prev = if i > 0 { (d[i - 1] - d[i]).abs() } else { speed };
    if speed <= 1e-12 {
        "idle"
    } else if speed + 1e-12 < prev {
        "brake"
    } else if d[i] < 0.0 {
        "depart"
    } else {
        "drive"
    }
}

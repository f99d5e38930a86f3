//! Session state machine: star task, two-axis difficulty, spawn scheduling
//! and scaffold cues, plus record/replay of input traces.

mod difficulty;
mod gesture;
mod schedule;
mod session;
mod trace;
mod world;

pub use difficulty::{
    next_difficulty, DifficultyError, DifficultyState, DirectorConfig, DirectorConfigError,
    LadderStep,
};
pub use gesture::select_gesture;
pub use schedule::{
    build_spawn_schedule, pedestrians_for, PedestrianSpec, ScheduleError, ScheduledVehicle,
    SpawnSchedule,
};
pub use session::{PromptRequest, Session, TickOutput};
pub use trace::{replay, Trace, TraceError, TraceHeader, TraceLine, TraceWriter, TRACE_VERSION};
pub use world::{
    fallback_batch, step, ActiveVehicle, Control, DecisionRequest, DecisionState, Hud, Input,
    PedestrianView, PendingVehicle, Rules, SceneSnapshot, StarTask, StepOutput, VehicleView,
    WorldState, NARRATOR,
};

//! Shared vocabulary: driving styles, behavior plans, spirits, scene
//! geometry and session phases. Everything here is plain value data.

mod geometry;
mod kinematics;
mod plan;
mod scenario;
mod style;

use serde::{Deserialize, Serialize};

pub use geometry::{Point, Rect};
pub use kinematics::{simulate_plan, Lane, VehicleSize, VehicleTimeline};
pub use plan::{
    style_template, BehaviorPlan, ProfilePoint, SpeedProfile, SpeedTables, StyleSpeeds, FRAME_RATE,
};
pub use scenario::{
    validate_scenario, Animation, Area, AreaLayout, RoadConfig, ScenarioConfig, ScenarioError,
    Spirit, SpiritKind, ValidationReport, Violation, VoiceSettings, SCHEMA_VERSION,
};
pub use style::{BadStyleToken, DrivingStyle, GestureKind};

/// Simulation tick rate; matches the animation catalog's frame rate.
pub const TICK_HZ: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionPhase {
    Onboarding,
    Training,
    Completed,
}

impl SessionPhase {
    /// Onboarding -> Training -> Completed, one step at a time.
    pub fn can_advance_to(self, next: SessionPhase) -> bool {
        use SessionPhase::*;
        matches!((self, next), (Onboarding, Training) | (Training, Completed))
    }
}

#[cfg(test)]
mod tests {
    use super::SessionPhase::*;

    #[test]
    fn phases_move_forward_only() {
        assert!(Onboarding.can_advance_to(Training));
        assert!(Training.can_advance_to(Completed));
        assert!(!Training.can_advance_to(Onboarding));
        assert!(!Completed.can_advance_to(Training));
        assert!(!Onboarding.can_advance_to(Completed));
    }
}

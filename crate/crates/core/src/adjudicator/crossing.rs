use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::AreaIndex;
use crate::domain::{DrivingStyle, Point, VehicleTimeline};
use crate::exec::Execution;

/// Participant clearance around the body center, meters.
pub const COLLISION_RADIUS: f64 = 0.5;

/// Participant positions for consecutive ticks starting at `start_tick`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start_tick: u64,
    pub positions: Vec<Point>,
}

impl Trajectory {
    pub fn new(start_tick: u64, positions: Vec<Point>) -> Self {
        Self {
            start_tick,
            positions,
        }
    }

    pub fn at(&self, tick: u64) -> Option<Point> {
        tick.checked_sub(self.start_tick)
            .and_then(|i| self.positions.get(i as usize).copied())
    }

    pub fn end_tick(&self) -> Option<u64> {
        (!self.positions.is_empty()).then(|| self.start_tick + self.positions.len() as u64 - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeCause {
    SafeAtCarLeaving,
    Collision,
}

/// Result of one adjudicated crossing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingOutcome {
    pub trial_id: u32,
    pub verdict: Verdict,
    pub cause: OutcomeCause,
    pub vehicle_style: DrivingStyle,
    pub tick: u64,
    /// No collision, but the participant was off the safe areas when the
    /// vehicle left.
    #[serde(default)]
    pub marginal: bool,
}

impl CrossingOutcome {
    pub fn collision(trial_id: u32, style: DrivingStyle, tick: u64) -> Self {
        Self {
            trial_id,
            verdict: Verdict::Incorrect,
            cause: OutcomeCause::Collision,
            vehicle_style: style,
            tick,
            marginal: false,
        }
    }

    pub fn safe(trial_id: u32, style: DrivingStyle, tick: u64, marginal: bool) -> Self {
        Self {
            trial_id,
            verdict: Verdict::Correct,
            cause: OutcomeCause::SafeAtCarLeaving,
            vehicle_style: style,
            tick,
            marginal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdjudicationError {
    #[error("trajectory has no position for tick {0}")]
    IncompleteTrajectory(u64),
}

/// Whether a participant at `pos` touches the vehicle body at `tick`.
pub fn collides(vehicle: &VehicleTimeline, tick: u64, pos: Point) -> bool {
    vehicle
        .footprint(tick)
        .is_some_and(|body| body.distance_to(pos) < COLLISION_RADIUS)
}

/// Collision at the first touching tick wins; otherwise the trial is
/// correct, flagged marginal when the participant was not in a safe area at
/// the car-leaving tick.
pub fn adjudicate(
    trajectory: &Trajectory,
    vehicle: &VehicleTimeline,
    areas: &AreaIndex,
) -> Result<CrossingOutcome, AdjudicationError> {
    let leaving = vehicle.car_leaving_tick();
    for tick in vehicle.spawn_tick..=leaving {
        let pos = trajectory
            .at(tick)
            .ok_or(AdjudicationError::IncompleteTrajectory(tick))?;
        if collides(vehicle, tick, areas.layout().bounds.clamp(pos)) {
            return Ok(CrossingOutcome::collision(vehicle.trial_id, vehicle.style, tick));
        }
    }
    let at_leaving = trajectory
        .at(leaving)
        .ok_or(AdjudicationError::IncompleteTrajectory(leaving))?;
    let marginal = !areas.is_safe(at_leaving);
    Ok(CrossingOutcome::safe(
        vehicle.trial_id,
        vehicle.style,
        leaving,
        marginal,
    ))
}

/// One participant path against one vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingCase {
    pub trajectory: Trajectory,
    pub vehicle: VehicleTimeline,
}

pub fn adjudicate_all(
    cases: &[CrossingCase],
    areas: &AreaIndex,
    exec: Execution,
) -> Vec<Result<CrossingOutcome, AdjudicationError>> {
    exec.map(cases, |c| adjudicate(&c.trajectory, &c.vehicle, areas))
}

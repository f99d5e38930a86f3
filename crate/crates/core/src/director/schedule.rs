use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::DifficultyState;
use crate::agent_brain::{CommandBatch, ScaffoldCue};
use crate::domain::{
    simulate_plan, BehaviorPlan, DrivingStyle, GestureKind, Lane, Point, ScenarioConfig, TICK_HZ,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("{needed} vehicles overlap in time but only {lanes} lanes exist")]
    ScheduleOverflow { needed: usize, lanes: usize },
    #[error("batch names lane {0}, which the scenario does not define")]
    UnknownLane(u8),
    #[error("batch contains no spawns")]
    Empty,
}

/// One vehicle with its plan and precomputed motion, not yet on the road.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledVehicle {
    pub delay_ticks: u32,
    pub lane: Lane,
    pub plan: BehaviorPlan,
    pub distances: Vec<f64>,
    pub utterance: String,
    /// Gesture the model asked for; the director may add one at spawn.
    pub requested_gesture: Option<GestureKind>,
    pub lying: bool,
}

impl ScheduledVehicle {
    pub fn style(&self) -> DrivingStyle {
        self.plan.style
    }

    /// Ticks from spawn through car-leaving inclusive.
    pub fn duration(&self) -> u64 {
        self.distances.len() as u64
    }
}

/// A background walker that ping-pongs along a pedestrian path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianSpec {
    pub id: u32,
    pub path: [Point; 2],
    /// Meters per second.
    pub speed: f64,
    /// Starting offset along the path in meters.
    pub offset: f64,
}

impl PedestrianSpec {
    pub fn position(&self, elapsed_ticks: u64) -> Point {
        let [a, b] = self.path;
        let len = a.distance(b);
        if len <= f64::EPSILON {
            return a;
        }
        let travelled = self.offset + self.speed * elapsed_ticks as f64 / TICK_HZ as f64;
        let phase = travelled % (2.0 * len);
        let along = if phase <= len { phase } else { 2.0 * len - phase };
        let t = along / len;
        Point::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpawnSchedule {
    /// Sorted by delay.
    pub vehicles: Vec<ScheduledVehicle>,
    pub pedestrians: Vec<PedestrianSpec>,
    pub scaffolds: Vec<ScaffoldCue>,
    pub narration: Vec<String>,
}

/// Turns a validated batch into concrete plans. Vehicles whose requested
/// lane is still occupied by an earlier vehicle of the same batch move to
/// the lowest free lane.
pub fn build_spawn_schedule(
    batch: &CommandBatch,
    difficulty: DifficultyState,
    seed: u64,
    scenario: &ScenarioConfig,
) -> Result<SpawnSchedule, ScheduleError> {
    if batch.spawns.is_empty() {
        return Err(ScheduleError::Empty);
    }
    let lanes = &scenario.road.lanes;
    let mut order: Vec<usize> = (0..batch.spawns.len()).collect();
    order.sort_by_key(|&i| batch.spawns[i].delay_ticks);

    // per lane: tick at which it becomes free again
    let mut free_at = vec![0u64; lanes.len()];
    let mut vehicles = Vec::with_capacity(order.len());
    for i in order {
        let cmd = &batch.spawns[i];
        let requested = lanes
            .iter()
            .position(|l| l.id == cmd.lane)
            .ok_or(ScheduleError::UnknownLane(cmd.lane))?;
        let start = cmd.delay_ticks as u64;
        let slot = if free_at[requested] <= start {
            requested
        } else {
            (0..lanes.len())
                .find(|&k| free_at[k] <= start)
                .ok_or(ScheduleError::ScheduleOverflow {
                    needed: free_at.iter().filter(|&&f| f > start).count() + 1,
                    lanes: lanes.len(),
                })?
        };
        let lane = lanes[slot].clone();
        let plan = scenario.speed_tables.template(cmd.style, difficulty);
        let distances = simulate_plan(&plan, &lane, scenario.road.vehicle, TICK_HZ);
        free_at[slot] = start + distances.len() as u64;
        vehicles.push(ScheduledVehicle {
            delay_ticks: cmd.delay_ticks,
            lane,
            plan,
            distances,
            utterance: cmd.utterance.clone(),
            requested_gesture: cmd.gesture,
            lying: cmd.lying,
        });
    }

    Ok(SpawnSchedule {
        vehicles,
        pedestrians: pedestrians_for(difficulty, seed, &scenario.pedestrian_paths),
        scaffolds: batch.scaffolds.clone(),
        narration: batch.narration.clone(),
    })
}

/// Interfering walkers grow with challenge: none at level 1.
pub fn pedestrians_for(difficulty: DifficultyState, seed: u64, paths: &[[Point; 2]]) -> Vec<PedestrianSpec> {
    if paths.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..difficulty.challenge().saturating_sub(1) as u32)
        .map(|k| {
            let path = paths[k as usize % paths.len()];
            let len = path[0].distance(path[1]);
            PedestrianSpec {
                id: k,
                path,
                speed: rng.gen_range(1.0..1.4),
                offset: rng.gen_range(0.0..len.max(f64::EPSILON)),
            }
        })
        .collect()
}

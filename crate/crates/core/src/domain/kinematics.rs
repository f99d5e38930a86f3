use serde::{Deserialize, Serialize};

use super::{BehaviorPlan, DrivingStyle, GestureKind, Point, Rect};

/// Slowest speed a yielding vehicle creeps at while closing on its stop
/// point, so the approach terminates in finite time.
const CREEP_SPEED: f64 = 0.3;

/// Hard cap on a vehicle's lifetime, ticks.
const MAX_VEHICLE_TICKS: usize = 30 * 120;

/// One traffic lane. Vehicles travel along x in direction `heading`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub id: u8,
    pub center_y: f64,
    /// +1 drives toward increasing x, -1 toward decreasing x.
    pub heading: i8,
    /// x coordinate of the crosswalk edge a vehicle reaches first.
    pub crosswalk_near_x: f64,
    pub crosswalk_width: f64,
    /// Distance before the near edge at which vehicles enter.
    pub spawn_distance: f64,
}

impl Lane {
    pub fn heading_sign(&self) -> f64 {
        if self.heading >= 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// x of a vehicle front `distance` meters before the near edge.
    pub fn front_x(&self, distance: f64) -> f64 {
        self.crosswalk_near_x - self.heading_sign() * distance
    }

    pub fn spawn_point(&self) -> Point {
        Point::new(self.front_x(self.spawn_distance), self.center_y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleSize {
    pub length: f64,
    pub width: f64,
}

impl Default for VehicleSize {
    fn default() -> Self {
        Self {
            length: 4.0,
            width: 1.8,
        }
    }
}

/// Precomputed per-tick motion of one spawned vehicle. The vehicle is live
/// from `spawn_tick` through `car_leaving_tick()` inclusive; its departure
/// animation starts on the last tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleTimeline {
    pub vehicle_id: u32,
    pub trial_id: u32,
    pub style: DrivingStyle,
    pub lane: Lane,
    pub size: VehicleSize,
    pub spawn_tick: u64,
    /// Front distance-to-crosswalk per tick, starting at `spawn_tick`.
    pub distances: Vec<f64>,
    pub gesture: Option<GestureKind>,
    #[serde(default)]
    pub lying: bool,
}

impl VehicleTimeline {
    pub fn car_leaving_tick(&self) -> u64 {
        self.spawn_tick + self.distances.len() as u64 - 1
    }

    pub fn is_live(&self, tick: u64) -> bool {
        tick >= self.spawn_tick && tick <= self.car_leaving_tick()
    }

    pub fn distance_at(&self, tick: u64) -> Option<f64> {
        tick.checked_sub(self.spawn_tick)
            .and_then(|i| self.distances.get(i as usize).copied())
    }

    pub fn front_at(&self, tick: u64) -> Option<Point> {
        self.distance_at(tick)
            .map(|d| Point::new(self.lane.front_x(d), self.lane.center_y))
    }

    /// Body rectangle at `tick`, if live.
    pub fn footprint(&self, tick: u64) -> Option<Rect> {
        let front = self.front_at(tick)?;
        let tail = front.x - self.lane.heading_sign() * self.size.length;
        let half = self.size.width / 2.0;
        Some(Rect::new(
            front.x.min(tail),
            front.y - half,
            front.x.max(tail),
            front.y + half,
        ))
    }

    /// Peak speed over the timeline in m/s given the tick rate.
    pub fn peak_speed(&self, tick_hz: u32) -> f64 {
        self.distances
            .windows(2)
            .map(|w| (w[0] - w[1]).abs() * tick_hz as f64)
            .fold(0.0, f64::max)
    }
}

/// Integrates a plan tick by tick along a lane until the vehicle's tail has
/// cleared the crosswalk. Returns the front distance for every tick.
pub fn simulate_plan(plan: &BehaviorPlan, lane: &Lane, size: VehicleSize, tick_hz: u32) -> Vec<f64> {
    enum Phase {
        Approach,
        Stopped(u32),
        Departing,
    }
    let dt = 1.0 / tick_hz as f64;
    let clear = -(lane.crosswalk_width + size.length);
    let stop_at = if plan.yields {
        plan.speed_profile.stop_distance()
    } else {
        None
    };
    let mut d = lane.spawn_distance;
    let mut phase = Phase::Approach;
    let mut out = vec![d];
    while d > clear && out.len() < MAX_VEHICLE_TICKS {
        phase = match phase {
            Phase::Approach => match stop_at {
                Some(stop) if d > stop => {
                    let v = plan.speed_profile.speed_at(d).max(CREEP_SPEED);
                    let next = d - v * dt;
                    if next <= stop {
                        d = stop;
                        Phase::Stopped(plan.dwell_ticks)
                    } else {
                        d = next;
                        Phase::Approach
                    }
                }
                Some(_) => Phase::Stopped(plan.dwell_ticks),
                None => {
                    d -= plan.speed_profile.speed_at(d) * dt;
                    Phase::Approach
                }
            },
            Phase::Stopped(0) => {
                d -= plan.departure_speed * dt;
                Phase::Departing
            }
            Phase::Stopped(n) => Phase::Stopped(n - 1),
            Phase::Departing => {
                d -= plan.departure_speed * dt;
                Phase::Departing
            }
        };
        out.push(d);
    }
    out
}

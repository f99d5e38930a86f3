use serde::{Deserialize, Serialize};

use super::{DrivingStyle, GestureKind};
use crate::director::DifficultyState;

/// Frame rate every clip in the animation catalog is authored at.
pub const FRAME_RATE: u32 = 30;

/// A breakpoint of a speed profile: speed (m/s) at a distance (m) before the
/// crosswalk near edge. Negative distances lie past the near edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub distance: f64,
    pub speed: f64,
}

/// Piecewise-linear speed over distance-to-crosswalk, with breakpoints in
/// strictly decreasing distance order. Outside the breakpoints the speed is
/// held at the nearest endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct SpeedProfile {
    points: Vec<ProfilePoint>,
}

impl SpeedProfile {
    pub fn new(points: Vec<ProfilePoint>) -> Result<Self, String> {
        if points.is_empty() {
            return Err("speed profile needs at least one point".into());
        }
        for w in points.windows(2) {
            if !(w[0].distance > w[1].distance) {
                return Err(format!(
                    "profile distances must strictly decrease ({} then {})",
                    w[0].distance, w[1].distance
                ));
            }
        }
        if points
            .iter()
            .any(|p| !p.distance.is_finite() || !p.speed.is_finite() || p.speed < 0.0)
        {
            return Err("profile values must be finite and speeds non-negative".into());
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[ProfilePoint] {
        &self.points
    }

    pub fn speed_at(&self, distance: f64) -> f64 {
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        if distance >= first.distance {
            return first.speed;
        }
        if distance <= last.distance {
            return last.speed;
        }
        let seg = self
            .points
            .windows(2)
            .find(|w| distance <= w[0].distance && distance >= w[1].distance)
            .expect("distance lies within profile range");
        let (a, b) = (seg[0], seg[1]);
        let t = (a.distance - distance) / (a.distance - b.distance);
        a.speed + t * (b.speed - a.speed)
    }

    pub fn peak(&self) -> f64 {
        self.points.iter().map(|p| p.speed).fold(0.0, f64::max)
    }

    /// Distance of the first breakpoint where the profile reaches zero.
    pub fn stop_distance(&self) -> Option<f64> {
        self.points.iter().find(|p| p.speed == 0.0).map(|p| p.distance)
    }

    /// Minimum speed over a closed distance interval.
    pub fn min_speed_between(&self, near: f64, far: f64) -> f64 {
        let (lo, hi) = if near <= far { (near, far) } else { (far, near) };
        self.points
            .iter()
            .filter(|p| p.distance > lo && p.distance < hi)
            .map(|p| p.speed)
            .chain([self.speed_at(lo), self.speed_at(hi)])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| ProfilePoint {
                    distance: p.distance,
                    speed: p.speed * factor,
                })
                .collect(),
        }
    }
}

impl TryFrom<Vec<[f64; 2]>> for SpeedProfile {
    type Error = String;

    fn try_from(raw: Vec<[f64; 2]>) -> Result<Self, Self::Error> {
        SpeedProfile::new(
            raw.into_iter()
                .map(|[distance, speed]| ProfilePoint { distance, speed })
                .collect(),
        )
    }
}

impl From<SpeedProfile> for Vec<[f64; 2]> {
    fn from(p: SpeedProfile) -> Self {
        p.points.into_iter().map(|p| [p.distance, p.speed]).collect()
    }
}

/// Authored kinematics for one style at challenge tier 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleSpeeds {
    pub profile: SpeedProfile,
    /// Ticks a yielding vehicle waits at its stop point.
    #[serde(default)]
    pub dwell_ticks: u32,
    /// Speed after the stop, m/s.
    #[serde(default)]
    pub departure_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedTables {
    pub dissociative: StyleSpeeds,
    pub anxious: StyleSpeeds,
    pub risky: StyleSpeeds,
    pub patient: StyleSpeeds,
    /// Speed multiplier per challenge tier 1..=3.
    pub challenge_multipliers: [f64; 3],
    /// Speed multiplier applied at maximum scaffolding.
    pub support_slowdown: f64,
}

impl SpeedTables {
    pub fn for_style(&self, style: DrivingStyle) -> &StyleSpeeds {
        match style {
            DrivingStyle::Dissociative => &self.dissociative,
            DrivingStyle::Anxious => &self.anxious,
            DrivingStyle::Risky => &self.risky,
            DrivingStyle::Patient => &self.patient,
        }
    }

    pub fn speed_factor(&self, difficulty: DifficultyState) -> f64 {
        let tier = self.challenge_multipliers[(difficulty.challenge() - 1) as usize];
        if difficulty.scaffolding() == DifficultyState::MAX_SCAFFOLDING {
            tier * self.support_slowdown
        } else {
            tier
        }
    }

    pub fn template(&self, style: DrivingStyle, difficulty: DifficultyState) -> BehaviorPlan {
        let spec = self.for_style(style);
        let factor = self.speed_factor(difficulty);
        let yields = style.yields();
        BehaviorPlan {
            style,
            speed_profile: spec.profile.scaled(factor),
            yields,
            gesture: None,
            animation_id: if yields { "brake" } else { "drive" }.to_string(),
            frame_rate: FRAME_RATE,
            dwell_ticks: if yields { spec.dwell_ticks } else { 0 },
            departure_speed: spec.departure_speed * factor,
        }
    }
}

impl Default for SpeedTables {
    fn default() -> Self {
        fn p(raw: &[[f64; 2]]) -> SpeedProfile {
            SpeedProfile::try_from(raw.to_vec()).expect("built-in profile is valid")
        }
        SpeedTables {
            patient: StyleSpeeds {
                profile: p(&[[12.0, 4.0], [6.0, 4.0], [1.0, 0.0]]),
                dwell_ticks: 120,
                departure_speed: 3.0,
            },
            dissociative: StyleSpeeds {
                profile: p(&[[12.0, 6.0], [-12.0, 6.0]]),
                dwell_ticks: 0,
                departure_speed: 0.0,
            },
            risky: StyleSpeeds {
                profile: p(&[[12.0, 10.0], [-12.0, 10.0]]),
                dwell_ticks: 0,
                departure_speed: 0.0,
            },
            anxious: StyleSpeeds {
                profile: p(&[
                    [12.0, 5.0],
                    [2.0, 5.0],
                    [1.98, 2.5],
                    [0.27, 2.5],
                    [0.25, 0.0],
                ]),
                dwell_ticks: 90,
                departure_speed: 3.0,
            },
            challenge_multipliers: [1.0, 1.25, 1.5],
            support_slowdown: 0.8,
        }
    }
}

/// How one vehicle approaches and passes the crosswalk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorPlan {
    pub style: DrivingStyle,
    pub speed_profile: SpeedProfile,
    pub yields: bool,
    pub gesture: Option<GestureKind>,
    pub animation_id: String,
    pub frame_rate: u32,
    pub dwell_ticks: u32,
    pub departure_speed: f64,
}

impl BehaviorPlan {
    /// Checks the plan against a crosswalk of the given width; returns a
    /// description of the first broken invariant.
    pub fn check(&self, crosswalk_width: f64) -> Result<(), String> {
        if self.frame_rate != FRAME_RATE {
            return Err(format!("frame rate {} != {FRAME_RATE}", self.frame_rate));
        }
        if self.yields {
            match self.speed_profile.stop_distance() {
                Some(d) if d > 0.0 => {}
                Some(d) => return Err(format!("yielding plan stops at {d} m, not before the crosswalk")),
                None => return Err("yielding plan never reaches 0 m/s".into()),
            }
            if !(self.departure_speed > 0.0) {
                return Err("yielding plan needs a positive departure speed".into());
            }
        } else {
            let min = self.speed_profile.min_speed_between(-crosswalk_width, 0.0);
            if !(min > 0.0) {
                return Err(format!("non-yielding plan drops to {min} m/s over the crossing"));
            }
            if self.speed_profile.stop_distance().is_some() {
                return Err("non-yielding plan contains a stop".into());
            }
        }
        Ok(())
    }
}

/// Canonical plan for a style using the built-in speed tables.
pub fn style_template(style: DrivingStyle, difficulty: DifficultyState) -> BehaviorPlan {
    SpeedTables::default().template(style, difficulty)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level(s: u8, c: u8) -> DifficultyState {
        DifficultyState::new(s, c).unwrap()
    }

    #[test]
    fn patient_slows_down_well_in_advance() {
        let plan = style_template(DrivingStyle::Patient, level(1, 1));
        assert!(plan.yields);
        let stop = plan.speed_profile.stop_distance().unwrap();
        assert!(stop > 0.0);
        // braking starts 6 m out
        assert_eq!(plan.speed_profile.speed_at(6.0), 4.0);
        assert!(plan.speed_profile.speed_at(3.0) < 4.0);
        assert_eq!(plan.speed_profile.speed_at(stop), 0.0);
    }

    #[test]
    fn dissociative_keeps_speed_through_crossing() {
        let plan = style_template(DrivingStyle::Dissociative, level(1, 1));
        assert!(!plan.yields);
        for d in [12.0, 3.0, 0.0, -1.0, -2.0, -6.0] {
            assert_eq!(plan.speed_profile.speed_at(d), 6.0);
        }
    }

    #[test]
    fn risky_peak_grows_with_challenge() {
        let low = style_template(DrivingStyle::Risky, level(1, 1));
        let high = style_template(DrivingStyle::Risky, level(1, 3));
        assert!(high.speed_profile.peak() > low.speed_profile.peak());
    }

    #[test]
    fn anxious_brakes_late_in_two_steps() {
        let plan = style_template(DrivingStyle::Anxious, level(1, 1));
        let sp = &plan.speed_profile;
        assert!(plan.yields);
        assert_eq!(sp.speed_at(2.0), 5.0);
        assert_eq!(sp.speed_at(1.0), 2.5);
        let stop = sp.stop_distance().unwrap();
        assert!(stop > 0.0 && stop < 0.5);
    }

    #[test]
    fn every_template_satisfies_invariants() {
        for style in DrivingStyle::ALL {
            for s in 0..=3 {
                for c in 1..=3 {
                    let plan = style_template(style, level(s, c));
                    plan.check(2.0).unwrap_or_else(|e| panic!("{style} s={s} c={c}: {e}"));
                }
            }
        }
    }

    #[test]
    fn interpolation_and_minimum() {
        let p = SpeedProfile::try_from(vec![[10.0, 4.0], [0.0, 0.0]]).unwrap();
        assert!((p.speed_at(5.0) - 2.0).abs() < 1e-12);
        assert_eq!(p.min_speed_between(2.0, 8.0), p.speed_at(2.0));
        assert!(SpeedProfile::try_from(vec![[0.0, 1.0], [1.0, 1.0]]).is_err());
    }
}

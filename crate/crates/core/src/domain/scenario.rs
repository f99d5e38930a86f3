use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DrivingStyle, Lane, Point, Rect, SpeedTables, VehicleSize, FRAME_RATE};
use crate::adjudicator::CalibrationPair;
use crate::director::DifficultyState;

pub const SCHEMA_VERSION: u32 = 1;

const BUNDLED_SCENARIO: &str = include_str!("../../assets/default_scenario.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub id: String,
    pub rect: Rect,
    pub description: String,
    pub is_safe: bool,
}

/// The playfield split into described regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaLayout {
    pub bounds: Rect,
    pub areas: Vec<Area>,
    /// Fixed participant spawn position.
    pub participant_start: Point,
}

impl AreaLayout {
    pub fn area(&self, id: &str) -> Option<&Area> {
        self.areas.iter().find(|a| a.id == id)
    }

    pub fn is_safe(&self, id: &str) -> bool {
        self.area(id).is_some_and(|a| a.is_safe)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpiritKind {
    Vehicle,
    Tree,
    Star,
    Pedestrian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceSettings {
    pub timbre: String,
    pub rate: f64,
    pub pitch: f64,
}

impl Default for VoiceSettings {
    fn default() -> Self {
        Self {
            timbre: "gentle_female".into(),
            rate: 1.0,
            pitch: 1.0,
        }
    }
}

/// An animated, voiced scene entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spirit {
    pub id: String,
    pub kind: SpiritKind,
    pub personality: String,
    pub position: Point,
    pub responsibilities: String,
    pub actions: Vec<String>,
    #[serde(default)]
    pub voice: VoiceSettings,
    /// Canned onboarding lines.
    #[serde(default)]
    pub lines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Animation {
    pub id: String,
    pub frames: u32,
    pub fps: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadConfig {
    pub lanes: Vec<Lane>,
    #[serde(default)]
    pub vehicle: VehicleSize,
}

impl RoadConfig {
    pub fn lane(&self, id: u8) -> Option<&Lane> {
        self.lanes.iter().find(|l| l.id == id)
    }
}

/// Everything needed to stage a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub layout: AreaLayout,
    pub road: RoadConfig,
    pub spirits: Vec<Spirit>,
    pub animations: Vec<Animation>,
    /// Star positions in collection order.
    pub stars: Vec<Point>,
    pub speed_tables: SpeedTables,
    /// Sidewalk segments interfering pedestrians pace along.
    #[serde(default)]
    pub pedestrian_paths: Vec<[Point; 2]>,
    /// Reference marks used to fit tracker calibration at startup.
    #[serde(default)]
    pub calibration_references: Vec<CalibrationPair>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("reading scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing scenario: {0}")]
    Parse(#[from] serde_json::Error),
}

impl ScenarioConfig {
    /// The default two-lane, dual-crosswalk scene.
    pub fn bundled() -> Self {
        serde_json::from_str(BUNDLED_SCENARIO).expect("bundled scenario parses")
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn animation(&self, id: &str) -> Option<&Animation> {
        self.animations.iter().find(|a| a.id == id)
    }

    pub fn spirit(&self, id: &str) -> Option<&Spirit> {
        self.spirits.iter().find(|s| s.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("schema_version {0} is not supported")]
    SchemaVersion(u32),
    #[error("area `{0}` has an empty or non-finite rectangle")]
    DegenerateArea(String),
    #[error("area id `{0}` is used more than once")]
    DuplicateAreaId(String),
    #[error("area `{0}` extends outside the playfield")]
    AreaOutOfBounds(String),
    #[error("areas `{a}` and `{b}` overlap by {overlap} m²")]
    OverlappingAreas { a: String, b: String, overlap: f64 },
    #[error("no area covers the playfield near ({x}, {y})")]
    CoverageGap { x: f64, y: f64 },
    #[error("only {0} safe areas; at least two are required")]
    TooFewSafeAreas(usize),
    #[error("participant start lies outside the playfield")]
    StartOutOfBounds,
    #[error("spirit id `{0}` is used more than once")]
    DuplicateSpiritId(String),
    #[error("spirit `{spirit}` references unknown animation `{animation}`")]
    UnknownAnimation { spirit: String, animation: String },
    #[error("animation `{0}` is not authored at 30 fps")]
    AnimationFrameRate(String),
    #[error("star {0} lies outside the playfield")]
    StarOutOfBounds(usize),
    #[error("scenario defines no lanes")]
    NoLanes,
    #[error("lane id {0} is used more than once")]
    DuplicateLane(u8),
    #[error("{style} template at {difficulty}: {reason}")]
    InvalidSpeedProfile {
        style: DrivingStyle,
        difficulty: DifficultyState,
        reason: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("scenario ok");
        }
        for v in &self.violations {
            writeln!(f, "- {v}")?;
        }
        Ok(())
    }
}

/// Lists every invariant the scenario breaks; an empty report means it is
/// loadable.
pub fn validate_scenario(config: &ScenarioConfig) -> ValidationReport {
    let mut out = Vec::new();
    if config.schema_version != SCHEMA_VERSION {
        out.push(Violation::SchemaVersion(config.schema_version));
    }
    check_layout(&config.layout, &mut out);

    let catalog: HashSet<&str> = config.animations.iter().map(|a| a.id.as_str()).collect();
    for anim in &config.animations {
        if anim.fps != FRAME_RATE {
            out.push(Violation::AnimationFrameRate(anim.id.clone()));
        }
    }
    let mut seen = HashSet::new();
    for spirit in &config.spirits {
        if !seen.insert(spirit.id.as_str()) {
            out.push(Violation::DuplicateSpiritId(spirit.id.clone()));
        }
        for action in &spirit.actions {
            if !catalog.contains(action.as_str()) {
                out.push(Violation::UnknownAnimation {
                    spirit: spirit.id.clone(),
                    animation: action.clone(),
                });
            }
        }
    }
    for (i, star) in config.stars.iter().enumerate() {
        if !config.layout.bounds.contains(*star) {
            out.push(Violation::StarOutOfBounds(i));
        }
    }

    if config.road.lanes.is_empty() {
        out.push(Violation::NoLanes);
    }
    let mut lane_ids = HashSet::new();
    for lane in &config.road.lanes {
        if !lane_ids.insert(lane.id) {
            out.push(Violation::DuplicateLane(lane.id));
        }
    }
    let widest = config
        .road
        .lanes
        .iter()
        .map(|l| l.crosswalk_width)
        .fold(0.0, f64::max);
    for style in DrivingStyle::ALL {
        for difficulty in DifficultyState::all() {
            let plan = config.speed_tables.template(style, difficulty);
            if let Err(reason) = plan.check(widest) {
                out.push(Violation::InvalidSpeedProfile {
                    style,
                    difficulty,
                    reason,
                });
            }
        }
    }
    ValidationReport { violations: out }
}

fn check_layout(layout: &AreaLayout, out: &mut Vec<Violation>) {
    let bounds = layout.bounds;
    let mut ids = HashSet::new();
    for area in &layout.areas {
        if !ids.insert(area.id.as_str()) {
            out.push(Violation::DuplicateAreaId(area.id.clone()));
        }
        if !area.rect.is_well_formed() {
            out.push(Violation::DegenerateArea(area.id.clone()));
        } else if !bounds.contains_rect(&area.rect) {
            out.push(Violation::AreaOutOfBounds(area.id.clone()));
        }
    }
    for (i, a) in layout.areas.iter().enumerate() {
        for b in &layout.areas[i + 1..] {
            let overlap = a.rect.overlap_area(&b.rect);
            if overlap > 0.0 {
                let (a, b) = if a.id <= b.id { (a, b) } else { (b, a) };
                out.push(Violation::OverlappingAreas {
                    a: a.id.clone(),
                    b: b.id.clone(),
                    overlap,
                });
            }
        }
    }
    // Coverage: split the box on every rectangle edge; each resulting cell
    // must lie inside some area.
    let rects: Vec<Rect> = layout
        .areas
        .iter()
        .filter(|a| a.rect.is_well_formed())
        .map(|a| a.rect)
        .collect();
    let xs = breakpoints(bounds.x0, bounds.x1, rects.iter().flat_map(|r| [r.x0, r.x1]));
    let ys = breakpoints(bounds.y0, bounds.y1, rects.iter().flat_map(|r| [r.y0, r.y1]));
    for xw in xs.windows(2) {
        for yw in ys.windows(2) {
            let c = Point::new((xw[0] + xw[1]) / 2.0, (yw[0] + yw[1]) / 2.0);
            if !rects.iter().any(|r| r.contains(c)) {
                out.push(Violation::CoverageGap { x: c.x, y: c.y });
            }
        }
    }
    let safe = layout.areas.iter().filter(|a| a.is_safe).count();
    if safe < 2 {
        out.push(Violation::TooFewSafeAreas(safe));
    }
    if !bounds.contains(layout.participant_start) {
        out.push(Violation::StartOutOfBounds);
    }
}

fn breakpoints(lo: f64, hi: f64, edges: impl Iterator<Item = f64>) -> Vec<f64> {
    let set: BTreeSet<u64> = edges
        .chain([lo, hi])
        .filter(|v| v.is_finite() && *v >= lo && *v <= hi)
        .map(ordered_bits)
        .collect();
    set.into_iter().map(from_ordered_bits).collect()
}

// total-order encoding of f64 so breakpoints can live in a BTreeSet
fn ordered_bits(v: f64) -> u64 {
    let b = v.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn from_ordered_bits(b: u64) -> f64 {
    if b >> 63 == 1 {
        f64::from_bits(b & !(1 << 63))
    } else {
        f64::from_bits(!b)
    }
}

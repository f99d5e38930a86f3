use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::ErrorStats;

const BUNDLED_CONFIG: &str = include_str!("../../assets/director.json");

/// Two-axis difficulty: cognitive support and environmental challenge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDifficulty")]
pub struct DifficultyState {
    scaffolding: u8,
    challenge: u8,
}

#[derive(Deserialize)]
struct RawDifficulty {
    scaffolding: u8,
    challenge: u8,
}

impl TryFrom<RawDifficulty> for DifficultyState {
    type Error = DifficultyError;

    fn try_from(r: RawDifficulty) -> Result<Self, Self::Error> {
        DifficultyState::new(r.scaffolding, r.challenge)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("difficulty out of range: scaffolding {scaffolding} (0..=3), challenge {challenge} (1..=3)")]
pub struct DifficultyError {
    pub scaffolding: u8,
    pub challenge: u8,
}

impl DifficultyState {
    pub const MAX_SCAFFOLDING: u8 = 3;
    pub const MIN_CHALLENGE: u8 = 1;
    pub const MAX_CHALLENGE: u8 = 3;

    pub fn new(scaffolding: u8, challenge: u8) -> Result<Self, DifficultyError> {
        if scaffolding <= Self::MAX_SCAFFOLDING
            && (Self::MIN_CHALLENGE..=Self::MAX_CHALLENGE).contains(&challenge)
        {
            Ok(Self {
                scaffolding,
                challenge,
            })
        } else {
            Err(DifficultyError {
                scaffolding,
                challenge,
            })
        }
    }

    /// Maximum support, lowest challenge.
    pub fn cold_start() -> Self {
        Self {
            scaffolding: Self::MAX_SCAFFOLDING,
            challenge: Self::MIN_CHALLENGE,
        }
    }

    pub fn scaffolding(self) -> u8 {
        self.scaffolding
    }

    pub fn challenge(self) -> u8 {
        self.challenge
    }

    /// Every valid level.
    pub fn all() -> impl Iterator<Item = DifficultyState> {
        (0..=Self::MAX_SCAFFOLDING).flat_map(|s| {
            (Self::MIN_CHALLENGE..=Self::MAX_CHALLENGE).map(move |c| DifficultyState {
                scaffolding: s,
                challenge: c,
            })
        })
    }

    fn shifted(self, ds: i8, dc: i8) -> Self {
        let s = (self.scaffolding as i8 + ds).clamp(0, Self::MAX_SCAFFOLDING as i8);
        let c = (self.challenge as i8 + dc).clamp(Self::MIN_CHALLENGE as i8, Self::MAX_CHALLENGE as i8);
        Self {
            scaffolding: s as u8,
            challenge: c as u8,
        }
    }
}

impl fmt::Display for DifficultyState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s={} c={}", self.scaffolding, self.challenge)
    }
}

/// One band of the difficulty ladder: applies while the short-term error
/// rate is at least `min_rate` and below the next band's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderStep {
    pub min_rate: f64,
    pub scaffolding: i8,
    pub challenge: i8,
    /// Trials required before this band may apply.
    #[serde(default)]
    pub min_trials: usize,
}

/// Contents of `director.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectorConfig {
    pub theta_high: f64,
    pub theta_low: f64,
    pub short_window: usize,
    pub target_stars: u32,
    /// Shown as a countdown only.
    pub time_limit_s: u32,
    /// Ask for the next batch once pending plus active vehicles drop to this.
    pub queue_low_water: usize,
    pub max_events: usize,
    pub star_radius: f64,
    pub onboarding_radius: f64,
    pub ladder: Vec<LadderStep>,
}

#[derive(Debug, Error)]
pub enum DirectorConfigError {
    #[error("reading director config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing director config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid director config: {0}")]
    Invalid(String),
}

impl Default for DirectorConfig {
    fn default() -> Self {
        serde_json::from_str(BUNDLED_CONFIG).expect("bundled director config parses")
    }
}

impl DirectorConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, DirectorConfigError> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The ladder must start at rate 0, move each axis at most one step, and
    /// be monotone: more support and less challenge as errors rise.
    pub fn validate(&self) -> Result<(), DirectorConfigError> {
        let bad = |m: String| Err(DirectorConfigError::Invalid(m));
        if !(0.0..=1.0).contains(&self.theta_low)
            || !(0.0..=1.0).contains(&self.theta_high)
            || self.theta_low > self.theta_high
        {
            return bad("thresholds must satisfy 0 <= theta_low <= theta_high <= 1".into());
        }
        if self.short_window == 0 || self.max_events == 0 || self.target_stars == 0 {
            return bad("short_window, max_events and target_stars must be positive".into());
        }
        match self.ladder.first() {
            Some(step) if step.min_rate == 0.0 => {}
            _ => return bad("ladder must start with a band at min_rate 0".into()),
        }
        for step in &self.ladder {
            if step.scaffolding.abs() > 1 || step.challenge.abs() > 1 {
                return bad(format!("band at {} moves more than one step", step.min_rate));
            }
        }
        for w in self.ladder.windows(2) {
            if !(w[1].min_rate > w[0].min_rate)
                || w[1].scaffolding < w[0].scaffolding
                || w[1].challenge > w[0].challenge
            {
                return bad(format!("ladder not monotone between {} and {}", w[0].min_rate, w[1].min_rate));
            }
        }
        Ok(())
    }

    fn band(&self, rate: f64) -> &LadderStep {
        self.ladder
            .iter()
            .rev()
            .find(|s| rate >= s.min_rate)
            .unwrap_or(&self.ladder[0])
    }
}

/// Next level after an adjudicated trial. A session with no trials yet
/// starts at maximum support and minimum challenge.
pub fn next_difficulty(
    stats: &ErrorStats,
    current: DifficultyState,
    config: &DirectorConfig,
) -> DifficultyState {
    if stats.trial_count == 0 {
        return DifficultyState::cold_start();
    }
    let band = config.band(stats.short_term_error_rate);
    if stats.trial_count < band.min_trials {
        return current;
    }
    current.shifted(band.scaffolding, band.challenge)
}

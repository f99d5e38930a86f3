use serde::{Deserialize, Serialize};

/// Tick interval during which choosing to cross counts as correct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafePeriod {
    start_tick: u64,
    end_tick: u64,
}

impl SafePeriod {
    pub fn new(start_tick: u64, end_tick: u64) -> Option<Self> {
        (start_tick < end_tick).then_some(Self {
            start_tick,
            end_tick,
        })
    }

    pub fn start_tick(&self) -> u64 {
        self.start_tick
    }

    pub fn end_tick(&self) -> u64 {
        self.end_tick
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactionResult {
    pub correct: bool,
    pub rt_seconds: Option<f64>,
}

/// Correct when the selection falls inside the inclusive safe period; the
/// reaction time is measured from the period's start.
pub fn reaction_time(safe: SafePeriod, selection_tick: u64, tick_hz: u32) -> ReactionResult {
    assert!(tick_hz > 0, "tick rate must be positive");
    let correct = (safe.start_tick..=safe.end_tick).contains(&selection_tick);
    ReactionResult {
        correct,
        rt_seconds: correct.then(|| (selection_tick - safe.start_tick) as f64 / tick_hz as f64),
    }
}

use serde::{Deserialize, Serialize};

use super::Event;
use crate::adjudicator::{CrossingOutcome, Verdict};

/// Default short-term window, in trials.
pub const DEFAULT_WINDOW: usize = 5;

/// Error rates over the recent window and the whole session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub short_term_error_rate: f64,
    pub long_term_error_rate: f64,
    pub trial_count: usize,
    pub window: usize,
}

impl ErrorStats {
    pub fn empty(window: usize) -> Self {
        Self {
            short_term_error_rate: 0.0,
            long_term_error_rate: 0.0,
            trial_count: 0,
            window,
        }
    }

    pub fn from_verdicts(verdicts: &[Verdict], window: usize) -> Self {
        assert!(window >= 1, "window must hold at least one trial");
        let rate = |v: &[Verdict]| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().filter(|x| **x == Verdict::Incorrect).count() as f64 / v.len() as f64
            }
        };
        let recent = &verdicts[verdicts.len().saturating_sub(window)..];
        Self {
            short_term_error_rate: rate(recent),
            long_term_error_rate: rate(verdicts),
            trial_count: verdicts.len(),
            window,
        }
    }
}

/// Adjudicated trials in journal order.
pub fn trials(events: &[Event]) -> Vec<CrossingOutcome> {
    events.iter().filter_map(Event::outcome).collect()
}

/// Short-term error over the last `window` trials, long-term over all.
pub fn performance(events: &[Event], window: usize) -> ErrorStats {
    let verdicts: Vec<Verdict> = trials(events).into_iter().map(|t| t.verdict).collect();
    ErrorStats::from_verdicts(&verdicts, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Verdict::{Correct as C, Incorrect as I};

    #[test]
    fn short_and_long_rates() {
        let s = ErrorStats::from_verdicts(&[C, C, I, C], 2);
        assert_eq!(s.short_term_error_rate, 0.5);
        assert_eq!(s.long_term_error_rate, 0.25);
        assert_eq!(s.trial_count, 4);
    }

    #[test]
    fn empty_is_zero() {
        let s = ErrorStats::from_verdicts(&[], 5);
        assert_eq!(s, ErrorStats::empty(5));
        assert_eq!(performance(&[], 3).trial_count, 0);
    }

    #[test]
    fn window_larger_than_history() {
        let s = ErrorStats::from_verdicts(&[I, C], 10);
        assert_eq!(s.short_term_error_rate, 0.5);
    }
}

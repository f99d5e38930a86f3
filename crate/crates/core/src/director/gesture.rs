use super::{DifficultyState, DirectorConfig};
use crate::domain::{DrivingStyle, GestureKind};
use crate::memory::ErrorStats;

/// A crossing invitation is shown only by cars that yield, and only when
/// the participant is struggling or support is at maximum.
pub fn select_gesture(
    style: DrivingStyle,
    stats: &ErrorStats,
    difficulty: DifficultyState,
    config: &DirectorConfig,
) -> Option<GestureKind> {
    if !style.yields() {
        return None;
    }
    let struggling = stats.short_term_error_rate >= config.theta_high;
    let max_support = difficulty.scaffolding() == DifficultyState::MAX_SCAFFOLDING;
    (struggling || max_support).then_some(GestureKind::CrossInvitation)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(short: f64) -> ErrorStats {
        ErrorStats {
            short_term_error_rate: short,
            long_term_error_rate: short,
            trial_count: 10,
            window: 5,
        }
    }

    fn lvl(s: u8) -> DifficultyState {
        DifficultyState::new(s, 1).unwrap()
    }

    #[test]
    fn high_error_patient_invites() {
        let cfg = DirectorConfig::default();
        assert_eq!(
            select_gesture(DrivingStyle::Patient, &stats(0.9), lvl(2), &cfg),
            Some(GestureKind::CrossInvitation)
        );
    }

    #[test]
    fn low_error_gets_no_cue() {
        let cfg = DirectorConfig::default();
        assert_eq!(select_gesture(DrivingStyle::Dissociative, &stats(0.1), lvl(1), &cfg), None);
        assert_eq!(select_gesture(DrivingStyle::Patient, &stats(0.1), lvl(1), &cfg), None);
    }

    #[test]
    fn never_on_non_yielding_styles() {
        let cfg = DirectorConfig::default();
        for style in [DrivingStyle::Dissociative, DrivingStyle::Risky] {
            for s in 0..=3 {
                assert_eq!(select_gesture(style, &stats(0.9), lvl(s), &cfg), None);
            }
        }
    }

    #[test]
    fn max_support_invites_even_when_doing_well() {
        let cfg = DirectorConfig::default();
        assert_eq!(
            select_gesture(DrivingStyle::Anxious, &stats(0.0), lvl(3), &cfg),
            Some(GestureKind::CrossInvitation)
        );
    }
}

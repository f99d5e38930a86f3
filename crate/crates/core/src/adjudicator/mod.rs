//! Tracker calibration, area lookup, collision adjudication and reaction
//! time scoring. All functions are pure.

mod area;
mod calibration;
mod crossing;
mod reaction;

pub use area::{classify_area, AreaIndex, Classification};
pub use calibration::{
    calibrate, to_virtual, Axis, CalibrationError, CalibrationFile, CalibrationFileError,
    CalibrationPair, CalibrationParams,
};
pub use crossing::{
    adjudicate, adjudicate_all, collides, AdjudicationError, CrossingCase, CrossingOutcome,
    OutcomeCause, Trajectory, Verdict, COLLISION_RADIUS,
};
pub use reaction::{reaction_time, ReactionResult, SafePeriod};

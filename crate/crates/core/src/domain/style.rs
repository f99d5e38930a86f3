use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// One of the four driver archetypes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DrivingStyle {
    Dissociative,
    Anxious,
    Risky,
    Patient,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad style token `{0}`")]
pub struct BadStyleToken(pub String);

impl DrivingStyle {
    pub const ALL: [DrivingStyle; 4] = [
        DrivingStyle::Dissociative,
        DrivingStyle::Anxious,
        DrivingStyle::Risky,
        DrivingStyle::Patient,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DrivingStyle::Dissociative => "dissociative",
            DrivingStyle::Anxious => "anxious",
            DrivingStyle::Risky => "risky",
            DrivingStyle::Patient => "patient",
        }
    }

    /// Whether the canonical behavior for this style stops for pedestrians.
    pub fn yields(self) -> bool {
        matches!(self, DrivingStyle::Patient | DrivingStyle::Anxious)
    }
}

impl fmt::Display for DrivingStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DrivingStyle {
    type Err = BadStyleToken;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dissociative" => Ok(DrivingStyle::Dissociative),
            "anxious" => Ok(DrivingStyle::Anxious),
            "risky" => Ok(DrivingStyle::Risky),
            "patient" => Ok(DrivingStyle::Patient),
            other => Err(BadStyleToken(other.to_string())),
        }
    }
}

impl Serialize for DrivingStyle {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for DrivingStyle {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let token = String::deserialize(deserializer)?;
        token.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GestureKind {
    CrossInvitation,
    Warning,
}

impl GestureKind {
    pub fn animation_id(self) -> &'static str {
        match self {
            GestureKind::CrossInvitation => "cross_invitation",
            GestureKind::Warning => "warning",
        }
    }
}

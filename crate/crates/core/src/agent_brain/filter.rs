use serde::{Deserialize, Serialize};

use super::commands::{parse_commands, recover_commands, structured_block, CommandBatch, ParseFailure, ParseFailureKind};
use crate::domain::GestureKind;
use crate::exec::Execution;

/// What to do with a car whose words contradict its driving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyingCars {
    /// Keep the car and tag it as lying.
    Allow,
    /// Drop the car from the batch.
    #[default]
    Reject,
}

impl std::str::FromStr for LyingCars {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "allow" => Ok(LyingCars::Allow),
            "reject" => Ok(LyingCars::Reject),
            other => Err(format!("expected allow or reject, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterVerdict {
    Clean,
    ExtraneousText,
    IntentBehaviorMismatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterReport {
    pub verdict: FilterVerdict,
    pub details: Vec<String>,
    /// The batch with findings resolved; present unless the verdict is Clean.
    pub repaired: Option<CommandBatch>,
}

impl FilterReport {
    /// The batch to act on: the repaired one when present.
    pub fn into_batch(self, original: CommandBatch) -> CommandBatch {
        self.repaired.unwrap_or(original)
    }
}

/// Phrases that promise yielding or invite the pedestrian across.
const YIELD_PROMISES: &[&str] = &[
    "i'll stop",
    "i will stop",
    "i'm stopping",
    "i am stopping",
    "let you cross",
    "wait for you",
    "you can cross",
    "go ahead",
    "after you",
    "no rush",
    "safe to cross",
];

/// Phrases that announce the car will not yield.
const NO_YIELD_CLAIMS: &[&str] = &[
    "not stopping",
    "won't stop",
    "can't stop",
    "cannot stop",
    "didn't see",
    "in a hurry",
    "late for",
    "not really watching",
    "no time to slow",
    "all mine",
];

fn fold(text: &str) -> String {
    text.to_lowercase().replace(['\u{2019}', '\u{2018}'], "'")
}

fn matching<'a>(text: &str, phrases: &'a [&'a str]) -> Option<&'a str> {
    let folded = fold(text);
    phrases.iter().copied().find(|p| folded.contains(p))
}

/// Checks a parsed batch for text outside the structured block and for
/// spawns whose stated intent contradicts the style's yield behavior.
pub fn filter_hallucinations(batch: &CommandBatch, mode: LyingCars) -> FilterReport {
    let mut details = Vec::new();
    let mut repaired = batch.clone();

    let raw = batch.raw.trim();
    let mut extraneous = false;
    if !raw.is_empty() {
        match structured_block(raw) {
            Some(r) if r.start == 0 && r.end == raw.len() => {}
            Some(r) => {
                extraneous = true;
                details.push(format!(
                    "extraneous text around the command block ({} bytes before, {} after)",
                    r.start,
                    raw.len() - r.end
                ));
                repaired.raw = raw[r].to_string();
            }
            None => {
                extraneous = true;
                details.push("no command block in provider text".into());
                repaired.raw = repaired.to_json();
            }
        }
    }

    let mut mismatched = Vec::new();
    for (i, spawn) in batch.spawns.iter().enumerate() {
        if spawn.lying {
            continue;
        }
        let yields = spawn.style.yields();
        let mut finding = None;
        if !yields && spawn.gesture == Some(GestureKind::CrossInvitation) {
            finding = Some(format!(
                "spawn {i}: {} car shows a cross invitation but does not yield",
                spawn.style
            ));
        } else if !yields {
            if let Some(p) = matching(&spawn.utterance, YIELD_PROMISES) {
                finding = Some(format!(
                    "spawn {i}: {} car promises to yield (\"{p}\") but does not",
                    spawn.style
                ));
            }
        } else if let Some(p) = matching(&spawn.utterance, NO_YIELD_CLAIMS) {
            finding = Some(format!(
                "spawn {i}: {} car claims not to yield (\"{p}\") but stops",
                spawn.style
            ));
        }
        if let Some(f) = finding {
            details.push(f);
            mismatched.push(i);
        }
    }
    match mode {
        LyingCars::Reject => {
            let mut i = 0;
            repaired.spawns.retain(|_| {
                let keep = !mismatched.contains(&i);
                i += 1;
                keep
            });
        }
        LyingCars::Allow => {
            for &i in &mismatched {
                repaired.spawns[i].lying = true;
            }
        }
    }

    let verdict = if !mismatched.is_empty() {
        FilterVerdict::IntentBehaviorMismatch
    } else if extraneous {
        FilterVerdict::ExtraneousText
    } else {
        FilterVerdict::Clean
    };
    FilterReport {
        verdict,
        details,
        repaired: (verdict != FilterVerdict::Clean).then_some(repaired),
    }
}

/// A provider reply that made it through parsing and filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenedBatch {
    pub batch: CommandBatch,
    pub report: FilterReport,
}

/// Full intake of raw provider text: strict parse, falling back to
/// stripping conversational filler, then the hallucination filter.
pub fn screen_output(raw: &str, mode: LyingCars) -> Result<ScreenedBatch, ParseFailure> {
    let parsed = match parse_commands(raw) {
        Ok(b) => b,
        Err(e) if e.kind == ParseFailureKind::MalformedStructure => recover_commands(raw)?,
        Err(e) => return Err(e),
    };
    let report = filter_hallucinations(&parsed, mode);
    let batch = report.clone().into_batch(parsed);
    Ok(ScreenedBatch { batch, report })
}

pub fn screen_all(
    raws: &[String],
    mode: LyingCars,
    exec: Execution,
) -> Vec<Result<ScreenedBatch, ParseFailure>> {
    exec.map(raws, |r| screen_output(r, mode))
}

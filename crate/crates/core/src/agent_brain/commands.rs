use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::intent::cap_utterance;
use crate::domain::{DrivingStyle, GestureKind};

/// One vehicle the model asks for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnCommand {
    pub style: DrivingStyle,
    pub lane: u8,
    pub delay_ticks: u32,
    pub utterance: String,
    #[serde(default)]
    pub gesture: Option<GestureKind>,
    /// Intent contradicts behavior and the car was let through on purpose.
    #[serde(skip)]
    pub lying: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaffoldCue {
    VoiceHint,
    GestureHint,
}

/// Validated output of one decision round.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandBatch {
    pub spawns: Vec<SpawnCommand>,
    #[serde(default)]
    pub scaffolds: Vec<ScaffoldCue>,
    #[serde(default)]
    pub narration: Vec<String>,
    /// Provider text the batch was parsed from.
    #[serde(skip)]
    pub raw: String,
}

impl PartialEq for CommandBatch {
    fn eq(&self, other: &Self) -> bool {
        self.spawns == other.spawns
            && self.scaffolds == other.scaffolds
            && self.narration == other.narration
    }
}

impl CommandBatch {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("command batches always serialize")
    }

    fn cap_lines(&mut self) {
        for s in &mut self.spawns {
            s.utterance = cap_utterance(&s.utterance).into_string();
        }
        for n in &mut self.narration {
            *n = cap_utterance(n).into_string();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseFailureKind {
    UnknownField,
    BadStyleToken,
    MalformedStructure,
}

/// Why the provider text is not a command batch, and where.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?} at line {line} column {column}: {message}")]
pub struct ParseFailure {
    pub kind: ParseFailureKind,
    pub line: usize,
    pub column: usize,
    /// Byte offset of the offending position in the raw text.
    pub offset: usize,
    pub message: String,
}

impl ParseFailure {
    fn from_json(raw: &str, err: serde_json::Error, base: usize) -> Self {
        let message = err.to_string();
        let kind = if message.starts_with("unknown field") {
            ParseFailureKind::UnknownField
        } else if message.starts_with("bad style token") {
            ParseFailureKind::BadStyleToken
        } else {
            ParseFailureKind::MalformedStructure
        };
        let (line, column) = (err.line(), err.column());
        let offset = base + byte_offset(&raw[base..], line, column);
        Self {
            kind,
            line,
            column,
            offset,
            message,
        }
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

/// Strict parse: the whole text must be one schema-valid JSON object.
/// Utterances over the word cap are cut to fit.
pub fn parse_commands(raw: &str) -> Result<CommandBatch, ParseFailure> {
    let mut batch: CommandBatch =
        serde_json::from_str(raw).map_err(|e| ParseFailure::from_json(raw, e, 0))?;
    batch.cap_lines();
    batch.raw = raw.to_string();
    Ok(batch)
}

/// Byte range of the first balanced top-level JSON object in `raw`.
pub fn structured_block(raw: &str) -> Option<std::ops::Range<usize>> {
    let bytes = raw.as_bytes();
    let mut start = None;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' if start.is_some() => in_string = true,
            b'{' => {
                start.get_or_insert(i);
                depth += 1;
            }
            b'}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    return start.map(|s| s..i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Parses the structured block out of text that may carry conversational
/// filler around it. The returned batch keeps the full raw text.
pub fn recover_commands(raw: &str) -> Result<CommandBatch, ParseFailure> {
    let range = structured_block(raw).ok_or_else(|| ParseFailure {
        kind: ParseFailureKind::MalformedStructure,
        line: 1,
        column: 1,
        offset: 0,
        message: "no structured block found".into(),
    })?;
    let mut batch: CommandBatch = serde_json::from_str(&raw[range.clone()])
        .map_err(|e| ParseFailure::from_json(raw, e, range.start))?;
    batch.cap_lines();
    batch.raw = raw.to_string();
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent_brain::intent::word_count;

    const TWO: &str = r#"{"spawns":[{"style":"patient","lane":1,"delay_ticks":30,"utterance":"I'll wait for you.","gesture":"cross_invitation"},{"style":"dissociative","lane":2,"delay_ticks":90,"utterance":"I didn't see anyone.","gesture":null}],"scaffolds":["voice_hint"],"narration":["Watch the cars."]}"#;

    #[test]
    fn parses_fixture_and_round_trips() {
        let batch = parse_commands(TWO).unwrap();
        assert_eq!(batch.spawns.len(), 2);
        assert_eq!(batch.spawns[0].style, DrivingStyle::Patient);
        assert_eq!(batch.spawns[1].style, DrivingStyle::Dissociative);
        assert_eq!(batch.to_json(), TWO);
        assert_eq!(parse_commands(&batch.to_json()).unwrap(), batch);
    }

    #[test]
    fn apology_prefix_is_malformed_but_recoverable() {
        let raw = format!("Sorry for the confusion! Here is the plan:\n{TWO}");
        let err = parse_commands(&raw).unwrap_err();
        assert_eq!(err.kind, ParseFailureKind::MalformedStructure);
        assert_eq!(err.offset, 0);
        let batch = recover_commands(&raw).unwrap();
        assert_eq!(batch, parse_commands(TWO).unwrap());
        assert_eq!(batch.raw, raw);
    }

    #[test]
    fn bad_style_token() {
        let raw = TWO.replace("\"dissociative\"", "\"sleepy\"");
        let err = parse_commands(&raw).unwrap_err();
        assert_eq!(err.kind, ParseFailureKind::BadStyleToken);
        assert!(err.offset > raw.find("sleepy").unwrap() - 2);
    }

    #[test]
    fn unknown_field() {
        let raw = TWO.replace("\"delay_ticks\":30", "\"delay_ticks\":30,\"speed\":9");
        let err = parse_commands(&raw).unwrap_err();
        assert_eq!(err.kind, ParseFailureKind::UnknownField);
        let raw = TWO.replace("\"narration\"", "\"mood\"");
        assert_eq!(parse_commands(&raw).unwrap_err().kind, ParseFailureKind::UnknownField);
    }

    #[test]
    fn missing_spawns_and_wrong_types_are_malformed() {
        assert_eq!(
            parse_commands(r#"{"scaffolds":[]}"#).unwrap_err().kind,
            ParseFailureKind::MalformedStructure
        );
        let raw = TWO.replace("\"lane\":1", "\"lane\":\"one\"");
        assert_eq!(parse_commands(&raw).unwrap_err().kind, ParseFailureKind::MalformedStructure);
        assert_eq!(
            recover_commands("no json at all").unwrap_err().kind,
            ParseFailureKind::MalformedStructure
        );
    }

    #[test]
    fn long_utterances_are_capped_on_parse() {
        let raw = TWO.replace("I didn't see anyone.", &"la ".repeat(60));
        let batch = parse_commands(&raw).unwrap();
        assert!(word_count(&batch.spawns[1].utterance) <= 25);
    }

    #[test]
    fn block_scan_ignores_braces_in_strings() {
        let raw = r#"note {"a":"}{","b":{"c":1}} trailing }"#;
        let r = structured_block(raw).unwrap();
        assert_eq!(&raw[r], r#"{"a":"}{","b":{"c":1}}"#);
    }
}

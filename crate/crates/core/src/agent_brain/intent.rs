use serde::{Deserialize, Serialize};

use super::{LanguageModel, ProviderError};
use crate::domain::DrivingStyle;

/// Spoken lines are capped at this many whitespace-delimited words.
pub const MAX_UTTERANCE_WORDS: usize = 25;

/// Header that marks a request for a single driver line.
pub const INTENT_REQUEST_HEADER: &str = "INTENT REQUEST";

/// A spoken line guaranteed to fit the word cap.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Utterance(String);

impl Utterance {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    pub fn word_count(&self) -> usize {
        word_count(&self.0)
    }
}

impl std::fmt::Display for Utterance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Collapses whitespace runs and strips wrapping quotes.
pub fn normalize(text: &str) -> String {
    let joined = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let trimmed = joined.trim_matches(|c| c == '"' || c == '\u{201c}' || c == '\u{201d}');
    trimmed.trim().to_string()
}

fn ends_sentence(word: &str) -> bool {
    let w = word.trim_end_matches(['"', '\'', ')', '\u{201d}']);
    w.ends_with(['.', '!', '?', ';'])
}

/// Longest prefix of whole sentences within `max` words.
pub fn truncate_at_sentence(text: &str, max: usize) -> Option<String> {
    let words: Vec<&str> = text.split_whitespace().take(max).collect();
    let cut = words.iter().rposition(|w| ends_sentence(w))?;
    Some(words[..=cut].join(" "))
}

pub fn hard_truncate(text: &str, max: usize) -> String {
    text.split_whitespace().take(max).collect::<Vec<_>>().join(" ")
}

/// Applies the cap without asking the provider again: sentence boundary
/// first, then a hard cut.
pub fn cap_utterance(text: &str) -> Utterance {
    let text = normalize(text);
    if word_count(&text) <= MAX_UTTERANCE_WORDS {
        return Utterance(text);
    }
    Utterance(
        truncate_at_sentence(&text, MAX_UTTERANCE_WORDS)
            .unwrap_or_else(|| hard_truncate(&text, MAX_UTTERANCE_WORDS)),
    )
}

pub fn intent_prompt(style: DrivingStyle, scene_context: &str, shorter: bool) -> String {
    let mut p = format!(
        "{INTENT_REQUEST_HEADER}\nstyle: {style}\ncontext: {}\n\
         Reply with one line in the driver's own voice explaining what they are doing \
         and why, at most {MAX_UTTERANCE_WORDS} words.\n",
        normalize(scene_context)
    );
    if shorter {
        p.push_str("Your previous line was too long. Use fewer words.\n");
    }
    p
}

/// Canned lines per style, consistent with each style's yield behavior.
pub fn intent_bank(style: DrivingStyle) -> &'static [&'static str] {
    match style {
        DrivingStyle::Patient => &[
            "I'm heading to the supermarket to pick up a few things; there's no rush",
            "Better safe than sorry. I'll stop and let you cross.",
            "I have plenty of time today, so I'll wait for you.",
        ],
        DrivingStyle::Anxious => &[
            "Oh dear, is someone crossing? I'd better stop... yes, I'll stop.",
            "I'm nervous at crossings, so I brake late but I will stop for you.",
            "So many things to watch! Okay, I'm stopping, go ahead.",
        ],
        DrivingStyle::Dissociative => &[
            "I was on the phone and didn't see anyone on the road",
            "I'm thinking about dinner and not really watching the road.",
            "My mind is somewhere else today; I didn't see the crosswalk.",
        ],
        DrivingStyle::Risky => &[
            "I'm late for work and I'm not stopping for anyone!",
            "I love driving fast, this road is all mine.",
            "No time to slow down, I can't stop now!",
        ],
    }
}

/// Asks the provider for a driver line and enforces the word cap: cut at a
/// sentence boundary, else regenerate once, else hard-truncate.
pub fn generate_intent(
    style: DrivingStyle,
    scene_context: &str,
    provider: &dyn LanguageModel,
) -> Result<Utterance, ProviderError> {
    let first = normalize(&provider.complete(&intent_prompt(style, scene_context, false))?);
    if first.is_empty() {
        return Ok(Utterance(intent_bank(style)[0].to_string()));
    }
    if word_count(&first) <= MAX_UTTERANCE_WORDS {
        return Ok(Utterance(first));
    }
    if let Some(cut) = truncate_at_sentence(&first, MAX_UTTERANCE_WORDS) {
        return Ok(Utterance(cut));
    }
    let second = normalize(&provider.complete(&intent_prompt(style, scene_context, true))?);
    if !second.is_empty() && word_count(&second) <= MAX_UTTERANCE_WORDS {
        return Ok(Utterance(second));
    }
    let source = if second.is_empty() { first } else { second };
    Ok(cap_utterance(&source))
}

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::SessionPhase;

/// Nickname used when the participant has not entered one.
pub const DEFAULT_NICKNAME: &str = "friend";

pub type PromptText = String;

/// The four prompt parts. `history` is a template rendered per decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub background: String,
    pub tool: String,
    pub social: String,
    pub history: String,
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template in {section} references undefined placeholder `{name}`")]
    MissingPlaceholder { section: &'static str, name: String },
    #[error("{section} section is empty")]
    EmptySection { section: &'static str },
    #[error("unterminated placeholder in {section} at byte {offset}")]
    Unterminated { section: &'static str, offset: usize },
    #[error("reading prompt file {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}

impl PromptBundle {
    pub fn bundled() -> Self {
        Self {
            background: include_str!("../../assets/prompts/background.txt").to_string(),
            tool: include_str!("../../assets/prompts/tool.txt").to_string(),
            social: include_str!("../../assets/prompts/social.txt").to_string(),
            history: include_str!("../../assets/prompts/history.tmpl").to_string(),
        }
    }

    /// Reads `background.txt`, `tool.txt`, `social.txt` and `history.tmpl`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name)).map_err(|source| PromptError::Io {
                file: name.to_string(),
                source,
            })
        };
        Ok(Self {
            background: read("background.txt")?,
            tool: read("tool.txt")?,
            social: read("social.txt")?,
            history: read("history.tmpl")?,
        })
    }
}

/// Values substituted into `{{name}}` placeholders.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptVars(BTreeMap<String, String>);

impl PromptVars {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: impl Into<String>, value: impl ToString) -> &mut Self {
        self.0.insert(name.into(), value.to_string());
        self
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.get(name).map(String::as_str)
    }
}

/// Replaces every `{{ name }}` in `template`.
pub fn render_template(
    template: &str,
    vars: &PromptVars,
    section: &'static str,
) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    let mut consumed = 0;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or(PromptError::Unterminated {
            section,
            offset: consumed + start,
        })?;
        let name = after[..end].trim();
        let value = vars.get(name).ok_or_else(|| PromptError::MissingPlaceholder {
            section,
            name: name.to_string(),
        })?;
        out.push_str(value);
        let step = start + 2 + end + 2;
        consumed += step;
        rest = &rest[step..];
    }
    out.push_str(rest);
    Ok(out)
}

pub fn effective_nickname(nickname: &str) -> &str {
    let trimmed = nickname.trim();
    if trimmed.is_empty() {
        DEFAULT_NICKNAME
    } else {
        trimmed
    }
}

/// Concatenates Background, Social, Tool, History and the memory snapshot in
/// that order, substituting placeholders in every template part.
pub fn assemble_prompt(
    bundle: &PromptBundle,
    memory_snapshot: &str,
    nickname: &str,
    vars: &PromptVars,
    phase: SessionPhase,
) -> Result<PromptText, PromptError> {
    let mut vars = vars.clone();
    vars.set("nickname", effective_nickname(nickname));
    let sections = [
        ("background", &bundle.background),
        ("social", &bundle.social),
        ("tool", &bundle.tool),
        ("history", &bundle.history),
    ];
    let mut out = String::new();
    for (name, template) in sections {
        let text = render_template(template, &vars, name)?;
        if phase == SessionPhase::Training && text.trim().is_empty() {
            return Err(PromptError::EmptySection { section: name });
        }
        out.push('[');
        out.push_str(name);
        out.push_str("]\n");
        out.push_str(text.trim_end());
        out.push_str("\n\n");
    }
    out.push_str("[memory]\n");
    out.push_str(memory_snapshot.trim_end());
    out.push('\n');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars() -> PromptVars {
        let mut v = PromptVars::new();
        for k in [
            "trials",
            "short_error",
            "long_error",
            "stars_collected",
            "stars_target",
            "scaffolding",
            "challenge",
        ] {
            v.set(k, 0);
        }
        v
    }

    #[test]
    fn deterministic() {
        let b = PromptBundle::bundled();
        let one = assemble_prompt(&b, "mem", "Lele", &vars(), SessionPhase::Training).unwrap();
        let two = assemble_prompt(&b, "mem", "Lele", &vars(), SessionPhase::Training).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn nickname_fills_every_placeholder() {
        let b = PromptBundle::bundled();
        let sites: usize = [&b.background, &b.tool, &b.social, &b.history]
            .iter()
            .map(|t| t.matches("{{nickname}}").count())
            .sum();
        let text = assemble_prompt(&b, "", "Lele", &vars(), SessionPhase::Training).unwrap();
        assert!(sites > 0);
        assert_eq!(text.matches("Lele").count(), sites);
        assert!(!text.contains("{{"));
    }

    #[test]
    fn order_is_fixed() {
        let text = assemble_prompt(&PromptBundle::bundled(), "M", "", &vars(), SessionPhase::Training)
            .unwrap();
        let pos: Vec<usize> = ["[background]", "[social]", "[tool]", "[history]", "[memory]"]
            .iter()
            .map(|h| text.find(h).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(text.contains(DEFAULT_NICKNAME));
    }

    #[test]
    fn empty_history_in_training_is_rejected() {
        let mut b = PromptBundle::bundled();
        b.history = "  \n".into();
        let err = assemble_prompt(&b, "", "Lele", &vars(), SessionPhase::Training).unwrap_err();
        assert!(matches!(err, PromptError::EmptySection { section: "history" }));
        assert!(assemble_prompt(&b, "", "Lele", &vars(), SessionPhase::Onboarding).is_ok());
    }

    #[test]
    fn undefined_placeholder_is_rejected() {
        let mut b = PromptBundle::bundled();
        b.social.push_str("{{mood}}");
        match assemble_prompt(&b, "", "Lele", &vars(), SessionPhase::Training) {
            Err(PromptError::MissingPlaceholder { section, name }) => {
                assert_eq!((section, name.as_str()), ("social", "mood"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            render_template("a {{b", &PromptVars::new(), "tool"),
            Err(PromptError::Unterminated { offset: 2, .. })
        ));
    }

    #[test]
    fn loads_from_directory() {
        let dir = tempfile::tempdir().unwrap();
        let b = PromptBundle::bundled();
        for (f, t) in [
            ("background.txt", &b.background),
            ("tool.txt", &b.tool),
            ("social.txt", &b.social),
            ("history.tmpl", &b.history),
        ] {
            std::fs::write(dir.path().join(f), t).unwrap();
        }
        assert_eq!(PromptBundle::load(dir.path()).unwrap(), b);
        std::fs::remove_file(dir.path().join("tool.txt")).unwrap();
        assert!(matches!(PromptBundle::load(dir.path()), Err(PromptError::Io { .. })));
    }
}

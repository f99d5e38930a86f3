//! Voice synthesis behind a provider interface. Failures degrade to a
//! caption-only cue.

use std::path::PathBuf;

use roadsense_core::domain::VoiceSettings;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::wire::AudioRef;

/// Env var selecting the synthesis provider: `null` (default) or `file`.
pub const ENV_TTS: &str = "ROADSENSE_TTS";

#[derive(Debug, Clone, PartialEq)]
pub struct VoiceRequest {
    /// Already within the utterance cap.
    pub text: String,
    pub voice: VoiceSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized {
    pub audio: AudioRef,
    pub duration_ms: u64,
}

#[derive(Debug, Error)]
pub enum TtsError {
    #[error("speech synthesis unavailable: {0}")]
    TtsUnavailable(String),
}

pub trait TtsProvider: Send + Sync {
    fn synthesize(&self, req: &VoiceRequest) -> Result<Synthesized, TtsError>;
}

/// Produces a zero-length silent marker for every request.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullTts;

impl TtsProvider for NullTts {
    fn synthesize(&self, _req: &VoiceRequest) -> Result<Synthesized, TtsError> {
        Ok(Synthesized {
            audio: AudioRef::Silent,
            duration_ms: 0,
        })
    }
}

/// Writes a placeholder file named by the content hash of text and voice,
/// so equal requests map to equal references.
#[derive(Debug, Clone)]
pub struct FileStubTts {
    pub dir: PathBuf,
}

impl FileStubTts {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn key(req: &VoiceRequest) -> String {
        let mut h = Sha256::new();
        let v = &req.voice;
        h.update(format!("{}\u{0}{}\u{0}{}\u{0}", v.timbre, v.rate, v.pitch));
        h.update(req.text.as_bytes());
        h.finalize().iter().take(16).map(|b| format!("{b:02x}")).collect()
    }
}

impl TtsProvider for FileStubTts {
    fn synthesize(&self, req: &VoiceRequest) -> Result<Synthesized, TtsError> {
        let path = self.dir.join(format!("{}.txt", Self::key(req)));
        if !path.exists() {
            std::fs::create_dir_all(&self.dir)
                .and_then(|_| std::fs::write(&path, req.text.as_bytes()))
                .map_err(|e| TtsError::TtsUnavailable(e.to_string()))?;
        }
        // roughly 150 words a minute, scaled by speaking rate
        let words = req.text.split_whitespace().count() as f64;
        let rate = if req.voice.rate > 0.0 { req.voice.rate } else { 1.0 };
        Ok(Synthesized {
            audio: AudioRef::File {
                path: path.display().to_string(),
            },
            duration_ms: (words * 400.0 / rate) as u64,
        })
    }
}

/// Always fails; exercises the caption-only path.
#[derive(Debug, Default, Clone, Copy)]
pub struct FailingTts;

impl TtsProvider for FailingTts {
    fn synthesize(&self, _req: &VoiceRequest) -> Result<Synthesized, TtsError> {
        Err(TtsError::TtsUnavailable("provider offline".into()))
    }
}

/// Synthesizes, turning failure into a cue without audio.
pub fn synthesize(req: &VoiceRequest, tts: &dyn TtsProvider) -> (Option<AudioRef>, u64) {
    match tts.synthesize(req) {
        Ok(s) => (Some(s.audio), s.duration_ms),
        Err(e) => {
            log::warn!("{e}; sending caption only");
            (None, 0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(text: &str) -> VoiceRequest {
        VoiceRequest {
            text: text.into(),
            voice: VoiceSettings::default(),
        }
    }

    #[test]
    fn null_is_silent() {
        let s = NullTts.synthesize(&req("hello there")).unwrap();
        assert_eq!(s.audio, AudioRef::Silent);
        assert_eq!(s.duration_ms, 0);
    }

    #[test]
    fn file_stub_is_content_addressed() {
        let dir = tempfile::tempdir().unwrap();
        let tts = FileStubTts::new(dir.path());
        let a = tts.synthesize(&req("Look both ways.")).unwrap();
        let b = tts.synthesize(&req("Look both ways.")).unwrap();
        let c = tts.synthesize(&req("Something else.")).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.audio, c.audio);
        assert!(a.duration_ms > 0);
    }

    #[test]
    fn failure_degrades_to_caption() {
        assert_eq!(synthesize(&req("hi"), &FailingTts), (None, 0));
    }
}

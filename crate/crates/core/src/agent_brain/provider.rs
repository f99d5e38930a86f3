use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::commands::{CommandBatch, ScaffoldCue, SpawnCommand};
use super::intent::{intent_bank, INTENT_REQUEST_HEADER};
use crate::domain::{DrivingStyle, GestureKind};

pub const DEFAULT_DEADLINE: Duration = Duration::from_secs(8);

pub const ENV_ENDPOINT: &str = "ROADSENSE_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "ROADSENSE_LLM_API_KEY";
pub const ENV_MODEL: &str = "ROADSENSE_LLM_MODEL";

const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
const DEFAULT_MODEL: &str = "gpt-4-turbo";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider did not answer within {0:?}")]
    ProviderTimeout(Duration),
    #[error("provider unreachable: {0}")]
    ProviderUnreachable(String),
    #[error("provider returned an unusable response: {0}")]
    BadResponse(String),
}

/// Anything that turns a prompt into text.
pub trait LanguageModel: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError>;
}

/// Provider text plus how long the call took.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawProviderOutput {
    pub text: String,
    pub latency_ms: u64,
}

/// Sends one decision prompt.
pub fn decide(prompt: &str, provider: &dyn LanguageModel) -> Result<RawProviderOutput, ProviderError> {
    let started = Instant::now();
    let text = provider.complete(prompt)?;
    Ok(RawProviderOutput {
        text,
        latency_ms: started.elapsed().as_millis() as u64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub api_key: String,
    pub model: String,
    pub deadline: Duration,
}

/// OpenAI-compatible chat completion endpoint.
pub struct RemoteProvider {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl RemoteProvider {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.deadline))
            .http_status_as_error(true)
            .build()
            .into();
        Self { config, agent }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }
}

impl LanguageModel for RemoteProvider {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": [{ "role": "user", "content": prompt }],
        });
        let mut response = self
            .agent
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {}", self.config.api_key))
            .send_json(&body)
            .map_err(|e| self.map_error(e))?;
        let value: serde_json::Value = response
            .body_mut()
            .read_json()
            .map_err(|e| self.map_error(e))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ProviderError::BadResponse("missing choices[0].message.content".into()))
    }
}

impl RemoteProvider {
    fn map_error(&self, err: ureq::Error) -> ProviderError {
        match err {
            ureq::Error::Timeout(_) => ProviderError::ProviderTimeout(self.config.deadline),
            ureq::Error::StatusCode(code) => ProviderError::BadResponse(format!("HTTP {code}")),
            ureq::Error::Json(e) => ProviderError::BadResponse(e.to_string()),
            other => ProviderError::ProviderUnreachable(other.to_string()),
        }
    }
}

/// Deterministic offline provider: output is a pure function of the prompt
/// and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct MockProvider {
    pub seed: u64,
    /// Artificial latency added to every call.
    pub delay: Duration,
    /// Probability that a decision reply carries one injected hallucination.
    pub hallucination_rate: f64,
}

impl MockProvider {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            delay: Duration::ZERO,
            hallucination_rate: 0.0,
        }
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn with_hallucination_rate(mut self, rate: f64) -> Self {
        self.hallucination_rate = rate.clamp(0.0, 1.0);
        self
    }

    fn digest(&self, prompt: &str) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(prompt.as_bytes());
        h.finalize().into()
    }

    /// The reply without the artificial delay.
    pub fn reply(&self, prompt: &str) -> String {
        let digest = self.digest(prompt);
        let mut rng = ChaCha8Rng::from_seed(digest);
        if prompt.starts_with(INTENT_REQUEST_HEADER) {
            mock_intent(prompt, &mut rng)
        } else if prompt.contains("\"spawns\"") {
            self.mock_decision(&mut rng)
        } else {
            let hex: String = digest[..6].iter().map(|b| format!("{b:02x}")).collect();
            format!("MOCK-{} {hex}", self.seed)
        }
    }

    fn mock_decision(&self, rng: &mut ChaCha8Rng) -> String {
        let lanes: [u8; 2] = if rng.gen_bool(0.5) { [1, 2] } else { [2, 1] };
        let mut spawns = Vec::with_capacity(2);
        for (i, lane) in lanes.into_iter().enumerate() {
            let style = DrivingStyle::ALL[rng.gen_range(0..4)];
            let bank = intent_bank(style);
            spawns.push(SpawnCommand {
                style,
                lane,
                delay_ticks: if i == 0 {
                    rng.gen_range(15..60)
                } else {
                    rng.gen_range(60..150)
                },
                utterance: bank[rng.gen_range(0..bank.len())].to_string(),
                gesture: None,
                lying: false,
            });
        }
        let scaffolds = if rng.gen_bool(0.3) {
            vec![ScaffoldCue::VoiceHint]
        } else {
            vec![]
        };
        let narration = vec![NARRATION[rng.gen_range(0..NARRATION.len())].to_string()];
        let mut batch = CommandBatch {
            spawns,
            scaffolds,
            narration,
            raw: String::new(),
        };
        let inject = self.hallucination_rate > 0.0 && rng.gen_bool(self.hallucination_rate);
        if inject && rng.gen_bool(0.5) {
            return format!("Sure! Here are the next cars.\n{}", batch.to_json());
        }
        if inject {
            let s = &mut batch.spawns[0];
            s.style = DrivingStyle::Risky;
            s.gesture = Some(GestureKind::CrossInvitation);
        }
        batch.to_json()
    }
}

const NARRATION: &[&str] = &[
    "Look at how fast each car is going before you cross.",
    "Listen to what the drivers say. Do their cars slow down?",
    "Wait on the sidewalk until you are sure the car will stop.",
];

fn mock_intent(prompt: &str, rng: &mut ChaCha8Rng) -> String {
    let field = |name: &str| {
        prompt
            .lines()
            .find_map(|l| l.strip_prefix(name))
            .map(str::trim)
            .unwrap_or("")
    };
    let style: DrivingStyle = field("style:").parse().unwrap_or(DrivingStyle::Patient);
    let context = field("context:").to_lowercase();
    let bank = intent_bank(style);
    let keyed = match style {
        DrivingStyle::Patient if context.contains("supermarket") => Some(0),
        DrivingStyle::Dissociative if context.contains("phone") => Some(0),
        _ => None,
    };
    bank[keyed.unwrap_or_else(|| rng.gen_range(0..bank.len()))].to_string()
}

impl LanguageModel for MockProvider {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        Ok(self.reply(prompt))
    }
}

/// Which provider a session talks to.
pub enum ProviderHandle {
    Remote(RemoteProvider),
    Mock(MockProvider),
}

impl ProviderHandle {
    pub fn mock(seed: u64) -> Self {
        ProviderHandle::Mock(MockProvider::new(seed))
    }

    pub fn remote(config: RemoteConfig) -> Self {
        ProviderHandle::Remote(RemoteProvider::new(config))
    }

    /// Remote when an API key is present in the environment, Mock otherwise.
    pub fn from_env(seed: u64) -> Self {
        match std::env::var(ENV_API_KEY) {
            Ok(key) if !key.trim().is_empty() => Self::remote(RemoteConfig {
                endpoint: std::env::var(ENV_ENDPOINT).unwrap_or_else(|_| DEFAULT_ENDPOINT.into()),
                api_key: key,
                model: std::env::var(ENV_MODEL).unwrap_or_else(|_| DEFAULT_MODEL.into()),
                deadline: DEFAULT_DEADLINE,
            }),
            _ => Self::mock(seed),
        }
    }

    pub fn is_mock(&self) -> bool {
        matches!(self, ProviderHandle::Mock(_))
    }
}

impl LanguageModel for ProviderHandle {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        match self {
            ProviderHandle::Remote(r) => r.complete(prompt),
            ProviderHandle::Mock(m) => m.complete(prompt),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent_brain::{filter_hallucinations, parse_commands, LyingCars, FilterVerdict};

    #[test]
    fn mock_is_pure() {
        let m = ProviderHandle::mock(7);
        let a = decide("hello there", &m).unwrap();
        let b = decide("hello there", &m).unwrap();
        assert!(a.text.starts_with("MOCK-7 "));
        assert_eq!(a.text, b.text);
        assert_ne!(a.text, ProviderHandle::mock(8).complete("hello there").unwrap());
    }

    #[test]
    fn mock_decisions_parse_clean() {
        let m = MockProvider::new(3);
        for i in 0..50 {
            let raw = m.reply(&format!("round {i} \"spawns\""));
            let batch = parse_commands(&raw).unwrap();
            assert_eq!(batch.spawns.len(), 2);
            let report = filter_hallucinations(&batch, LyingCars::Reject);
            assert_eq!(report.verdict, FilterVerdict::Clean, "{raw}");
        }
    }

    #[test]
    fn latency_is_recorded() {
        let m = ProviderHandle::Mock(MockProvider::new(1).with_delay(Duration::from_millis(20)));
        let a = decide("x", &m).unwrap();
        let b = decide("y", &m).unwrap();
        assert!(a.latency_ms >= 20 && b.latency_ms >= 20);
    }

    #[test]
    fn unroutable_remote_fails_within_deadline() {
        let deadline = Duration::from_secs(2);
        let p = ProviderHandle::remote(RemoteConfig {
            endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
            api_key: "k".into(),
            model: "m".into(),
            deadline,
        });
        let started = Instant::now();
        let err = decide("hi", &p).unwrap_err();
        assert!(started.elapsed() <= deadline + Duration::from_millis(500));
        assert!(
            matches!(err, ProviderError::ProviderUnreachable(_) | ProviderError::ProviderTimeout(_)),
            "{err:?}"
        );
    }

    #[test]
    fn remote_timeout_maps_to_timeout() {
        // accepts but never answers
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let _hold = std::thread::spawn(move || {
            let conns: Vec<_> = listener.incoming().take(1).collect();
            std::thread::sleep(Duration::from_secs(3));
            drop(conns);
        });
        let p = ProviderHandle::remote(RemoteConfig {
            endpoint: format!("http://{addr}/v1/chat/completions"),
            api_key: "k".into(),
            model: "m".into(),
            deadline: Duration::from_millis(300),
        });
        assert_eq!(
            p.complete("hi").unwrap_err(),
            ProviderError::ProviderTimeout(Duration::from_millis(300))
        );
    }

    #[test]
    fn remote_reads_chat_completion() {
        use std::io::{Read, Write};
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (mut s, _) = listener.accept().unwrap();
            let mut buf = [0u8; 4096];
            let _ = s.read(&mut buf).unwrap();
            let body = r#"{"choices":[{"message":{"role":"assistant","content":"hello"}}]}"#;
            write!(
                s,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        });
        let p = RemoteProvider::new(RemoteConfig {
            endpoint: format!("http://{addr}/v1/chat/completions"),
            api_key: "k".into(),
            model: "m".into(),
            deadline: Duration::from_secs(2),
        });
        assert_eq!(p.complete("hi").unwrap(), "hello");
        server.join().unwrap();
    }

    #[test]
    fn mock_intents_match_fixtures() {
        let m = MockProvider::new(0);
        let patient = m.reply(&crate::agent_brain::intent_prompt(
            DrivingStyle::Patient,
            "going to the supermarket",
            false,
        ));
        assert_eq!(
            patient,
            "I'm heading to the supermarket to pick up a few things; there's no rush"
        );
    }
}

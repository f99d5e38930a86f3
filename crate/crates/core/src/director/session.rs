use super::world::{step, DecisionRequest, Input, Rules, SceneSnapshot, WorldState};
use crate::agent_brain::{assemble_prompt, PromptBundle, PromptText, PromptVars};
use crate::domain::TICK_HZ;
use crate::memory::{snapshot_context, Event, Journal, JournalError};

/// A decision round with its assembled prompt, ready for a provider.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptRequest {
    pub round: u32,
    pub attempt: u8,
    pub prompt: PromptText,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickOutput {
    pub tick: u64,
    pub events: Vec<Event>,
    pub request: Option<PromptRequest>,
    pub notes: Vec<String>,
}

/// World state plus its journal. Wall time is derived from the tick so a
/// replayed session writes the same bytes.
#[derive(Debug)]
pub struct Session {
    rules: Rules,
    state: WorldState,
    journal: Journal,
    prompts: PromptBundle,
    anchor_ms: u64,
    /// Inputs the session generated for itself, applied next tick.
    internal: Vec<Input>,
}

impl Session {
    pub fn new(rules: Rules, prompts: PromptBundle, journal: Journal, nickname: &str, anchor_ms: u64) -> Self {
        let state = WorldState::new(&rules, nickname);
        Self {
            rules,
            state,
            journal,
            prompts,
            anchor_ms,
            internal: Vec::new(),
        }
    }

    pub fn wall_time(&self, tick: u64) -> u64 {
        self.anchor_ms + tick * 1000 / TICK_HZ as u64
    }

    /// Steps once and journals what happened.
    pub fn tick(&mut self, inputs: &[Input]) -> Result<TickOutput, JournalError> {
        let tick = self.state.tick;
        let out = if self.internal.is_empty() {
            step(&mut self.state, inputs, &self.rules)
        } else {
            let mut all = std::mem::take(&mut self.internal);
            all.extend_from_slice(inputs);
            step(&mut self.state, &all, &self.rules)
        };
        let wall = self.wall_time(tick);
        let mut events = Vec::with_capacity(out.events.len());
        for payload in out.events {
            let e = Event::new(tick, wall, payload);
            self.journal.record(e.clone())?;
            events.push(e);
        }
        let mut notes = out.notes;
        let request = out.request.and_then(|r| match self.prompt_for(r) {
            Ok(p) => Some(p),
            Err(reason) => {
                notes.push(format!("prompt assembly failed: {reason}"));
                self.internal.push(Input::DecisionFailed {
                    round: r.round,
                    error: reason,
                });
                None
            }
        });
        Ok(TickOutput {
            tick,
            events,
            request,
            notes,
        })
    }

    fn prompt_for(&self, r: DecisionRequest) -> Result<PromptRequest, String> {
        let stats = self.state.stats(&self.rules);
        let mut vars = PromptVars::new();
        vars.set("trials", stats.trial_count)
            .set("short_error", format!("{:.2}", stats.short_term_error_rate))
            .set("long_error", format!("{:.2}", stats.long_term_error_rate))
            .set("stars_collected", self.state.stars.collected)
            .set("stars_target", self.state.stars.target)
            .set("scaffolding", self.state.difficulty.scaffolding())
            .set("challenge", self.state.difficulty.challenge());
        let memory = snapshot_context(
            self.journal.events(),
            &self.rules.scenario.layout,
            self.rules.director.max_events,
        );
        let prompt = assemble_prompt(&self.prompts, &memory, &self.state.nickname, &vars, self.state.phase)
            .map_err(|e| e.to_string())?;
        Ok(PromptRequest {
            round: r.round,
            attempt: r.attempt,
            prompt,
        })
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn rules(&self) -> &Rules {
        &self.rules
    }

    pub fn journal(&self) -> &Journal {
        &self.journal
    }

    pub fn into_journal(self) -> Journal {
        self.journal
    }

    pub fn snapshot(&self) -> SceneSnapshot {
        self.state.snapshot(&self.rules)
    }

    pub fn is_finished(&self) -> bool {
        self.state.is_finished()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent_brain::{LyingCars, MockProvider};
    use crate::director::{Control, DirectorConfig};
    use crate::domain::ScenarioConfig;

    fn session() -> Session {
        let rules = Rules::new(ScenarioConfig::bundled(), DirectorConfig::default(), LyingCars::Reject, 7);
        Session::new(rules, PromptBundle::bundled(), Journal::in_memory(), "Sam", 1_700_000_000_000)
    }

    #[test]
    fn wall_time_follows_ticks() {
        let s = session();
        assert_eq!(s.wall_time(30) - s.wall_time(0), 1000);
    }

    #[test]
    fn request_carries_prompt_with_nickname() {
        let mut s = session();
        let out = s.tick(&[Input::Control { control: Control::Start }]).unwrap();
        let req = out.request.unwrap();
        assert!(req.prompt.contains("Sam"));
        assert!(req.prompt.contains("\"spawns\""));
        assert!(req.prompt.find("[background]").unwrap() < req.prompt.find("[memory]").unwrap());
        assert_eq!(s.journal().len(), out.events.len());
    }

    #[test]
    fn mock_session_spawns_vehicles() {
        let mut s = session();
        let mock = MockProvider::new(7);
        let mut inbox = vec![Input::Control { control: Control::Start }];
        let mut spawned = false;
        for _ in 0..400 {
            let out = s.tick(&std::mem::take(&mut inbox)).unwrap();
            if let Some(r) = out.request {
                inbox.push(Input::Decision {
                    round: r.round,
                    text: mock.reply(&r.prompt),
                });
            }
            spawned |= out.events.iter().any(|e| e.kind() == crate::memory::EventKind::Spawn);
        }
        assert!(spawned);
    }
}

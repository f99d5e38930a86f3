//! Prompt assembly, language-model providers, command parsing and the
//! hallucination filter.

mod commands;
mod filter;
mod intent;
mod prompt;
mod provider;

pub use commands::{
    parse_commands, recover_commands, structured_block, CommandBatch, ParseFailure,
    ParseFailureKind, ScaffoldCue, SpawnCommand,
};
pub use filter::{
    filter_hallucinations, screen_all, screen_output, FilterReport, FilterVerdict, LyingCars,
    ScreenedBatch,
};
pub use intent::{
    cap_utterance, generate_intent, hard_truncate, intent_bank, intent_prompt, normalize,
    truncate_at_sentence, word_count, Utterance, INTENT_REQUEST_HEADER, MAX_UTTERANCE_WORDS,
};
pub use prompt::{
    assemble_prompt, effective_nickname, render_template, PromptBundle, PromptError, PromptText,
    PromptVars, DEFAULT_NICKNAME,
};
pub use provider::{
    decide, LanguageModel, MockProvider, ProviderError, ProviderHandle, RawProviderOutput,
    RemoteConfig, RemoteProvider, DEFAULT_DEADLINE, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL,
};

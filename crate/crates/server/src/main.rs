use std::path::PathBuf;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use roadsense_core::agent_brain::{LanguageModel, LyingCars, PromptBundle, ProviderHandle};
use roadsense_core::director::{replay, DirectorConfig, Trace};
use roadsense_core::domain::ScenarioConfig;
use roadsense_core::memory::{Durability, Journal};
use roadsense_server::analyze::{analyze_journal, write_csv};
use roadsense_server::live::{bind, default_tick_period, serve, Listeners, ServeOptions};
use roadsense_server::tts::{FileStubTts, NullTts, TtsProvider, ENV_TTS};

#[derive(Parser)]
#[command(name = "roadsense", version, about = "Street-crossing trainer session server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderKind {
    Mock,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum LyingMode {
    Allow,
    Reject,
}

#[derive(Subcommand)]
enum Command {
    /// Host one live session.
    Serve {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        /// Also accept WebSocket clients on this port.
        #[arg(long)]
        ws_port: Option<u16>,
        #[arg(long, value_enum, default_value_t = ProviderKind::Mock)]
        provider: ProviderKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = LyingMode::Reject)]
        lying_cars: LyingMode,
        #[arg(long, default_value = "sessions")]
        out: PathBuf,
        /// Directory of prompt templates.
        #[arg(long)]
        prompts: Option<PathBuf>,
        #[arg(long)]
        director: Option<PathBuf>,
        #[arg(long)]
        session_id: Option<String>,
        #[arg(long, hide = true)]
        tick_ms: Option<u64>,
        #[arg(long, hide = true)]
        max_seconds: Option<u64>,
    },
    /// Re-run a recorded session offline and write its journal.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fail unless the replayed journal equals this file byte for byte.
        #[arg(long)]
        expect: Option<PathBuf>,
    },
    /// Per-trial outcomes and learning-curve fit for a journal.
    Analyze {
        #[arg(long)]
        journal: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn tts_from_env(out: &std::path::Path) -> anyhow::Result<Arc<dyn TtsProvider>> {
    match std::env::var(ENV_TTS).as_deref() {
        Err(_) | Ok("") | Ok("null") => Ok(Arc::new(NullTts)),
        Ok("file") => Ok(Arc::new(FileStubTts::new(out.join("audio")))),
        Ok(other) => bail!("{ENV_TTS}={other} is not one of null, file"),
    }
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Serve {
            scenario,
            port,
            ws_port,
            provider,
            seed,
            lying_cars,
            out,
            prompts,
            director,
            session_id,
            tick_ms,
            max_seconds,
        } => {
            let scenario = match scenario {
                Some(p) => ScenarioConfig::load(&p).with_context(|| format!("loading {}", p.display()))?,
                None => ScenarioConfig::bundled(),
            };
            let mut opts = ServeOptions::new(scenario, &out);
            if let Some(p) = prompts {
                opts.prompts = PromptBundle::load(&p).with_context(|| format!("loading {}", p.display()))?;
            }
            if let Some(p) = director {
                opts.director = DirectorConfig::load(&p).with_context(|| format!("loading {}", p.display()))?;
            }
            opts.seed = seed;
            opts.lying_cars = match lying_cars {
                LyingMode::Allow => LyingCars::Allow,
                LyingMode::Reject => LyingCars::Reject,
            };
            opts.session_id = session_id.unwrap_or_else(|| chrono::Utc::now().format("%Y%m%dT%H%M%S").to_string());
            opts.tick_period = tick_ms.map(Duration::from_millis).unwrap_or_else(default_tick_period);
            opts.max_duration = max_seconds.map(Duration::from_secs);

            let handle = match provider {
                ProviderKind::Mock => ProviderHandle::mock(seed),
                ProviderKind::Remote => {
                    let h = ProviderHandle::from_env(seed);
                    if h.is_mock() {
                        bail!("--provider remote needs ROADSENSE_LLM_API_KEY");
                    }
                    h
                }
            };
            let provider: Arc<dyn LanguageModel> = Arc::new(handle);
            let tts = tts_from_env(&out)?;

            let tcp = bind(&format!("0.0.0.0:{port}"))?;
            println!("listening on {}", tcp.local_addr()?);
            let ws = match ws_port {
                Some(p) => {
                    let l = bind(&format!("0.0.0.0:{p}"))?;
                    println!("websocket on {}", l.local_addr()?);
                    Some(l)
                }
                None => None,
            };
            let report = serve(opts, provider, tts, Listeners { tcp, ws }, Arc::new(AtomicBool::new(false)))?;
            println!(
                "session {} finished ({:?}): {}/{} correct, accuracy {:.2}",
                report.session_id, report.stop, report.summary.correct, report.summary.total, report.summary.accuracy
            );
            println!("journal {}", report.journal_path.display());
            println!("trace {}", report.trace_path.display());
        }
        Command::Replay { trace, out, expect } => {
            let loaded = Trace::load(&trace).with_context(|| format!("loading {}", trace.display()))?;
            let out = out.unwrap_or_else(|| trace.with_extension("replay.jsonl"));
            let session = replay(&loaded, Journal::create(&out, Durability::Flush)?)?;
            println!(
                "replayed {} ticks, {} events -> {}",
                loaded.end_tick,
                session.journal().events().len(),
                out.display()
            );
            drop(session);
            if let Some(expect) = expect {
                if std::fs::read(&out)? != std::fs::read(&expect)? {
                    bail!("replayed journal differs from {}", expect.display());
                }
                println!("identical to {}", expect.display());
            }
        }
        Command::Analyze { journal, csv } => {
            let analysis = analyze_journal(&journal)?;
            let s = &analysis.summary;
            println!("trials {} correct {} accuracy {:.3}", s.total, s.correct, s.accuracy);
            match &analysis.fit {
                Ok(fit) => {
                    print!("learning curve: intercept {:.4} slope {:.4}", fit.intercept, fit.slope);
                    match fit.p_value {
                        Some(p) => println!(" p {p:.4}"),
                        None => println!(" (outcomes separate; no standard errors)"),
                    }
                }
                Err(e) => println!("learning curve: {e}"),
            }
            if let Some(path) = csv {
                write_csv(&s.outcomes, &path)?;
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

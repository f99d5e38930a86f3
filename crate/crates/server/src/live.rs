//! The authoritative 30 Hz tick loop. Provider and synthesis calls run on
//! worker threads and report back through queues drained at tick
//! boundaries, so a slow provider never stalls a tick.

use std::collections::BTreeMap;
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use crossbeam_channel::{bounded, Receiver, Sender, TryRecvError, TrySendError};
use roadsense_core::adjudicator::{CalibrationFile, CalibrationParams};
use roadsense_core::agent_brain::{decide, LanguageModel, LyingCars, PromptBundle};
use roadsense_core::director::{
    Control, DirectorConfig, Input, PromptRequest, SceneSnapshot, TraceHeader, TraceWriter,
    TRACE_VERSION,
};
use roadsense_core::domain::{validate_scenario, Point, ScenarioConfig, TICK_HZ};
use roadsense_core::memory::{journal_file_name, Durability, Journal, Payload};
use thiserror::Error;

use crate::analyze::summarize;
use crate::net::{spawn_acceptor, ConnEvent, NetContext, PositionSample, Transport};
use crate::tts::{synthesize, TtsProvider, VoiceRequest};
use crate::wire::{Role, SessionSummary, WireMessage};

pub fn default_tick_period() -> Duration {
    Duration::from_secs(1) / TICK_HZ
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub scenario: ScenarioConfig,
    pub director: DirectorConfig,
    pub prompts: PromptBundle,
    pub seed: u64,
    pub lying_cars: LyingCars,
    pub session_id: String,
    pub out_dir: PathBuf,
    pub tick_period: Duration,
    /// Stop after this long even if the task is unfinished.
    pub max_duration: Option<Duration>,
    /// Give up if no participant joins in time.
    pub lobby_timeout: Option<Duration>,
    pub durability: Durability,
    pub provider_workers: usize,
}

impl ServeOptions {
    pub fn new(scenario: ScenarioConfig, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            scenario,
            director: DirectorConfig::default(),
            prompts: PromptBundle::bundled(),
            seed: 0,
            lying_cars: LyingCars::Reject,
            session_id: "session".into(),
            out_dir: out_dir.into(),
            tick_period: default_tick_period(),
            max_duration: None,
            lobby_timeout: None,
            durability: Durability::Sync,
            provider_workers: 2,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario invalid: {0}")]
    ScenarioInvalid(String),
    #[error("director config invalid: {0}")]
    DirectorInvalid(String),
    #[error("calibration: {0}")]
    Calibration(String),
    #[error("no participant joined within {0:?}")]
    LobbyTimeout(Duration),
    #[error(transparent)]
    Journal(#[from] roadsense_core::memory::JournalError),
    #[error(transparent)]
    Trace(#[from] roadsense_core::director::TraceError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Completed,
    TimeLimit,
    Stopped,
}

/// Inter-tick timing over a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickStats {
    pub ticks: u64,
    pub max_gap: Duration,
    pub total_gap: Duration,
    /// Gaps longer than two tick periods.
    pub late: u64,
    /// Longest time spent inside one tick.
    pub max_work: Duration,
}

impl TickStats {
    fn record(&mut self, gap: Duration, period: Duration) {
        self.max_gap = self.max_gap.max(gap);
        self.total_gap += gap;
        if gap > period * 2 {
            self.late += 1;
            log::warn!("tick {} started {:.1} ms after the previous one", self.ticks, gap.as_secs_f64() * 1e3);
        }
    }

    pub fn mean_gap(&self) -> Duration {
        if self.ticks < 2 {
            Duration::ZERO
        } else {
            self.total_gap / (self.ticks - 1) as u32
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionReport {
    pub session_id: String,
    pub journal_path: PathBuf,
    pub trace_path: PathBuf,
    pub calibration_path: PathBuf,
    pub stop: StopReason,
    pub ticks: TickStats,
    pub summary: SessionSummary,
}

/// Sockets the session accepts clients on.
pub struct Listeners {
    pub tcp: TcpListener,
    pub ws: Option<TcpListener>,
}

pub fn bind(addr: &str) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr).map_err(|source| ServeError::BindFailure {
        addr: addr.to_string(),
        source,
    })
}

struct Conn {
    role: Role,
    out: Sender<WireMessage>,
}

struct AudioJob {
    utterance_id: String,
    speaker: String,
    request: VoiceRequest,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn spawn_provider_workers(
    n: usize,
    provider: Arc<dyn LanguageModel>,
    requests: Receiver<PromptRequest>,
    done: Sender<Input>,
) {
    for k in 0..n.max(1) {
        let provider = provider.clone();
        let requests = requests.clone();
        let done = done.clone();
        thread::Builder::new()
            .name(format!("provider-{k}"))
            .spawn(move || {
                for req in requests {
                    let input = match decide(&req.prompt, provider.as_ref()) {
                        Ok(out) => {
                            log::debug!("round {} answered in {} ms", req.round, out.latency_ms);
                            Input::Decision {
                                round: req.round,
                                text: out.text,
                            }
                        }
                        Err(e) => Input::DecisionFailed {
                            round: req.round,
                            error: e.to_string(),
                        },
                    };
                    if done.send(input).is_err() {
                        break;
                    }
                }
            })
            .expect("spawn provider worker");
    }
}

fn spawn_tts_worker(tts: Arc<dyn TtsProvider>, jobs: Receiver<AudioJob>, done: Sender<WireMessage>) {
    thread::Builder::new()
        .name("tts".into())
        .spawn(move || {
            for job in jobs {
                let (audio_ref, duration_ms) = synthesize(&job.request, tts.as_ref());
                let cue = WireMessage::AudioCue {
                    utterance_id: job.utterance_id,
                    speaker: job.speaker,
                    text: job.request.text,
                    audio_ref,
                    duration_ms,
                };
                if done.send(cue).is_err() {
                    break;
                }
            }
        })
        .expect("spawn tts worker");
}

/// Registry of connected clients; owned by the tick loop.
#[derive(Default)]
struct Clients {
    conns: BTreeMap<u32, Conn>,
}

impl Clients {
    fn has(&self, role: Role) -> bool {
        self.conns.values().any(|c| c.role == role)
    }

    fn role(&self, id: u32) -> Option<Role> {
        self.conns.get(&id).map(|c| c.role)
    }

    fn send(&mut self, id: u32, msg: WireMessage) {
        let gone = match self.conns.get(&id) {
            Some(c) => match c.out.try_send(msg) {
                Ok(()) => false,
                Err(TrySendError::Full(_)) => {
                    log::warn!("client {id} is not keeping up; message dropped");
                    false
                }
                Err(TrySendError::Disconnected(_)) => true,
            },
            None => false,
        };
        if gone {
            self.conns.remove(&id);
        }
    }

    fn broadcast(&mut self, msg: &WireMessage) {
        let ids: Vec<u32> = self.conns.keys().copied().collect();
        for id in ids {
            self.send(id, msg.clone());
        }
    }
}

/// Applies connection events; returns controls to feed the session.
fn handle_events(
    events: &Receiver<ConnEvent>,
    clients: &mut Clients,
    nickname: &mut Option<String>,
    scene: Option<(u64, &SceneSnapshot)>,
) -> Vec<Control> {
    let mut controls = Vec::new();
    loop {
        let ev = match events.try_recv() {
            Ok(ev) => ev,
            Err(TryRecvError::Empty) | Err(TryRecvError::Disconnected) => break,
        };
        match ev {
            ConnEvent::Hello {
                conn,
                nickname: nick,
                role,
                out,
            } => {
                if clients.role(conn).is_some() {
                    let _ = out.try_send(WireMessage::Reject {
                        reason: "already greeted".into(),
                    });
                } else if clients.has(role) {
                    log::warn!("client {conn}: second {role:?} rejected");
                    let _ = out.try_send(WireMessage::Reject {
                        reason: format!("role conflict: a {} is already connected", role_name(role)),
                    });
                } else {
                    log::info!("client {conn} joined as {role:?}");
                    if role == Role::Participant && nickname.is_none() {
                        *nickname = Some(nick);
                    }
                    clients.conns.insert(conn, Conn { role, out });
                    if let Some((tick, scene)) = scene {
                        clients.send(conn, WireMessage::delta(tick, scene, true));
                    }
                }
            }
            ConnEvent::Control { conn, control } => match clients.role(conn) {
                Some(Role::Participant) if matches!(control, Control::DifficultyOverride { .. }) => {
                    clients.send(
                        conn,
                        WireMessage::Reject {
                            reason: "difficulty override is reserved for the facilitator".into(),
                        },
                    );
                }
                Some(_) => controls.push(control),
                None => log::warn!("control from client {conn} before hello ignored"),
            },
            ConnEvent::Closed { conn } => {
                if clients.conns.remove(&conn).is_some() {
                    log::info!("client {conn} left");
                }
            }
        }
    }
    controls
}

fn role_name(role: Role) -> &'static str {
    match role {
        Role::Participant => "participant",
        Role::Facilitator => "facilitator",
    }
}

/// Runs one session to completion: waits for a participant, then ticks at
/// the configured period until the star task completes, the time limit
/// passes or `stop` is raised.
pub fn serve(
    opts: ServeOptions,
    provider: Arc<dyn LanguageModel>,
    tts: Arc<dyn TtsProvider>,
    listeners: Listeners,
    stop: Arc<AtomicBool>,
) -> Result<SessionReport, ServeError> {
    let report = validate_scenario(&opts.scenario);
    if !report.is_empty() {
        return Err(ServeError::ScenarioInvalid(report.to_string()));
    }
    opts.director
        .validate()
        .map_err(|e| ServeError::DirectorInvalid(e.to_string()))?;
    std::fs::create_dir_all(&opts.out_dir)?;

    let calibration_path = opts.out_dir.join("calibration.json");
    let calibration = CalibrationFile::fit(opts.scenario.calibration_references.clone())
        .map_err(|e| ServeError::Calibration(e.to_string()))?;
    calibration
        .save(&calibration_path)
        .map_err(|e| ServeError::Calibration(e.to_string()))?;
    let calib: CalibrationParams = calibration
        .params()
        .map_err(|e| ServeError::Calibration(e.to_string()))?;
    log::info!("calibration scale {:?} offset {:?}", calib.scale(), calib.offset());

    let (event_tx, event_rx) = bounded::<ConnEvent>(256);
    let (pos_tx, pos_rx) = bounded::<PositionSample>(1);
    let net = NetContext::new(event_tx, pos_tx, pos_rx.clone(), stop.clone());
    spawn_acceptor(listeners.tcp, Transport::Framed, net.clone())?;
    if let Some(ws) = listeners.ws {
        spawn_acceptor(ws, Transport::WebSocket, net.clone())?;
    }

    // lobby: no ticks until a participant says hello
    let mut clients = Clients::default();
    let mut nickname = None;
    let mut early_controls = Vec::new();
    let lobby_start = Instant::now();
    while nickname.is_none() {
        if stop.load(Ordering::SeqCst) {
            net.shutdown();
            return Err(ServeError::LobbyTimeout(lobby_start.elapsed()));
        }
        if let Some(limit) = opts.lobby_timeout {
            if lobby_start.elapsed() > limit {
                net.shutdown();
                return Err(ServeError::LobbyTimeout(limit));
            }
        }
        early_controls.extend(handle_events(&event_rx, &mut clients, &mut nickname, None));
        thread::sleep(Duration::from_millis(5));
    }
    let nickname = nickname.unwrap_or_default();

    let header = TraceHeader {
        version: TRACE_VERSION,
        session_id: opts.session_id.clone(),
        nickname: nickname.clone(),
        seed: opts.seed,
        lying_cars: opts.lying_cars,
        anchor_ms: now_ms(),
        scenario: opts.scenario.clone(),
        director: opts.director.clone(),
        prompts: opts.prompts.clone(),
    };
    let journal_path = opts.out_dir.join(journal_file_name(&opts.session_id));
    let trace_path = opts.out_dir.join(format!("{}.trace.jsonl", opts.session_id));
    let mut trace = TraceWriter::create(&trace_path, &header)?;
    let mut session = header.session(Journal::create(&journal_path, opts.durability)?);

    let (req_tx, req_rx) = bounded::<PromptRequest>(4);
    let (done_tx, done_rx) = bounded::<Input>(16);
    spawn_provider_workers(opts.provider_workers, provider, req_rx, done_tx);
    let (tts_tx, tts_rx) = bounded::<AudioJob>(64);
    let (cue_tx, cue_rx) = bounded::<WireMessage>(64);
    spawn_tts_worker(tts, tts_rx, cue_tx);

    let period = opts.tick_period;
    let started = Instant::now();
    let mut stats = TickStats::default();
    let mut last_start: Option<Instant> = None;
    let mut last_scene: Option<SceneSnapshot> = None;
    let mut carry: Vec<Input> = early_controls.into_iter().map(|control| Input::Control { control }).collect();
    let mut k: u32 = 0;
    let mut nick = Some(nickname);
    let stop_reason = loop {
        let due = started + period * k;
        let now = Instant::now();
        if due > now {
            thread::sleep(due - now);
        }
        let t0 = Instant::now();
        if let Some(prev) = last_start {
            stats.record(t0 - prev, period);
        }
        last_start = Some(t0);
        stats.ticks += 1;
        k += 1;

        if stop.load(Ordering::SeqCst) {
            break StopReason::Stopped;
        }
        if opts.max_duration.is_some_and(|max| started.elapsed() > max) {
            break StopReason::TimeLimit;
        }

        let tick = session.state().tick;
        let scene = last_scene.as_ref().map(|s| (tick, s));
        let mut inputs = std::mem::take(&mut carry);
        for control in handle_events(&event_rx, &mut clients, &mut nick, scene) {
            inputs.push(Input::Control { control });
        }
        inputs.extend(done_rx.try_iter());
        let mut latest = None;
        while let Ok(sample) = pos_rx.try_recv() {
            if clients.role(sample.conn) == Some(Role::Participant) {
                latest = Some(sample);
            }
        }
        if let Some(s) = latest {
            let v = calib.to_virtual(Point::new(s.raw[0], s.raw[1]));
            inputs.push(Input::Position { x: v.x, y: v.y });
        }
        for cue in cue_rx.try_iter() {
            clients.broadcast(&cue);
        }

        trace.tick(tick, &inputs)?;
        let out = session.tick(&inputs)?;
        for note in &out.notes {
            log::info!("tick {tick}: {note}");
        }
        if let Some(req) = out.request {
            let round = req.round;
            if let Err(e) = req_tx.try_send(req) {
                log::warn!("provider queue refused round {round}: {e}");
                carry.push(Input::DecisionFailed {
                    round,
                    error: "provider queue full".into(),
                });
            }
        }
        for (n, e) in out.events.iter().enumerate() {
            if let Payload::Utterance(u) = &e.payload {
                let voice = session
                    .rules()
                    .scenario
                    .spirit(&u.speaker)
                    .map(|s| s.voice.clone())
                    .unwrap_or_default();
                let job = AudioJob {
                    utterance_id: format!("{}-{n}", e.tick),
                    speaker: u.speaker.clone(),
                    request: VoiceRequest {
                        text: u.text.clone(),
                        voice,
                    },
                };
                if tts_tx.try_send(job).is_err() {
                    log::warn!("speech queue full; utterance at tick {} not voiced", e.tick);
                }
            }
        }

        let scene = session.snapshot();
        let first = last_scene.is_none();
        if last_scene.as_ref() != Some(&scene) {
            clients.broadcast(&WireMessage::delta(tick, &scene, first));
            last_scene = Some(scene);
        }
        stats.max_work = stats.max_work.max(t0.elapsed());
        if session.is_finished() {
            break StopReason::Completed;
        }
    };

    let end_tick = session.state().tick;
    trace.finish(end_tick)?;
    let summary = summarize(session.journal().events());
    clients.broadcast(&WireMessage::SessionSummary(summary.clone()));
    // let writers flush the summary before the sockets go away
    thread::sleep(Duration::from_millis(50));
    net.shutdown();
    log::info!(
        "session {} ended ({stop_reason:?}) after {end_tick} ticks; accuracy {:.2}",
        opts.session_id,
        summary.accuracy
    );
    Ok(SessionReport {
        session_id: opts.session_id,
        journal_path,
        trace_path,
        calibration_path,
        stop: stop_reason,
        ticks: stats,
        summary,
    })
}

#![allow(dead_code)]

pub mod strategies;

use std::io::BufReader;
use std::net::{SocketAddr, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError};
use roadsense_core::adjudicator::{CalibrationFile, CalibrationParams};
use roadsense_core::agent_brain::{LanguageModel, MockProvider};
use roadsense_core::director::Control;
use roadsense_core::domain::{Point, ScenarioConfig, SessionPhase};
use roadsense_core::memory::Durability;
use roadsense_server::live::{bind, serve, Listeners, ServeError, ServeOptions, SessionReport};
use roadsense_server::tts::{NullTts, TtsProvider};
use roadsense_server::wire::{read_frame, write_frame, Entity, Role, SequenceCounter, SessionSummary, WireMessage};

pub struct Server {
    pub addr: SocketAddr,
    pub stop: Arc<AtomicBool>,
    pub handle: JoinHandle<Result<SessionReport, ServeError>>,
}

impl Server {
    pub fn stop(self) -> Result<SessionReport, ServeError> {
        self.stop.store(true, Ordering::SeqCst);
        self.join()
    }

    pub fn join(self) -> Result<SessionReport, ServeError> {
        self.handle.join().expect("server thread panicked")
    }
}

pub fn options(out: &Path, seed: u64, tick: Duration) -> ServeOptions {
    let mut o = ServeOptions::new(ScenarioConfig::bundled(), out);
    o.seed = seed;
    o.session_id = format!("s{seed}");
    o.tick_period = tick;
    o.durability = Durability::Flush;
    o.lobby_timeout = Some(Duration::from_secs(20));
    o
}

pub fn start(opts: ServeOptions, provider: Arc<dyn LanguageModel>, tts: Arc<dyn TtsProvider>) -> Server {
    let tcp = bind("127.0.0.1:0").unwrap();
    let addr = tcp.local_addr().unwrap();
    let stop = Arc::new(AtomicBool::new(false));
    let s = stop.clone();
    let handle = thread::spawn(move || serve(opts, provider, tts, Listeners { tcp, ws: None }, s));
    Server { addr, stop, handle }
}

pub fn start_mock(opts: ServeOptions) -> Server {
    let seed = opts.seed;
    start(opts, Arc::new(MockProvider::new(seed)), Arc::new(NullTts))
}

/// Scripted client speaking the framed protocol.
pub struct Client {
    stream: TcpStream,
    counter: SequenceCounter,
    pub inbox: Receiver<WireMessage>,
}

impl Client {
    pub fn connect(addr: SocketAddr) -> Self {
        let stream = TcpStream::connect(addr).unwrap();
        stream.set_nodelay(true).unwrap();
        let (tx, rx) = unbounded();
        let mut r = BufReader::new(stream.try_clone().unwrap());
        thread::spawn(move || {
            while let Ok(Some(env)) = read_frame(&mut r) {
                if tx.send(env.message).is_err() {
                    break;
                }
            }
        });
        Self {
            stream,
            counter: SequenceCounter::default(),
            inbox: rx,
        }
    }

    pub fn join(addr: SocketAddr, nickname: &str, role: Role) -> Self {
        let mut c = Self::connect(addr);
        c.send(WireMessage::ClientHello {
            nickname: nickname.into(),
            role,
        });
        c
    }

    pub fn send(&mut self, msg: WireMessage) {
        let env = self.counter.wrap(msg);
        write_frame(&mut self.stream, &env).unwrap();
    }

    pub fn control(&mut self, control: Control) {
        self.send(WireMessage::Control { control });
    }

    pub fn stream(&mut self) -> &mut TcpStream {
        &mut self.stream
    }

    /// First message matching `pred` within `timeout`.
    pub fn wait_for(&self, timeout: Duration, mut pred: impl FnMut(&WireMessage) -> bool) -> Option<WireMessage> {
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.inbox.recv_timeout(left) {
                Ok(m) if pred(&m) => return Some(m),
                Ok(_) => {}
                Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => return None,
            }
        }
    }
}

pub fn calibration() -> CalibrationParams {
    CalibrationFile::fit(ScenarioConfig::bundled().calibration_references)
        .unwrap()
        .params()
        .unwrap()
}

fn toward(from: Point, to: Point, step: f64) -> Point {
    let d = from.distance(to);
    if d <= step {
        to
    } else {
        Point::new(from.x + (to.x - from.x) * step / d, from.y + (to.y - from.y) * step / d)
    }
}

#[derive(Debug, Default)]
pub struct Run {
    pub summary: Option<SessionSummary>,
    pub deltas: usize,
    pub cues: Vec<WireMessage>,
    pub rejects: Vec<String>,
    pub last_phase: Option<SessionPhase>,
}

/// Plays the participant: starts the task, then walks toward the current
/// star at `step` metres per `period` until the summary arrives.
pub fn play(client: &mut Client, period: Duration, step: f64, timeout: Duration) -> Run {
    let calib = calibration();
    client.control(Control::Start);
    let mut run = Run::default();
    let mut me: Option<Point> = None;
    let mut star: Option<Point> = None;
    let mut n: u64 = 0;
    let deadline = Instant::now() + timeout;
    while Instant::now() < deadline {
        for m in client.inbox.try_iter() {
            match m {
                WireMessage::StateDelta { entities, phase, .. } => {
                    run.deltas += 1;
                    run.last_phase = Some(phase);
                    star = None;
                    for e in entities {
                        match e {
                            Entity::Star { x, y } => star = Some(Point::new(x, y)),
                            Entity::Participant { x, y, .. } if me.is_none() => me = Some(Point::new(x, y)),
                            _ => {}
                        }
                    }
                }
                m @ WireMessage::AudioCue { .. } => run.cues.push(m),
                WireMessage::Reject { reason } => run.rejects.push(reason),
                WireMessage::SessionSummary(s) => {
                    run.summary = Some(s);
                    return run;
                }
                _ => {}
            }
        }
        if let (Some(p), Some(s)) = (me, star) {
            let next = toward(p, s, step);
            me = Some(next);
            let raw = calib.to_raw(next);
            n += 1;
            client.send(WireMessage::PositionUpdate {
                raw: [raw.x, raw.y],
                client_tick: n,
            });
        }
        thread::sleep(period);
    }
    run
}

//! Client connections. Each socket gets a reader that forwards messages to
//! the tick loop and a writer fed by a bounded per-connection queue.

use std::io::{self, BufReader, BufWriter};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use crossbeam_channel::{bounded, Receiver, Sender, TrySendError};
use roadsense_core::director::Control;
use tungstenite::Message;

use crate::wire::{
    decode_envelope, encode_envelope, read_frame, write_frame, Envelope, Role, SequenceCheck,
    SequenceCounter, WireError, WireMessage,
};

/// Outgoing queue depth per client.
pub const OUTBOX: usize = 256;

const POLL: Duration = Duration::from_millis(10);

/// Reader to tick loop, in arrival order.
#[derive(Debug)]
pub enum ConnEvent {
    Hello {
        conn: u32,
        nickname: String,
        role: Role,
        out: Sender<WireMessage>,
    },
    Control {
        conn: u32,
        control: Control,
    },
    Closed {
        conn: u32,
    },
}

/// Latest tracked position; older unread samples are discarded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionSample {
    pub conn: u32,
    pub raw: [f64; 2],
    pub client_tick: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transport {
    /// Length-prefixed frames over TCP.
    Framed,
    /// One envelope per text message.
    WebSocket,
}

#[derive(Clone)]
pub struct NetContext {
    events: Sender<ConnEvent>,
    positions: Sender<PositionSample>,
    // used to evict the stale sample when the slot is full
    positions_drain: Receiver<PositionSample>,
    stop: Arc<AtomicBool>,
    next_id: Arc<AtomicU32>,
    sockets: Arc<Mutex<Vec<TcpStream>>>,
}

impl NetContext {
    pub fn new(
        events: Sender<ConnEvent>,
        positions: Sender<PositionSample>,
        positions_drain: Receiver<PositionSample>,
        stop: Arc<AtomicBool>,
    ) -> Self {
        Self {
            events,
            positions,
            positions_drain,
            stop,
            next_id: Arc::new(AtomicU32::new(1)),
            sockets: Arc::default(),
        }
    }

    fn stopped(&self) -> bool {
        self.stop.load(Ordering::SeqCst)
    }

    /// Stops accepting and closes every open socket.
    pub fn shutdown(&self) {
        self.stop.store(true, Ordering::SeqCst);
        for s in self.sockets.lock().expect("socket list").drain(..) {
            let _ = s.shutdown(Shutdown::Both);
        }
    }

    fn push_position(&self, sample: PositionSample) {
        let mut sample = sample;
        loop {
            match self.positions.try_send(sample) {
                Ok(()) => return,
                Err(TrySendError::Full(s)) => {
                    let _ = self.positions_drain.try_recv();
                    sample = s;
                }
                Err(TrySendError::Disconnected(_)) => return,
            }
        }
    }

    /// Routes one decoded envelope; returns a reason if it must be refused.
    fn route(&self, conn: u32, state: &mut ReaderState, env: Envelope, out: &Sender<WireMessage>) -> Option<String> {
        if let Err(e) = state.seq.accept(env.seq) {
            log::warn!("client {conn}: {e}");
            return Some(e.to_string());
        }
        if !state.greeted && !matches!(env.message, WireMessage::ClientHello { .. }) {
            return Some("send ClientHello first".into());
        }
        match env.message {
            WireMessage::ClientHello { nickname, role } => {
                state.greeted = true;
                let _ = self.events.send(ConnEvent::Hello {
                    conn,
                    nickname,
                    role,
                    out: out.clone(),
                });
                None
            }
            WireMessage::PositionUpdate { raw, client_tick } => {
                if raw.iter().all(|v| v.is_finite()) {
                    self.push_position(PositionSample { conn, raw, client_tick });
                    None
                } else {
                    Some("position must be finite".into())
                }
            }
            WireMessage::Control { control } => {
                let _ = self.events.send(ConnEvent::Control { conn, control });
                None
            }
            _ => Some("only ClientHello, PositionUpdate and Control are accepted from clients".into()),
        }
    }
}

#[derive(Default)]
struct ReaderState {
    seq: SequenceCheck,
    greeted: bool,
}

pub fn spawn_acceptor(listener: TcpListener, transport: Transport, ctx: NetContext) -> io::Result<()> {
    listener.set_nonblocking(true)?;
    thread::Builder::new().name(format!("accept-{transport:?}")).spawn(move || {
        while !ctx.stopped() {
            match listener.accept() {
                Ok((stream, addr)) => {
                    let conn = ctx.next_id.fetch_add(1, Ordering::SeqCst);
                    log::debug!("client {conn} connected from {addr}");
                    if let Err(e) = start_connection(conn, stream, transport, ctx.clone()) {
                        log::warn!("client {conn}: {e}");
                    }
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    thread::sleep(POLL);
                }
            }
        }
    })?;
    Ok(())
}

fn start_connection(conn: u32, stream: TcpStream, transport: Transport, ctx: NetContext) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    ctx.sockets.lock().expect("socket list").push(stream.try_clone()?);
    let (out_tx, out_rx) = bounded::<WireMessage>(OUTBOX);
    match transport {
        Transport::Framed => {
            let write_half = stream.try_clone()?;
            thread::Builder::new()
                .name(format!("write-{conn}"))
                .spawn(move || framed_writer(write_half, out_rx))?;
            thread::Builder::new()
                .name(format!("read-{conn}"))
                .spawn(move || framed_reader(conn, stream, out_tx, ctx))?;
        }
        Transport::WebSocket => {
            thread::Builder::new()
                .name(format!("ws-{conn}"))
                .spawn(move || websocket(conn, stream, out_tx, out_rx, ctx))?;
        }
    }
    Ok(())
}

fn framed_writer(stream: TcpStream, out: Receiver<WireMessage>) {
    let mut w = BufWriter::new(stream);
    let mut counter = SequenceCounter::default();
    for msg in out {
        if write_frame(&mut w, &counter.wrap(msg)).is_err() {
            break;
        }
    }
}

fn framed_reader(conn: u32, stream: TcpStream, out: Sender<WireMessage>, ctx: NetContext) {
    let mut r = BufReader::new(stream);
    let mut state = ReaderState::default();
    loop {
        let refused = match read_frame(&mut r) {
            Ok(Some(env)) => ctx.route(conn, &mut state, env, &out),
            Ok(None) => break,
            // the frame was consumed whole, so the stream is still in sync
            Err(e @ (WireError::Malformed(_) | WireError::InvalidUtf8(_))) => Some(e.to_string()),
            Err(e) => {
                if !ctx.stopped() {
                    log::warn!("client {conn}: {e}; closing");
                }
                break;
            }
        };
        if let Some(reason) = refused {
            let _ = out.try_send(WireMessage::Reject { reason });
        }
    }
    let _ = ctx.events.send(ConnEvent::Closed { conn });
}

fn websocket(conn: u32, stream: TcpStream, out_tx: Sender<WireMessage>, out_rx: Receiver<WireMessage>, ctx: NetContext) {
    let mut ws = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(e) => {
            log::warn!("client {conn}: websocket handshake failed: {e}");
            return;
        }
    };
    if ws.get_ref().set_read_timeout(Some(POLL)).is_err() {
        return;
    }
    let mut state = ReaderState::default();
    let mut counter = SequenceCounter::default();
    'conn: while !ctx.stopped() {
        match ws.read() {
            Ok(Message::Text(text)) => {
                let refused = match decode_envelope(&text) {
                    Ok(env) => ctx.route(conn, &mut state, env, &out_tx),
                    Err(e) => Some(e.to_string()),
                };
                if let Some(reason) = refused {
                    let _ = out_tx.try_send(WireMessage::Reject { reason });
                }
            }
            Ok(Message::Binary(_)) => {
                let _ = out_tx.try_send(WireMessage::Reject {
                    reason: "binary messages are not accepted".into(),
                });
            }
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(_) => break,
        }
        for msg in out_rx.try_iter() {
            let text = encode_envelope(&counter.wrap(msg));
            if ws.send(Message::text(text)).is_err() {
                break 'conn;
            }
        }
    }
    let _ = ctx.events.send(ConnEvent::Closed { conn });
}

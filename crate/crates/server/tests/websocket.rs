mod common;

use std::net::TcpStream;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use roadsense_core::agent_brain::MockProvider;
use roadsense_core::director::Control;
use roadsense_core::domain::SessionPhase;
use roadsense_server::live::{bind, serve, Listeners};
use roadsense_server::tts::NullTts;
use roadsense_server::wire::{decode_envelope, encode_envelope, Envelope, Role, WireMessage};
use tungstenite::{Message, WebSocket};

fn send(ws: &mut WebSocket<TcpStream>, seq: u64, message: WireMessage) {
    ws.send(Message::text(encode_envelope(&Envelope { seq, message }))).unwrap();
}

#[test]
fn websocket_clients_speak_the_same_envelopes() {
    let dir = tempfile::tempdir().unwrap();
    let opts = common::options(dir.path(), 8, Duration::from_millis(5));
    let tcp = bind("127.0.0.1:0").unwrap();
    let ws_listener = bind("127.0.0.1:0").unwrap();
    let ws_addr = ws_listener.local_addr().unwrap();
    let stop = Arc::new(AtomicBool::new(false));
    let s = stop.clone();
    let server = thread::spawn(move || {
        serve(
            opts,
            Arc::new(MockProvider::new(8)),
            Arc::new(NullTts),
            Listeners { tcp, ws: Some(ws_listener) },
            s,
        )
    });

    let (mut ws, _) = tungstenite::client(format!("ws://{ws_addr}"), TcpStream::connect(ws_addr).unwrap()).unwrap();
    send(&mut ws, 1, WireMessage::ClientHello { nickname: "Wes".into(), role: Role::Participant });
    send(&mut ws, 2, WireMessage::Control { control: Control::Start });
    ws.send(Message::text("not json")).unwrap();

    let deadline = Instant::now() + Duration::from_secs(10);
    let (mut training, mut rejected, mut last_seq) = (false, false, 0);
    while Instant::now() < deadline && !(training && rejected) {
        let Message::Text(text) = ws.read().unwrap() else { continue };
        let env = decode_envelope(&text).unwrap();
        assert!(env.seq > last_seq);
        last_seq = env.seq;
        match env.message {
            WireMessage::StateDelta { phase: SessionPhase::Training, .. } => training = true,
            WireMessage::Reject { .. } => rejected = true,
            _ => {}
        }
    }
    assert!(training && rejected);
    stop.store(true, std::sync::atomic::Ordering::SeqCst);
    let report = server.join().unwrap().unwrap();
    assert_eq!(report.summary.total, 0);
}

use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam_channel::{bounded, Receiver, Sender, TryRecvError, TrySendError};
use serde_json::Value;

use super::control::{
    ack_line, banner, error_line, meters_event_line, parse_request, pong_line, state_line, subscribed_line, Request,
};
use super::session::{MeterSnapshot, Session};

const CLIENT_QUEUE: usize = 256;

/// A request forwarded to the real-time loop, with the client's outbound
/// line queue for the reply.
#[derive(Debug)]
pub struct ClientMsg {
    pub id: Option<Value>,
    pub request: Request,
    pub reply: Sender<String>,
}

/// TCP endpoint for control protocol v1. Client I/O runs on its own
/// threads; requests reach the session only through [`ControlServer::requests`].
pub struct ControlServer {
    local: SocketAddr,
    rx: Receiver<ClientMsg>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
    subscribers: Vec<Sender<String>>,
}

impl ControlServer {
    pub fn bind(addr: &str) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let local = listener.local_addr()?;
        let (tx, rx) = bounded(1024);
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let thread = std::thread::Builder::new().name("control-accept".into()).spawn(move || {
            while !flag.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, peer)) => {
                        log::info!("control client {peer} connected");
                        if let Err(e) = spawn_client(stream, tx.clone(), flag.clone()) {
                            log::warn!("control client {peer}: {e}");
                        }
                    }
                    Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(10)),
                    Err(e) => {
                        log::warn!("control accept failed: {e}");
                        std::thread::sleep(Duration::from_millis(50));
                    }
                }
            }
        })?;
        Ok(Self {
            local,
            rx,
            stop,
            thread: Some(thread),
            subscribers: Vec::new(),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local
    }

    pub fn requests(&self) -> &Receiver<ClientMsg> {
        &self.rx
    }

    /// Answers every queued request against `session`. Call between blocks.
    pub fn serve_pending(&mut self, session: &mut Session) {
        loop {
            let m = match self.rx.try_recv() {
                Ok(m) => m,
                Err(TryRecvError::Empty) | Err(TryRecvError::Disconnected) => return,
            };
            let line = match &m.request {
                Request::Ping => pong_line(&m.id),
                Request::State => state_line(&m.id, &session.meters()),
                Request::Subscribe => {
                    self.subscribers.push(m.reply.clone());
                    subscribed_line(&m.id)
                }
                Request::Command(c) => match session.apply_control(c, "tcp") {
                    Ok(ack) => ack_line(&m.id, &ack),
                    Err(e) => error_line(&m.id, &e),
                },
            };
            let _ = m.reply.try_send(line);
        }
    }

    /// Pushes a meter event to subscribers, forgetting closed ones. A full
    /// client queue skips that client for this snapshot.
    pub fn broadcast_meters(&mut self, snap: &MeterSnapshot) {
        if self.subscribers.is_empty() {
            return;
        }
        let line = meters_event_line(snap);
        self.subscribers
            .retain(|s| !matches!(s.try_send(line.clone()), Err(TrySendError::Disconnected(_))));
    }
}

impl Drop for ControlServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn spawn_client(stream: TcpStream, to_session: Sender<ClientMsg>, stop: Arc<AtomicBool>) -> std::io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(Duration::from_millis(100)))?;
    let _ = stream.set_nodelay(true);
    let mut writer = stream.try_clone()?;
    let (out_tx, out_rx) = bounded::<String>(CLIENT_QUEUE);
    out_tx
        .try_send(banner())
        .expect("fresh queue has room");
    let wstop = stop.clone();
    std::thread::Builder::new().name("control-write".into()).spawn(move || {
        while !wstop.load(Ordering::Relaxed) {
            match out_rx.recv_timeout(Duration::from_millis(100)) {
                Ok(line) => {
                    if writer.write_all(line.as_bytes()).and_then(|_| writer.write_all(b"\n")).is_err() {
                        return;
                    }
                    let _ = writer.flush();
                }
                Err(crossbeam_channel::RecvTimeoutError::Timeout) => {}
                Err(_) => return,
            }
        }
    })?;
    std::thread::Builder::new().name("control-read".into()).spawn(move || {
        let mut reader = BufReader::new(stream);
        let mut line = String::new();
        while !stop.load(Ordering::Relaxed) {
            match reader.read_line(&mut line) {
                Ok(0) => return,
                Ok(_) => {
                    let text = line.trim();
                    if !text.is_empty() {
                        let (id, req) = parse_request(text);
                        match req {
                            Ok(Request::Ping) => {
                                let _ = out_tx.try_send(pong_line(&id));
                            }
                            Ok(request) => {
                                let msg = ClientMsg { id, request, reply: out_tx.clone() };
                                if to_session.try_send(msg).is_err() {
                                    let e = super::ControlError::BadRequest("server busy".into());
                                    let _ = out_tx.try_send(error_line(&None, &e));
                                }
                            }
                            Err(e) => {
                                let _ = out_tx.try_send(error_line(&id, &e));
                            }
                        }
                    }
                    line.clear();
                }
                // a timeout may leave a partial line buffered; keep it
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
                Err(_) => return,
            }
        }
    })?;
    Ok(())
}

use std::collections::HashMap;
use std::io::{self, BufWriter, Write};
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam_channel::{bounded, Receiver, Sender, TrySendError};

use super::osc::{decode, OscError, OscPacket};
use super::{NetError, RoutingConfig};

/// Per-destination outbound queue bound; beyond it packets are dropped.
pub const QUEUE_CAPACITY: usize = 1024;

/// Destination for encoded packets. Implementations never block the caller
/// on the network.
pub trait PacketSink: Send {
    fn send(&mut self, dest: &str, packet: &[u8]);
    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
    /// Packets discarded so far.
    fn dropped(&self) -> u64 {
        0
    }
}

/// Capture record: u16 BE destination length, destination (UTF-8),
/// u32 BE packet length, packet bytes.
pub fn write_capture_record(w: &mut impl Write, dest: &str, packet: &[u8]) -> io::Result<()> {
    w.write_all(&(dest.len() as u16).to_be_bytes())?;
    w.write_all(dest.as_bytes())?;
    w.write_all(&(packet.len() as u32).to_be_bytes())?;
    w.write_all(packet)
}

pub fn read_capture(bytes: &[u8]) -> Result<Vec<(String, Vec<u8>)>, NetError> {
    let mut out = Vec::new();
    let mut pos = 0;
    let err = |offset: usize, reason: &str| NetError::Capture {
        offset,
        reason: reason.to_string(),
    };
    while pos < bytes.len() {
        let take = |pos: usize, n: usize| bytes.get(pos..pos + n).ok_or_else(|| err(pos, "truncated record"));
        let dl = u16::from_be_bytes(take(pos, 2)?.try_into().unwrap()) as usize;
        let dest = std::str::from_utf8(take(pos + 2, dl)?).map_err(|_| err(pos + 2, "destination is not UTF-8"))?;
        let pl_at = pos + 2 + dl;
        let pl = u32::from_be_bytes(take(pl_at, 4)?.try_into().unwrap()) as usize;
        let packet = take(pl_at + 4, pl)?.to_vec();
        out.push((dest.to_string(), packet));
        pos = pl_at + 4 + pl;
    }
    Ok(out)
}

/// Records every packet to a capture stream.
pub struct CaptureSink<W: Write + Send> {
    w: BufWriter<W>,
    error: Option<io::Error>,
}

impl<W: Write + Send> CaptureSink<W> {
    pub fn new(w: W) -> Self {
        Self {
            w: BufWriter::new(w),
            error: None,
        }
    }
}

impl<W: Write + Send> PacketSink for CaptureSink<W> {
    fn send(&mut self, dest: &str, packet: &[u8]) {
        if self.error.is_none() {
            if let Err(e) = write_capture_record(&mut self.w, dest, packet) {
                self.error = Some(e);
            }
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.w.flush()
    }
}

/// Keeps packets in memory.
#[derive(Debug, Default, Clone)]
pub struct MemorySink {
    pub packets: Vec<(String, Vec<u8>)>,
}

impl PacketSink for MemorySink {
    fn send(&mut self, dest: &str, packet: &[u8]) {
        self.packets.push((dest.to_string(), packet.to_vec()));
    }
}

/// Fans each packet out to several sinks.
#[derive(Default)]
pub struct TeeSink(pub Vec<Box<dyn PacketSink>>);

impl PacketSink for TeeSink {
    fn send(&mut self, dest: &str, packet: &[u8]) {
        for s in &mut self.0 {
            s.send(dest, packet);
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        for s in &mut self.0 {
            s.flush()?;
        }
        Ok(())
    }

    fn dropped(&self) -> u64 {
        self.0.iter().map(|s| s.dropped()).sum()
    }
}

struct Lane {
    tx: Option<Sender<Vec<u8>>>,
    thread: Option<JoinHandle<()>>,
}

/// UDP unicast with one sender thread and bounded queue per destination.
pub struct UdpSink {
    socket: Arc<UdpSocket>,
    lanes: HashMap<String, Lane>,
    dropped: Arc<AtomicU64>,
    capacity: usize,
}

impl UdpSink {
    pub fn new() -> Result<Self, NetError> {
        Self::with_capacity(QUEUE_CAPACITY)
    }

    pub fn with_capacity(capacity: usize) -> Result<Self, NetError> {
        let socket = UdpSocket::bind("0.0.0.0:0")?;
        Ok(Self {
            socket: Arc::new(socket),
            lanes: HashMap::new(),
            dropped: Arc::new(AtomicU64::new(0)),
            capacity,
        })
    }

    fn lane(&mut self, dest: &str) -> &mut Lane {
        let socket = self.socket.clone();
        let dropped = self.dropped.clone();
        let capacity = self.capacity;
        self.lanes.entry(dest.to_string()).or_insert_with(|| {
            let addr: Option<SocketAddr> = match RoutingConfig::resolve(dest) {
                Ok(a) => Some(a),
                Err(e) => {
                    log::warn!("dropping traffic to {dest}: {e}");
                    None
                }
            };
            let Some(addr) = addr else {
                return Lane { tx: None, thread: None };
            };
            let (tx, rx) = bounded::<Vec<u8>>(capacity);
            let thread = std::thread::Builder::new()
                .name(format!("udp-{dest}"))
                .spawn(move || {
                    for p in rx {
                        if socket.send_to(&p, addr).is_err() {
                            dropped.fetch_add(1, Ordering::Relaxed);
                        }
                    }
                })
                .expect("spawn sender thread");
            Lane {
                tx: Some(tx),
                thread: Some(thread),
            }
        })
    }
}

impl PacketSink for UdpSink {
    fn send(&mut self, dest: &str, packet: &[u8]) {
        let dropped = self.dropped.clone();
        let lane = self.lane(dest);
        let ok = match &lane.tx {
            Some(tx) => match tx.try_send(packet.to_vec()) {
                Ok(()) => true,
                Err(TrySendError::Full(_)) | Err(TrySendError::Disconnected(_)) => false,
            },
            None => false,
        };
        if !ok {
            dropped.fetch_add(1, Ordering::Relaxed);
        }
    }

    fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }
}

impl Drop for UdpSink {
    fn drop(&mut self) {
        for lane in self.lanes.values_mut() {
            lane.tx.take();
            if let Some(t) = lane.thread.take() {
                let _ = t.join();
            }
        }
    }
}

/// A datagram received by [`OscReceiver`].
#[derive(Debug, Clone, PartialEq)]
pub struct Received {
    pub from: SocketAddr,
    pub packet: Result<OscPacket, OscError>,
}

/// Receive loop on its own thread; decoded packets arrive in order on
/// [`OscReceiver::packets`].
pub struct OscReceiver {
    local: SocketAddr,
    rx: Receiver<Received>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl OscReceiver {
    pub fn bind(addr: &str) -> Result<Self, NetError> {
        let socket = UdpSocket::bind(addr)?;
        socket.set_read_timeout(Some(Duration::from_millis(50)))?;
        let local = socket.local_addr()?;
        let (tx, rx) = bounded(QUEUE_CAPACITY);
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let thread = std::thread::Builder::new()
            .name("osc-recv".into())
            .spawn(move || {
                let mut buf = vec![0u8; 65_536];
                while !flag.load(Ordering::Relaxed) {
                    match socket.recv_from(&mut buf) {
                        Ok((n, from)) => {
                            let r = Received {
                                from,
                                packet: decode(&buf[..n]),
                            };
                            if tx.send(r).is_err() {
                                break;
                            }
                        }
                        Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
                        Err(e) => {
                            log::warn!("OSC receive failed: {e}");
                            break;
                        }
                    }
                }
            })?;
        Ok(Self {
            local,
            rx,
            stop,
            thread: Some(thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local
    }

    pub fn packets(&self) -> &Receiver<Received> {
        &self.rx
    }
}

impl Drop for OscReceiver {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use super::control::command_from_osc;
use super::server::ControlServer;
use super::session::{AgentResources, Session};
use super::simulate::{response_file, EVENT_LOG_FILE};
use super::{ConductorError, SessionConfig};
use crate::agents::render;
use crate::corpus::{load_engine_audio, write_wav_f32};
use crate::netio::{OscReceiver, PacketSink, UdpSink};

/// Seconds between the NTP epoch (1900) and the Unix epoch.
const NTP_UNIX_OFFSET_S: f64 = 2_208_988_800.0;

#[derive(Debug, Clone)]
pub struct LiveOptions {
    /// TCP address for control protocol v1.
    pub control_addr: String,
    /// Performer signal; silence when absent. There is no audio device
    /// layer, so live input is a file played at the wall-clock pace.
    pub input: Option<PathBuf>,
    pub loop_input: bool,
    /// Pace multiplier; 1 is real time.
    pub speed: f64,
    /// Event log and response WAVs are written here when set.
    pub out: Option<PathBuf>,
    /// Stop after this much session time.
    pub max_seconds: Option<f64>,
}

impl Default for LiveOptions {
    fn default() -> Self {
        Self {
            control_addr: "127.0.0.1:7400".into(),
            input: None,
            loop_input: false,
            speed: 1.0,
            out: None,
            max_seconds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiveSummary {
    pub blocks: u64,
    pub late_blocks: u64,
    pub dropped_packets: u64,
}

/// Addresses the live session is reachable on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiveEndpoints {
    pub control: SocketAddr,
    pub osc: Option<SocketAddr>,
}

/// Runs a session paced by wall clock until `stop` is set. `ready` is
/// called once every socket is bound.
pub fn run_live(
    cfg: SessionConfig,
    resources: Vec<AgentResources>,
    opts: &LiveOptions,
    stop: Arc<AtomicBool>,
    ready: impl FnOnce(LiveEndpoints),
) -> Result<LiveSummary, ConductorError> {
    let sr = cfg.sample_rate;
    let n = cfg.block_size;
    let input = match &opts.input {
        Some(p) => load_engine_audio(p, sr).map_err(|e| ConductorError::Io(e.to_string()))?.1,
        None => Vec::new(),
    };
    let mut server = ControlServer::bind(&opts.control_addr)
        .map_err(|e| ConductorError::Io(format!("control endpoint {}: {e}", opts.control_addr)))?;
    let osc_in = match &cfg.routing.osc_listen {
        Some(a) => Some(OscReceiver::bind(a).map_err(|e| ConductorError::Io(format!("OSC listen {a}: {e}")))?),
        None => None,
    };
    let mut udp = UdpSink::new().map_err(|e| ConductorError::Io(e.to_string()))?;
    let artnet = cfg.routing.artnet.clone();
    let mut log = match &opts.out {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            Some(BufWriter::new(File::create(d.join(EVENT_LOG_FILE))?))
        }
        None => None,
    };
    let stores: Vec<_> = resources.iter().map(|r| r.store.clone()).collect();
    let origin = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0) + NTP_UNIX_OFFSET_S;
    let mut session = Session::new(cfg, resources, origin)?;
    ready(LiveEndpoints {
        control: server.local_addr(),
        osc: osc_in.as_ref().map(|r| r.local_addr()),
    });

    let block_dur = Duration::from_secs_f64(n as f64 / sr as f64 / opts.speed.max(1e-3));
    let start = Instant::now();
    let mut late = 0;
    let mut block = vec![0.0f32; n];
    let write_log = |recs: &[super::LogRecord], log: &mut Option<BufWriter<File>>| {
        if let Some(w) = log {
            for r in recs {
                let _ = writeln!(w, "{}", r.to_line());
            }
        }
    };
    while !stop.load(Ordering::Relaxed) {
        if opts.max_seconds.is_some_and(|m| session.clock_s() >= m) {
            break;
        }
        let k = session.blocks_done();
        let due = start + block_dur.mul_f64(k as f64);
        let now = Instant::now();
        if due > now {
            std::thread::sleep(due - now);
        } else if now - due > block_dur {
            late += 1;
        }

        server.serve_pending(&mut session);
        if let Some(rx) = &osc_in {
            while let Ok(r) = rx.packets().try_recv() {
                match r.packet {
                    Ok(p) => {
                        for m in p.messages() {
                            match command_from_osc(m) {
                                Some(Ok(c)) => {
                                    if let Err(e) = session.apply_control(&c, "osc") {
                                        log::warn!("OSC control from {}: {e}", r.from);
                                    }
                                }
                                Some(Err(e)) => log::warn!("OSC control from {}: {e}", r.from),
                                None => {}
                            }
                        }
                    }
                    Err(e) => log::warn!("malformed OSC from {}: {e}", r.from),
                }
            }
        }

        block.fill(0.0);
        if !input.is_empty() {
            for (j, s) in block.iter_mut().enumerate() {
                let pos = k as usize * n + j;
                *s = if opts.loop_input { input[pos % input.len()] } else { input.get(pos).copied().unwrap_or(0.0) };
            }
        }
        let inputs: Vec<&[f32]> = (0..session.config().inputs.len())
            .map(|i| if i == 0 { &block[..] } else { &[][..] })
            .collect();
        let o = session.advance(&inputs);
        for (d, p) in &o.osc {
            udp.send(d, p);
        }
        if let Some(a) = &artnet {
            for p in &o.dmx {
                udp.send(a, p);
            }
        }
        if let Some(m) = &o.meters {
            server.broadcast_meters(m);
            if let Some(w) = &mut log {
                let _ = w.flush();
            }
        }
        write_log(&o.log, &mut log);
    }

    server.serve_pending(&mut session);
    let mut recs = session.take_log();
    recs.extend(session.finish().log);
    write_log(&recs, &mut log);
    if let Some(mut w) = log {
        w.flush()?;
    }
    if let Some(d) = &opts.out {
        for ((id, plan), store) in session.plans().into_iter().zip(&stores) {
            let r = render(plan, store, sr).map_err(|e| ConductorError::Io(format!("render {id}: {e}")))?;
            write_wav_f32(&d.join(response_file(id)), r.audio.samples(), sr).map_err(|e| ConductorError::Io(e.to_string()))?;
        }
    }
    Ok(LiveSummary {
        blocks: session.blocks_done(),
        late_blocks: late,
        dropped_packets: udp.dropped(),
    })
}

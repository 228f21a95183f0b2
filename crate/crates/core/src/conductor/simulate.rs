use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::session::{AgentResources, Session};
use super::{ConductorError, SessionConfig};
use crate::agents::render;
use crate::corpus::write_wav_f32;
use crate::netio::{write_capture_record, PacketSink};

pub const EVENT_LOG_FILE: &str = "events.jsonl";
pub const OSC_CAPTURE_FILE: &str = "osc.cap";
pub const DMX_CAPTURE_FILE: &str = "dmx.cap";

/// Response WAV name for an agent.
pub fn response_file(agent: &str) -> String {
    format!("response_{agent}.wav")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateReport {
    pub blocks: u64,
    pub segments_heard: usize,
    /// `(agent, events, clipped samples)`.
    pub agents: Vec<(String, usize, usize)>,
    pub osc_packets: usize,
    pub dmx_packets: usize,
    pub files: Vec<PathBuf>,
}

/// Runs a whole session over `inputs` (one signal per configured input,
/// at the session rate) and writes the event log, captures and one
/// response WAV per agent into `out`. Extra sinks see every OSC packet.
pub fn simulate(
    cfg: SessionConfig,
    resources: Vec<AgentResources>,
    inputs: &[Vec<f32>],
    out: &Path,
    mut extra: Option<&mut dyn PacketSink>,
) -> Result<SimulateReport, ConductorError> {
    if inputs.len() != cfg.inputs.len() {
        return Err(ConductorError::Config(vec![format!(
            "{} input signals for {} configured inputs",
            inputs.len(),
            cfg.inputs.len()
        )]));
    }
    std::fs::create_dir_all(out)?;
    let stores: Vec<_> = resources.iter().map(|r| r.store.clone()).collect();
    let sr = cfg.sample_rate;
    let n = cfg.block_size;
    let artnet = cfg.routing.artnet.clone().unwrap_or_else(|| "artnet".into());
    let mut session = Session::new(cfg, resources, 0.0)?;
    let io = |e: std::io::Error, f: &str| ConductorError::Io(format!("{}: {e}", out.join(f).display()));
    let mut log = BufWriter::new(File::create(out.join(EVENT_LOG_FILE)).map_err(|e| io(e, EVENT_LOG_FILE))?);
    let mut osc = BufWriter::new(File::create(out.join(OSC_CAPTURE_FILE)).map_err(|e| io(e, OSC_CAPTURE_FILE))?);
    let mut dmx = BufWriter::new(File::create(out.join(DMX_CAPTURE_FILE)).map_err(|e| io(e, DMX_CAPTURE_FILE))?);

    let total = inputs.iter().map(Vec::len).max().unwrap_or(0);
    let blocks = total.div_ceil(n);
    let mut report = SimulateReport {
        blocks: 0,
        segments_heard: 0,
        agents: Vec::new(),
        osc_packets: 0,
        dmx_packets: 0,
        files: Vec::new(),
    };
    let mut write_out = |o: super::BlockOutput, report: &mut SimulateReport| -> std::io::Result<()> {
        for r in &o.log {
            if r.kind == "segment_ended" {
                report.segments_heard += 1;
            }
            writeln!(log, "{}", r.to_line())?;
        }
        for (d, p) in &o.osc {
            write_capture_record(&mut osc, d, p)?;
            if let Some(s) = extra.as_deref_mut() {
                s.send(d, p);
            }
        }
        for p in &o.dmx {
            write_capture_record(&mut dmx, &artnet, p)?;
        }
        report.osc_packets += o.osc.len();
        report.dmx_packets += o.dmx.len();
        Ok(())
    };
    for b in 0..blocks {
        let blocks_in: Vec<&[f32]> = inputs
            .iter()
            .map(|x| {
                let s = (b * n).min(x.len());
                &x[s..((b + 1) * n).min(x.len())]
            })
            .collect();
        let o = session.advance(&blocks_in);
        write_out(o, &mut report).map_err(|e| io(e, EVENT_LOG_FILE))?;
    }
    let o = session.finish();
    write_out(o, &mut report).map_err(|e| io(e, EVENT_LOG_FILE))?;
    for w in [&mut log as &mut dyn Write, &mut osc, &mut dmx] {
        w.flush()?;
    }
    report.blocks = session.blocks_done();
    report.files = [EVENT_LOG_FILE, OSC_CAPTURE_FILE, DMX_CAPTURE_FILE].iter().map(|f| out.join(f)).collect();

    let session_len = blocks * n;
    for ((id, plan), store) in session.plans().into_iter().zip(&stores) {
        let r = render(plan, store, sr).map_err(|e| ConductorError::Io(format!("render {id}: {e}")))?;
        let mut audio = r.audio.into_samples();
        if audio.len() < session_len {
            audio.resize(session_len, 0.0);
        }
        let path = out.join(response_file(id));
        write_wav_f32(&path, &audio, sr).map_err(|e| ConductorError::Io(e.to_string()))?;
        report.agents.push((id.to_string(), plan.len(), r.clipped_samples));
        report.files.push(path);
    }
    Ok(report)
}

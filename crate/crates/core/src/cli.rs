//! Command-line entry points. Exit codes: 0 success, 1 usage error,
//! 2 runtime error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::conductor::{self, load_resources, LiveOptions, SessionConfig};
use crate::corpus::{build_corpus, load_corpus, load_engine_audio, save_corpus, LoadOptions};
use crate::listening::{AffectModel, SegmenterConfig};
use crate::models::{save_models, train_models, TrainOptions};
use crate::netio::{decode, read_capture, OscReceiver};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "improv", version, about = "Co-creative musical agents: corpus building, training, sessions and show-control I/O")]
pub struct Cli {
    /// Seed for every random choice; runs with equal seeds are identical.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment and annotate WAV files into a corpus directory.
    Corpus(CorpusArgs),
    /// Train the SOM, symbol sequences, VMM and factor oracle of a corpus.
    Train(TrainArgs),
    /// Run a session offline over input WAVs.
    Simulate(SimulateArgs),
    /// Run a live session with the control endpoint until interrupted.
    Serve(ServeArgs),
    /// Print decoded OSC packets from a UDP port or a capture file.
    Oscdump(OscdumpArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Input WAV files (PCM 16/24-bit or 32-bit float).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Copy source audio into the corpus directory.
    #[arg(long)]
    pub bundle: bool,
    #[arg(long, default_value_t = -60.0, allow_negative_numbers = true)]
    pub threshold_db: f64,
    #[arg(long, default_value_t = 0.25)]
    pub min_segment_s: f64,
    #[arg(long, default_value_t = 8.0)]
    pub max_segment_s: f64,
    /// Quiet blocks tolerated inside a segment.
    #[arg(long, default_value_t = 4)]
    pub hangover: u32,
    /// Affect model TOML (the bundled model otherwise).
    #[arg(long)]
    pub affect_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub corpus: PathBuf,
    /// SOM grid as WxH; sized from the corpus when absent.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<(usize, usize)>,
    #[arg(long, default_value_t = 50)]
    pub epochs: u32,
    #[arg(long, default_value_t = 0.5)]
    pub learning_rate: f64,
    #[arg(long)]
    pub neighborhood: Option<f64>,
    /// Longest VMM context.
    #[arg(long, default_value_t = 3)]
    pub max_order: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// One WAV per configured live input, in order.
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Control protocol v1 endpoint.
    #[arg(long, default_value = "127.0.0.1:7400")]
    pub control: String,
    /// Performer WAV played at real-time pace (silence when absent).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long = "loop")]
    pub loop_input: bool,
    /// Event log and response WAVs are written here on shutdown.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Stop after this many seconds of session time.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Pace multiplier (1 = real time).
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
}

#[derive(Debug, Args)]
pub struct OscdumpArgs {
    /// UDP port to listen on.
    #[arg(long, required_unless_present = "capture", conflicts_with = "capture")]
    pub port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
    /// Read a capture file written by `simulate` instead of listening.
    #[arg(long)]
    pub capture: Option<PathBuf>,
    /// Exit after this many packets.
    #[arg(long)]
    pub count: Option<usize>,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("grid must look like 8x8")?;
    let w: usize = w.parse().map_err(|_| "grid width must be a positive integer")?;
    let h: usize = h.parse().map_err(|_| "grid height must be a positive integer")?;
    if w == 0 || h == 0 {
        return Err("grid sides must be positive".into());
    }
    Ok((w, h))
}

/// Parses `args` (including the program name) and runs; returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Corpus(a) => cmd_corpus(a),
        Command::Train(a) => cmd_train(a, seed.unwrap_or(0)),
        Command::Simulate(a) => cmd_simulate(a, seed),
        Command::Serve(a) => cmd_serve(a, seed),
        Command::Oscdump(a) => cmd_oscdump(a),
    }
}

fn cmd_corpus(a: CorpusArgs) -> Result<()> {
    let affect = match &a.affect_model {
        Some(p) => AffectModel::load(p).with_context(|| format!("affect model {}", p.display()))?,
        None => AffectModel::bundled_default(),
    };
    let seg = SegmenterConfig {
        silence_threshold_db: a.threshold_db,
        min_segment_s: a.min_segment_s,
        max_segment_s: a.max_segment_s,
        hangover_frames: a.hangover,
    };
    seg.validate()?;
    let corpus = build_corpus(&a.inputs, seg, &affect)?;
    save_corpus(&corpus, &a.out, a.bundle)?;
    println!(
        "{} segments from {} file(s), {} features each -> {}",
        corpus.len(),
        corpus.sources.len(),
        crate::listening::FEATURE_DIMS,
        a.out.display()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs, seed: u64) -> Result<()> {
    let mut corpus = load_corpus(&a.corpus, &LoadOptions::default())
        .with_context(|| format!("corpus {}", a.corpus.display()))?;
    let opts = TrainOptions {
        grid: a.grid,
        epochs: a.epochs,
        seed,
        learning_rate: a.learning_rate,
        neighborhood: a.neighborhood,
        max_order: a.max_order,
    };
    let (models, report) = train_models(&mut corpus, &opts)?;
    save_models(&a.corpus, &corpus, &models, &opts, &report)?;
    println!(
        "grid {}x{}, {} segments, QE before {:.6} after {:.6}, oracle {} states",
        report.grid.0,
        report.grid.1,
        corpus.len(),
        report.qe_before,
        report.qe_after,
        models.oracle.num_states()
    );
    Ok(())
}

fn load_session(path: &PathBuf, seed: Option<u64>) -> Result<(SessionConfig, Vec<conductor::AgentResources>)> {
    let mut cfg = SessionConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let res = load_resources(&cfg)?;
    Ok((cfg, res))
}

fn cmd_simulate(a: SimulateArgs, seed: Option<u64>) -> Result<()> {
    let (cfg, res) = load_session(&a.config, seed)?;
    if a.input.len() != cfg.inputs.len() {
        bail!("{} --input files for {} configured inputs {:?}", a.input.len(), cfg.inputs.len(), cfg.inputs);
    }
    let inputs = a
        .input
        .iter()
        .map(|p| load_engine_audio(p, cfg.sample_rate).map(|(_, s)| s).with_context(|| p.display().to_string()))
        .collect::<Result<Vec<_>>>()?;
    let r = conductor::simulate(cfg, res, &inputs, &a.out, None)?;
    println!(
        "{} blocks, {} segments heard, {} OSC packets, {} DMX frames",
        r.blocks, r.segments_heard, r.osc_packets, r.dmx_packets
    );
    for (id, n, clipped) in &r.agents {
        println!("  {id}: {n} events, {clipped} samples soft-clipped");
    }
    println!("outputs in {}", a.out.display());
    Ok(())
}

fn cmd_serve(a: ServeArgs, seed: Option<u64>) -> Result<()> {
    let (cfg, res) = load_session(&a.config, seed)?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    ctrlc::set_handler(move || flag.store(true, Ordering::Relaxed)).context("installing the signal handler")?;
    let opts = LiveOptions {
        control_addr: a.control,
        input: a.input,
        loop_input: a.loop_input,
        speed: a.speed,
        out: a.out,
        max_seconds: a.duration,
    };
    let summary = conductor::run_live(cfg, res, &opts, stop, |ep| {
        println!("control listening on {}", ep.control);
        if let Some(o) = ep.osc {
            println!("osc listening on {o}");
        }
        let _ = std::io::stdout().flush();
    })?;
    println!(
        "stopped after {} blocks ({} late, {} packets dropped)",
        summary.blocks, summary.late_blocks, summary.dropped_packets
    );
    Ok(())
}

fn print_packet(bytes: &[u8], out: &mut impl Write) -> std::io::Result<()> {
    match decode(bytes) {
        Ok(p) => write!(out, "{}", p.pretty()),
        Err(e) => writeln!(out, "error: {e}"),
    }
}

fn cmd_oscdump(a: OscdumpArgs) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let limit = a.count.unwrap_or(usize::MAX);
    if let Some(path) = &a.capture {
        let bytes = std::fs::read(path).with_context(|| path.display().to_string())?;
        for (dest, p) in read_capture(&bytes)?.iter().take(limit) {
            writeln!(out, "-> {dest}")?;
            print_packet(p, &mut out)?;
        }
        return Ok(());
    }
    let port = a.port.ok_or_else(|| anyhow!("--port or --capture is required"))?;
    let rx = OscReceiver::bind(&format!("{}:{port}", a.bind))?;
    writeln!(out, "listening on {}", rx.local_addr())?;
    out.flush()?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::Relaxed)) {
        log::warn!("no signal handler: {e}");
    }
    let mut seen = 0;
    while seen < limit && !stop.load(Ordering::Relaxed) {
        if let Ok(r) = rx.packets().recv_timeout(Duration::from_millis(100)) {
            match r.packet {
                Ok(p) => write!(out, "{}", p.pretty())?,
                Err(e) => writeln!(out, "error: {e}")?,
            }
            out.flush()?;
            seen += 1;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_1_and_help_exits_0() {
        assert_eq!(run(["improv", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["improv", "train"]), EXIT_USAGE);
        assert_eq!(run(["improv", "train", "x", "--grid", "0x3"]), EXIT_USAGE);
        assert_eq!(run(["improv", "--help"]), EXIT_OK);
        for sub in ["corpus", "train", "simulate", "serve", "oscdump"] {
            assert_eq!(run(["improv", sub, "--help"]), EXIT_OK, "{sub}");
        }
    }

    #[test]
    fn grid_parser() {
        assert_eq!(parse_grid("8x6"), Ok((8, 6)));
        assert_eq!(parse_grid("1X1"), Ok((1, 1)));
        assert!(parse_grid("8").is_err());
        assert!(parse_grid("ax2").is_err());
    }
}

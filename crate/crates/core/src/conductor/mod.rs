//! Session runtime: scenes and ramps, the block clock, wiring from live
//! inputs through agents to rendered audio and network outputs, and the
//! operator control surface.
//!
//! A [`Session`] is single-owner state advanced one block (512 samples) at
//! a time. Simulate mode drives it from files as fast as possible; live
//! mode paces it by wall clock. Both use the same `advance`.
//!
//! Session config (TOML):
//!
//! ```toml
//! sample_rate = 48000      # must match every corpus
//! block_size = 512         # must equal the analysis hop
//! seed = 7
//! inputs = ["performer"]
//!
//! [[agents]]
//! id = "muse"
//! kind = "spiremuse"       # or "masom", "macat"
//! corpus = "corpus"        # relative to the config file
//! influence = { rhythmic = 1.0, spectral = 1.0, melodic = 1.0, harmonic = 1.0 }
//!
//! [routing]
//! feature_rate_hz = 30
//! meter_rate_hz = 10
//! artnet = "127.0.0.1:6454"
//! osc_listen = "127.0.0.1:9100"
//! [routing.destinations]
//! performer = ["127.0.0.1:9000"]
//!
//! [[dmx.entries]]
//! source = "performer"
//! feature = "loudness"     # centroid, { bark = 3 }, valence, arousal
//! channel = 1
//! range = [-120.0, 0.0]
//!
//! [[scenes]]
//! name = "intro"
//! duration_s = 20          # 0 waits for trigger_scene
//! [scenes.agents.muse]
//! weights = [1.0, 0.2, 0.2, 0.2]
//! [[scenes.ramps]]
//! path = "muse.weights.spectral"
//! from = 0.2
//! to = 1.0
//! start_s = 5
//! end_s = 15
//! ```
//!
//! The event log is JSON lines, one [`LogRecord`] per line:
//! `{"t":1.2053,"block":113,"source":"performer","kind":"segment_ended","payload":{..}}`.
//! Kinds are `session_started`, `scene_changed`, `segment_ended`, `plan`,
//! `control` and `session_ended`.

mod config;
pub mod control;
mod live;
mod server;
mod session;
mod simulate;

pub use config::{scene_value, AgentEntry, Param, ParamPath, Ramp, Scene, SceneAgentParams, SessionConfig, WEIGHT_NAMES};
pub use control::{command_from_osc, parse_request, Ack, Command, ControlError, Request, PROTOCOL_VERSION};
pub use live::{run_live, LiveEndpoints, LiveOptions, LiveSummary};
pub use server::{ClientMsg, ControlServer};
pub use session::{
    agent_seed, load_resources, AgentResources, AgentState, BlockOutput, LogRecord, MeterSnapshot, Session,
    SourceMeter,
};
pub use simulate::{
    response_file, simulate, SimulateReport, DMX_CAPTURE_FILE, EVENT_LOG_FILE, OSC_CAPTURE_FILE,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConductorError {
    #[error("session config invalid:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for ConductorError {
    fn from(e: std::io::Error) -> Self {
        ConductorError::Io(e.to_string())
    }
}

//! Wire protocols and routing: OSC codec, feature broadcast, DMX mapping
//! with ArtDMX framing, UDP transports and capture files.
//!
//! OSC address scheme:
//!
//! | address                              | args   | direction |
//! |--------------------------------------|--------|-----------|
//! | `/revival/features/<source>`         | 26 × f | out       |
//! | `/revival/meter/<source>`            | f f f f (loudness, centroid, valence, arousal; NaN when unknown) | out |
//! | `/revival/agent/<id>/weights`        | f f f f | in       |
//! | `/revival/agent/<id>/enable`         | i      | in        |
//! | `/revival/agent/<id>/density`        | f      | in        |
//! | `/revival/agent/<id>/continuity`     | f      | in        |
//! | `/revival/scene`                     | i      | in        |

mod broadcast;
mod dmx;
pub mod osc;
mod routing;
mod transport;

pub use broadcast::{feature_message, meter_message, RateTicker, FEATURE_ARGS};
pub use dmx::{
    artnet_packet, dmx_map, ArtNetFramer, Curve, DmxEntry, DmxMapping, FeatureSelector, ARTNET_HEADER_LEN,
    ARTNET_PORT, DMX_CHANNELS,
};
pub use osc::{decode, encode, OscArg, OscBundle, OscError, OscMessage, OscPacket, Timetag};
pub use routing::RoutingConfig;
pub use transport::{
    read_capture, write_capture_record, CaptureSink, MemorySink, OscReceiver, PacketSink, Received, TeeSink,
    UdpSink, QUEUE_CAPACITY,
};

use thiserror::Error;

pub const ADDRESS_PREFIX: &str = "/revival";

#[derive(Debug, Error)]
pub enum NetError {
    #[error("network config: {0}")]
    Config(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("capture file malformed at byte {offset}: {reason}")]
    Capture { offset: usize, reason: String },
}

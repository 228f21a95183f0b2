//! Interactive music system: audio analysis and listening, segment corpora,
//! self-organizing maps and sequence models, three improvising agents
//! (SpireMuse, MASOM, MACAT), OSC/Art-Net output and a session conductor
//! with a TCP control protocol.
//!
//! The `improv` binary wraps [`cli`]. [`fixtures`] builds the synthetic
//! material used by the examples and tests.

pub mod dsp;
pub mod signals;
pub mod listening;
pub mod corpus;
pub mod som;
pub mod sequence;
pub mod agents;
pub mod models;
pub mod netio;
pub mod conductor;
pub mod cli;
pub mod fixtures;

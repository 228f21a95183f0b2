use std::collections::BTreeMap;
use std::net::ToSocketAddrs;

use serde::{Deserialize, Serialize};

use super::NetError;

fn default_feature_rate() -> f64 {
    30.0
}
fn default_meter_rate() -> f64 {
    10.0
}

/// Where and how often outputs go. Sources are the live inputs and agent
/// ids; each may fan out to several OSC destinations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingConfig {
    /// Source name → `host:port` list for its feature stream.
    #[serde(default)]
    pub destinations: BTreeMap<String, Vec<String>>,
    /// Feature broadcast and DMX frame rate, 1..=100 Hz.
    #[serde(default = "default_feature_rate")]
    pub feature_rate_hz: f64,
    /// Meter snapshot rate for OSC and control clients, 1..=100 Hz.
    #[serde(default = "default_meter_rate")]
    pub meter_rate_hz: f64,
    /// Destinations receiving meter messages.
    #[serde(default)]
    pub meter_destinations: Vec<String>,
    /// `host:port` for ArtDMX, usually port 6454.
    #[serde(default)]
    pub artnet: Option<String>,
    #[serde(default)]
    pub universe: u16,
    /// UDP address the conductor listens on for OSC control.
    #[serde(default)]
    pub osc_listen: Option<String>,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        Self {
            destinations: BTreeMap::new(),
            feature_rate_hz: default_feature_rate(),
            meter_rate_hz: default_meter_rate(),
            meter_destinations: Vec::new(),
            artnet: None,
            universe: 0,
            osc_listen: None,
        }
    }
}

fn check_addr(a: &str) -> Result<(), NetError> {
    let (host, port) = a
        .rsplit_once(':')
        .ok_or_else(|| NetError::Config(format!("address {a:?} is not host:port")))?;
    if host.is_empty() || port.parse::<u16>().is_err() {
        return Err(NetError::Config(format!("address {a:?} is not host:port")));
    }
    Ok(())
}

impl RoutingConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        for (name, r) in [("feature", self.feature_rate_hz), ("meter", self.meter_rate_hz)] {
            if !(1.0..=100.0).contains(&r) {
                return Err(NetError::Config(format!("{name} rate {r} Hz outside [1, 100]")));
            }
        }
        if self.universe > 0x7FFF {
            return Err(NetError::Config(format!("universe {} exceeds 15 bits", self.universe)));
        }
        for a in self
            .destinations
            .values()
            .flatten()
            .chain(&self.meter_destinations)
            .chain(self.artnet.iter())
            .chain(self.osc_listen.iter())
        {
            check_addr(a)?;
        }
        Ok(())
    }

    /// Resolves an address for sending; used lazily so configs referencing
    /// unreachable hosts still load.
    pub fn resolve(addr: &str) -> Result<std::net::SocketAddr, NetError> {
        addr.to_socket_addrs()?
            .next()
            .ok_or_else(|| NetError::Config(format!("{addr} resolves to nothing")))
    }
}

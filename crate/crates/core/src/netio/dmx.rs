//! Feature-to-DMX mapping and ArtDMX framing.

use serde::{Deserialize, Serialize};

use super::NetError;

pub const ARTNET_PORT: u16 = 6454;
pub const ARTNET_HEADER_LEN: usize = 18;
pub const DMX_CHANNELS: usize = 512;

/// Which feature of a source drives a channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSelector {
    Loudness,
    Centroid,
    /// Zero-based Bark band.
    Bark(usize),
    Valence,
    Arousal,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curve {
    /// Value mapped as is (dB features are already logarithmic).
    #[default]
    Linear,
    /// Linear amplitude converted to dB (floor -120) before mapping.
    Db,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmxEntry {
    pub source: String,
    pub feature: FeatureSelector,
    /// 1..=512.
    pub channel: u16,
    pub range: [f64; 2],
    #[serde(default)]
    pub curve: Curve,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DmxMapping {
    #[serde(default)]
    pub entries: Vec<DmxEntry>,
}

impl DmxMapping {
    pub fn validate(&self) -> Result<(), NetError> {
        let mut seen = [false; DMX_CHANNELS + 1];
        for e in &self.entries {
            let c = e.channel as usize;
            if !(1..=DMX_CHANNELS).contains(&c) {
                return Err(NetError::Config(format!("DMX channel {c} outside 1..=512")));
            }
            if std::mem::replace(&mut seen[c], true) {
                return Err(NetError::Config(format!("DMX channel {c} mapped twice")));
            }
            if !(e.range[0] < e.range[1]) || !e.range.iter().all(|v| v.is_finite()) {
                return Err(NetError::Config(format!("channel {c}: degenerate input range {:?}", e.range)));
            }
            if let FeatureSelector::Bark(b) = e.feature {
                if b >= crate::dsp::NUM_BARK_BANDS {
                    return Err(NetError::Config(format!("channel {c}: bark band {b} out of range")));
                }
            }
        }
        Ok(())
    }

    /// Highest mapped channel (the frame length to send).
    pub fn frame_len(&self) -> usize {
        self.entries.iter().map(|e| e.channel as usize).max().unwrap_or(0)
    }
}

/// Clamps to the entry range, maps linearly onto 0..=255 and rounds half up.
pub fn dmx_map(value: f64, entry: &DmxEntry) -> u8 {
    let v = match entry.curve {
        Curve::Linear => value,
        Curve::Db => 20.0 * value.abs().max(1e-6).log10(),
    };
    let [lo, hi] = entry.range;
    let v = if v.is_nan() { lo } else { v.clamp(lo, hi) };
    ((v - lo) / (hi - lo) * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// ArtDMX framer with a wrapping sequence counter.
#[derive(Debug, Clone, Default)]
pub struct ArtNetFramer {
    sequence: u8,
}

impl ArtNetFramer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Next packet for `universe` (15-bit port address). An empty payload
    /// is padded to the two-channel minimum.
    pub fn frame(&mut self, universe: u16, channels: &[u8]) -> Result<Vec<u8>, NetError> {
        let p = artnet_packet(self.sequence, universe, channels)?;
        self.sequence = self.sequence.wrapping_add(1);
        Ok(p)
    }
}

pub fn artnet_packet(sequence: u8, universe: u16, channels: &[u8]) -> Result<Vec<u8>, NetError> {
    if channels.len() > DMX_CHANNELS {
        return Err(NetError::Config(format!("{} DMX channels exceed 512", channels.len())));
    }
    if universe > 0x7FFF {
        return Err(NetError::Config(format!("universe {universe} exceeds 15 bits")));
    }
    let len = channels.len().max(2);
    let mut p = Vec::with_capacity(ARTNET_HEADER_LEN + len);
    p.extend_from_slice(b"Art-Net\0");
    p.extend_from_slice(&0x5000u16.to_le_bytes());
    p.extend_from_slice(&14u16.to_be_bytes());
    p.push(sequence);
    p.push(0);
    p.push((universe & 0xFF) as u8);
    p.push((universe >> 8) as u8);
    p.extend_from_slice(&(len as u16).to_be_bytes());
    p.extend_from_slice(channels);
    p.resize(ARTNET_HEADER_LEN + len, 0);
    Ok(p)
}

//! Agent behaviours and concatenative rendering.
//!
//! Every agent emits [`PlanEvent`]s. A plan is rendered by splicing corpus
//! segments at their event times with equal-power crossfades where one
//! event starts inside the last `crossfade_ms` of the previous one.

mod macat;
mod masom;
mod render;
mod spiremuse;

pub use macat::MacatAgent;
pub use masom::{cluster_members, MasomAgent};
pub use render::{render, soft_clip, PlanMixer, PlanPlayer, RenderOutput};
pub use spiremuse::{rank_probabilities, SpireMuseAgent, DEFAULT_TOP_K};
#[cfg(test)]
pub(crate) use masom::tests::toy_corpus;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::listening::{InfluenceWeights, ListeningError};
use crate::sequence::SequenceError;

pub const DEFAULT_CROSSFADE_MS: f64 = 20.0;
pub const MAX_DENSITY_PER_MIN: f64 = 600.0;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Listening(#[from] ListeningError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error("plan event {index}: {message}")]
    InvalidPlan { index: usize, message: String },
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Masom,
    SpireMuse,
    Macat,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Masom => "masom",
            AgentKind::SpireMuse => "spiremuse",
            AgentKind::Macat => "macat",
        }
    }
}

fn default_continuity() -> f64 {
    0.8
}
fn default_density() -> f64 {
    30.0
}
fn default_crossfade() -> f64 {
    DEFAULT_CROSSFADE_MS
}
fn default_jump() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub id: String,
    pub kind: AgentKind,
    /// Matching weights (responder).
    #[serde(default)]
    pub influence: InfluenceWeights,
    /// Oracle walk continuity (navigator).
    #[serde(default = "default_continuity")]
    pub continuity: f64,
    #[serde(default)]
    pub response_gain_db: f64,
    /// Events per minute (generator).
    #[serde(default = "default_density")]
    pub density: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_crossfade")]
    pub crossfade_ms: f64,
    #[serde(default = "default_jump")]
    pub max_jump_back: usize,
}

impl AgentConfig {
    pub fn new(id: &str, kind: AgentKind) -> Self {
        Self {
            id: id.to_string(),
            kind,
            influence: InfluenceWeights::default(),
            continuity: default_continuity(),
            response_gain_db: 0.0,
            density: default_density(),
            rng_seed: 0,
            crossfade_ms: DEFAULT_CROSSFADE_MS,
            max_jump_back: default_jump(),
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: String| Err(AgentError::InvalidConfig(format!("agent {}: {m}", self.id)));
        if self.id.is_empty() || self.id.contains('/') || self.id.contains(char::is_whitespace) {
            return bad(format!("id {:?} must be non-empty without '/' or spaces", self.id));
        }
        match self.kind {
            AgentKind::SpireMuse => self.influence.validate()?,
            AgentKind::Macat if !(0.0..=1.0).contains(&self.continuity) => {
                return bad(format!("continuity {} outside [0, 1]", self.continuity))
            }
            AgentKind::Masom if !(0.0..=MAX_DENSITY_PER_MIN).contains(&self.density) => {
                return bad(format!("density {} outside [0, {MAX_DENSITY_PER_MIN}]", self.density))
            }
            _ => {}
        }
        if !self.response_gain_db.is_finite() || !(self.crossfade_ms >= 0.0 && self.crossfade_ms.is_finite()) {
            return bad("gain and crossfade must be finite, crossfade non-negative".into());
        }
        Ok(())
    }
}

/// One scheduled segment playback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEvent {
    pub segment: u32,
    pub start_s: f64,
    pub gain_db: f64,
    pub crossfade_ms: f64,
}

impl PlanEvent {
    /// Crossfade capped at half the segment duration.
    pub fn new(segment: u32, start_s: f64, gain_db: f64, crossfade_ms: f64, segment_duration_s: f64) -> Self {
        Self {
            segment,
            start_s,
            gain_db,
            crossfade_ms: crossfade_ms.min(segment_duration_s * 1000.0 / 2.0).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlaybackPlan {
    pub events: Vec<PlanEvent>,
}

impl PlaybackPlan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, e: PlanEvent) -> Result<(), AgentError> {
        if let Some(last) = self.events.last() {
            if e.start_s < last.start_s {
                return Err(AgentError::InvalidPlan {
                    index: self.events.len(),
                    message: format!("starts at {} before previous event at {}", e.start_s, last.start_s),
                });
            }
        }
        self.events.push(e);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Checks ordering, ids and crossfade bounds against segment durations.
    pub fn validate(&self, durations_s: &[f64]) -> Result<(), AgentError> {
        let mut prev = f64::NEG_INFINITY;
        for (index, e) in self.events.iter().enumerate() {
            let err = |message: String| Err(AgentError::InvalidPlan { index, message });
            if !(e.start_s.is_finite() && e.start_s >= 0.0) || e.start_s < prev {
                return err(format!("start {} is negative or out of order", e.start_s));
            }
            let Some(&dur) = durations_s.get(e.segment as usize) else {
                return err(format!("segment {} does not exist", e.segment));
            };
            if e.crossfade_ms > dur * 1000.0 / 2.0 + 1e-9 || e.crossfade_ms < 0.0 {
                return err(format!("crossfade {} ms exceeds half of segment {}", e.crossfade_ms, e.segment));
            }
            if !e.gain_db.is_finite() {
                return err("gain is not finite".into());
            }
            prev = e.start_s;
        }
        Ok(())
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("plan event serializes") + "\n")
            .collect()
    }
}

pub fn db_to_gain(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_ordering_and_validation() {
        let mut p = PlaybackPlan::new();
        p.push(PlanEvent::new(0, 0.0, 0.0, 20.0, 1.0)).unwrap();
        p.push(PlanEvent::new(1, 0.5, 0.0, 20.0, 1.0)).unwrap();
        assert!(p.push(PlanEvent::new(0, 0.1, 0.0, 20.0, 1.0)).is_err());
        p.validate(&[1.0, 1.0]).unwrap();
        assert!(matches!(p.validate(&[1.0]), Err(AgentError::InvalidPlan { index: 1, .. })));
        assert_eq!(PlanEvent::new(0, 0.0, 0.0, 20.0, 0.01).crossfade_ms, 5.0);
        assert_eq!(p.to_jsonl().lines().count(), 2);
    }

    #[test]
    fn config_validation() {
        let mut c = AgentConfig::new("m1", AgentKind::Masom);
        c.validate().unwrap();
        c.density = -1.0;
        assert!(c.validate().is_err());
        let mut c = AgentConfig::new("a/b", AgentKind::Macat);
        assert!(c.validate().is_err());
        c.id = "x".into();
        c.continuity = 2.0;
        assert!(c.validate().is_err());
        let t: AgentConfig = toml::from_str("id = \"s\"\nkind = \"spiremuse\"\n").unwrap();
        assert_eq!(t.crossfade_ms, DEFAULT_CROSSFADE_MS);
    }
}

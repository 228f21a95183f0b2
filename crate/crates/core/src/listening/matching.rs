//! Influence-weighted matching: rhythmic → duration, spectral → MFCC block,
//! melodic → f0 block, harmonic → chroma block. Loudness and affect entries
//! do not take part.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::features::{FeatureVector55, CHROMA_MEAN, DURATION, F0_MEAN, FEATURE_DIMS, MFCC_MEAN};
use super::ListeningError;

pub const STD_FLOOR: f64 = 1e-6;

pub const DURATION_BLOCK: Range<usize> = DURATION..DURATION + 1;
pub const MFCC_BLOCK: Range<usize> = MFCC_MEAN..MFCC_MEAN + 24;
pub const F0_BLOCK: Range<usize> = F0_MEAN..F0_MEAN + 2;
pub const CHROMA_BLOCK: Range<usize> = CHROMA_MEAN..CHROMA_MEAN + 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfluenceWeights {
    pub rhythmic: f64,
    pub spectral: f64,
    pub melodic: f64,
    pub harmonic: f64,
}

impl Default for InfluenceWeights {
    fn default() -> Self {
        Self::uniform()
    }
}

impl InfluenceWeights {
    pub fn new(rhythmic: f64, spectral: f64, melodic: f64, harmonic: f64) -> Result<Self, ListeningError> {
        let w = Self {
            rhythmic,
            spectral,
            melodic,
            harmonic,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn uniform() -> Self {
        Self {
            rhythmic: 1.0,
            spectral: 1.0,
            melodic: 1.0,
            harmonic: 1.0,
        }
    }

    pub fn from_array(a: [f64; 4]) -> Result<Self, ListeningError> {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.rhythmic, self.spectral, self.melodic, self.harmonic]
    }

    pub fn validate(&self) -> Result<(), ListeningError> {
        let a = self.to_array();
        if a.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ListeningError::InvalidWeights(format!(
                "weights must be finite and non-negative, got {a:?}"
            )));
        }
        if a.iter().all(|w| *w == 0.0) {
            return Err(ListeningError::InvalidWeights(
                "at least one influence weight must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-dimension population mean and (floored) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Identity normalization (mean 0, std 1).
    pub fn identity() -> Self {
        Self {
            mean: vec![0.0; FEATURE_DIMS],
            std: vec![1.0; FEATURE_DIMS],
        }
    }

    pub fn zscore(&self, v: &FeatureVector55) -> Vec<f64> {
        v.0.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

fn block_sq(a: &FeatureVector55, b: &FeatureVector55, norm: &NormStats, block: Range<usize>) -> f64 {
    block
        .map(|i| {
            let d = (a.0[i] - b.0[i]) / norm.std[i];
            d * d
        })
        .sum()
}

pub fn weighted_distance(
    a: &FeatureVector55,
    b: &FeatureVector55,
    w: &InfluenceWeights,
    norm: &NormStats,
) -> f64 {
    (w.rhythmic * block_sq(a, b, norm, DURATION_BLOCK)
        + w.spectral * block_sq(a, b, norm, MFCC_BLOCK)
        + w.melodic * block_sq(a, b, norm, F0_BLOCK)
        + w.harmonic * block_sq(a, b, norm, CHROMA_BLOCK))
    .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    /// Row index into the feature matrix (the corpus segment id).
    pub segment: u32,
    pub distance: f64,
}

/// The `k` nearest rows, ascending by distance, ties to the lower id.
pub fn match_features(
    query: &FeatureVector55,
    features: &[FeatureVector55],
    norm: &NormStats,
    w: &InfluenceWeights,
    k: usize,
) -> Result<Vec<Match>, ListeningError> {
    if features.is_empty() {
        return Err(ListeningError::NoMatch);
    }
    let mut all: Vec<Match> = features
        .iter()
        .enumerate()
        .map(|(i, f)| Match {
            segment: i as u32,
            distance: weighted_distance(query, f, w, norm),
        })
        .collect();
    let k = k.max(1).min(all.len());
    let cmp = |a: &Match, b: &Match| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.segment.cmp(&b.segment))
    };
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, cmp);
        all.truncate(k);
    }
    all.sort_by(cmp);
    Ok(all)
}

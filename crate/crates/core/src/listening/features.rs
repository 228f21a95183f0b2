use rayon::prelude::*;

use super::affect::{affect, AffectModel};
use crate::dsp::{frame_count, FrameAnalyzer, FrameDescriptors, MFCC_COEFFS};

pub const FEATURE_DIMS: usize = 55;
/// Entries 0..53 are the low-level statistics the affect model reads.
pub const LOWLEVEL_DIMS: usize = 53;

pub const DURATION: usize = 0;
pub const LOUDNESS_MEAN: usize = 1;
pub const LOUDNESS_STD: usize = 2;
pub const MFCC_MEAN: usize = 3;
pub const MFCC_STD: usize = MFCC_MEAN + MFCC_COEFFS;
pub const F0_MEAN: usize = MFCC_STD + MFCC_COEFFS;
pub const F0_STD: usize = F0_MEAN + 1;
pub const CHROMA_MEAN: usize = F0_STD + 1;
pub const CHROMA_STD: usize = CHROMA_MEAN + 12;
pub const VALENCE: usize = CHROMA_STD + 12;
pub const AROUSAL: usize = VALENCE + 1;

const _: () = assert!(AROUSAL + 1 == FEATURE_DIMS);

/// Per-segment annotation in the frozen 55-entry layout:
/// duration, loudness mean/std, 12 MFCC means, 12 MFCC stds, f0 mean/std,
/// 12 chroma means, 12 chroma stds, valence, arousal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector55(pub [f64; FEATURE_DIMS]);

impl FeatureVector55 {
    pub fn zeros() -> Self {
        Self([0.0; FEATURE_DIMS])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn duration_s(&self) -> f64 {
        self.0[DURATION]
    }

    pub fn f0_mean(&self) -> f64 {
        self.0[F0_MEAN]
    }

    pub fn mfcc_means(&self) -> &[f64] {
        &self.0[MFCC_MEAN..MFCC_STD]
    }

    pub fn chroma_means(&self) -> &[f64] {
        &self.0[CHROMA_MEAN..CHROMA_STD]
    }

    pub fn lowlevel(&self) -> &[f64] {
        &self.0[..LOWLEVEL_DIMS]
    }

    pub fn valence(&self) -> f64 {
        self.0[VALENCE]
    }

    pub fn arousal(&self) -> f64 {
        self.0[AROUSAL]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Rounds every entry to f32 precision, the precision features are
    /// stored at on disk.
    pub fn quantized(&self) -> Self {
        let mut out = self.0;
        out.iter_mut().for_each(|v| *v = *v as f32 as f64);
        Self(out)
    }
}

impl TryFrom<&[f64]> for FeatureVector55 {
    type Error = usize;

    fn try_from(v: &[f64]) -> Result<Self, usize> {
        let arr: [f64; FEATURE_DIMS] = v.try_into().map_err(|_| v.len())?;
        Ok(Self(arr))
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Frame descriptors of a segment: one frame per hop, or a single
/// zero-padded frame when the segment is shorter than the window.
pub fn segment_frames(samples: &[f32], analyzer: &FrameAnalyzer, hop: usize) -> Vec<FrameDescriptors> {
    let window = analyzer.window_size();
    let n = frame_count(samples.len(), window, hop);
    if n == 0 {
        let mut padded = samples.to_vec();
        padded.resize(window, 0.0);
        return vec![analyzer.describe(&padded)];
    }
    (0..n)
        .into_par_iter()
        .map(|f| analyzer.describe(&samples[f * hop..f * hop + window]))
        .collect()
}

/// Aggregates frame descriptors into the low-level statistics (entries 0..53).
pub fn lowlevel_stats(frames: &[FrameDescriptors], duration_s: f64) -> [f64; LOWLEVEL_DIMS] {
    let mut out = [0.0; LOWLEVEL_DIMS];
    out[DURATION] = duration_s;
    let (m, s) = mean_std(frames.iter().map(|f| f.loudness_db));
    out[LOUDNESS_MEAN] = m;
    out[LOUDNESS_STD] = s;
    for c in 0..MFCC_COEFFS {
        let (m, s) = mean_std(frames.iter().map(|f| f.mfcc[c]));
        out[MFCC_MEAN + c] = m;
        out[MFCC_STD + c] = s;
    }
    let (m, s) = mean_std(frames.iter().map(|f| f.f0_hz).filter(|&f| f > 0.0));
    out[F0_MEAN] = m;
    out[F0_STD] = s;
    for c in 0..12 {
        let (m, s) = mean_std(frames.iter().map(|f| f.chroma[c]));
        out[CHROMA_MEAN + c] = m;
        out[CHROMA_STD + c] = s;
    }
    out
}

/// Annotates one segment's samples with the full 55-entry feature vector.
pub fn annotate(
    samples: &[f32],
    analyzer: &FrameAnalyzer,
    hop: usize,
    model: &AffectModel,
) -> FeatureVector55 {
    let duration_s = samples.len() as f64 / analyzer.sample_rate() as f64;
    let frames = segment_frames(samples, analyzer, hop);
    let stats = lowlevel_stats(&frames, duration_s);
    let (valence, arousal) = affect(&stats, model).expect("stats have the model's dimension");
    let mut out = [0.0; FEATURE_DIMS];
    out[..LOWLEVEL_DIMS].copy_from_slice(&stats);
    out[VALENCE] = valence;
    out[AROUSAL] = arousal;
    FeatureVector55(out)
}

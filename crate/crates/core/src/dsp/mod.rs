//! Spectral and perceptual transforms over mono audio.
//!
//! Everything here is a pure function of its input. The [`FrameAnalyzer`]
//! caches FFT plans and filterbanks so the per-frame descriptors can be
//! computed without re-planning, but it holds no other state.

mod descriptors;
mod pitch;
mod resample;
mod stft;

pub use descriptors::{
    bark_bands, chroma, loudness, loudness_from_spectrum, magnitudes, mfcc, spectral_centroid,
    BarkLayout, ChromaLayout, MelFilterbank, BARK_EDGES_HZ, CHROMA_MIN_HZ, LOUDNESS_FLOOR_DB, MEL_BANDS,
    MEL_LOG_FLOOR, MFCC_COEFFS, NUM_BARK_BANDS,
};
pub use pitch::{f0, F0_MAX_HZ, F0_MIN_HZ, YIN_THRESHOLD};
pub use resample::resample_linear;
pub use stft::{frame_count, hann_window, stft, StftFrameSeries, StftPlan};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Engine-internal sample rate.
pub const DEFAULT_SAMPLE_RATE: u32 = 48_000;
/// Analysis window in samples.
pub const DEFAULT_WINDOW_SIZE: usize = 8192;
/// Analysis hop (and engine block) in samples.
pub const DEFAULT_HOP_SIZE: usize = 512;

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("window size {0} is not a power of two")]
    WindowNotPowerOfTwo(usize),
    #[error("hop size {hop} must be in 1..={window}")]
    BadHop { hop: usize, window: usize },
}

/// Mono sample stream at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, DspError> {
        if sample_rate == 0 {
            return Err(DspError::ZeroSampleRate);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(DspError::NonFiniteSample(i));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self::new(vec![0.0; len], sample_rate).expect("silence is valid")
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }
}

/// All per-frame descriptors the listening and broadcast paths consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDescriptors {
    pub loudness_db: f64,
    pub mfcc: [f64; MFCC_COEFFS],
    pub chroma: [f64; 12],
    pub f0_hz: f64,
    pub bark: [f64; NUM_BARK_BANDS],
    pub spectral_centroid_hz: f64,
}

impl FrameDescriptors {
    pub fn silent() -> Self {
        Self {
            loudness_db: LOUDNESS_FLOOR_DB,
            mfcc: [0.0; MFCC_COEFFS],
            chroma: [0.0; 12],
            f0_hz: 0.0,
            bark: [0.0; NUM_BARK_BANDS],
            spectral_centroid_hz: 0.0,
        }
    }
}

/// Reusable per-configuration analysis state (FFT plan, mel filterbank,
/// bark bin layout). Cheap to share behind `&`.
pub struct FrameAnalyzer {
    sample_rate: u32,
    plan: StftPlan,
    mel: MelFilterbank,
    bark: BarkLayout,
    chroma: ChromaLayout,
}

impl FrameAnalyzer {
    pub fn new(sample_rate: u32, window_size: usize) -> Result<Self, DspError> {
        if sample_rate == 0 {
            return Err(DspError::ZeroSampleRate);
        }
        let plan = StftPlan::new(window_size)?;
        Ok(Self {
            sample_rate,
            mel: MelFilterbank::new(window_size, sample_rate),
            bark: BarkLayout::new(window_size, sample_rate),
            chroma: ChromaLayout::new(window_size, sample_rate),
            plan,
        })
    }

    pub fn window_size(&self) -> usize {
        self.plan.window_size()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// One-sided spectrum of a Hann-windowed block; shorter blocks are
    /// zero-padded to the window size.
    pub fn spectrum(&self, block: &[f32]) -> Vec<Complex64> {
        self.plan.spectrum(block)
    }

    /// Loudness, centroid and bark bands only; skips pitch and MFCC.
    pub fn describe_reactive(&self, block: &[f32]) -> (f64, f64, [f64; NUM_BARK_BANDS]) {
        let mags = magnitudes(&self.spectrum(block));
        (
            loudness(block),
            spectral_centroid(&mags, self.sample_rate),
            self.bark.bands(&mags),
        )
    }

    pub fn describe(&self, block: &[f32]) -> FrameDescriptors {
        let mags = magnitudes(&self.spectrum(block));
        let f0_hz = if block.len() >= pitch::MIN_BLOCK {
            f0(block, self.sample_rate)
        } else {
            let mut padded = block.to_vec();
            padded.resize(pitch::MIN_BLOCK, 0.0);
            f0(&padded, self.sample_rate)
        };
        FrameDescriptors {
            loudness_db: loudness(block),
            mfcc: self.mel.mfcc(&mags),
            chroma: self.chroma.profile(&mags),
            f0_hz,
            bark: self.bark.bands(&mags),
            spectral_centroid_hz: spectral_centroid(&mags, self.sample_rate),
        }
    }
}

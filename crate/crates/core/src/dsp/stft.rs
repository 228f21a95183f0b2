use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{AudioBuffer, DspError};

/// Number of full frames that fit in `len` samples.
pub fn frame_count(len: usize, window_size: usize, hop_size: usize) -> usize {
    if len < window_size || hop_size == 0 {
        0
    } else {
        (len - window_size) / hop_size + 1
    }
}

/// Periodic Hann window.
pub fn hann_window(size: usize) -> Vec<f64> {
    (0..size)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / size as f64).cos())
        .collect()
}

/// Planned forward transform for one window size.
#[derive(Clone)]
pub struct StftPlan {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
}

impl fmt::Debug for StftPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StftPlan")
            .field("window_size", &self.window.len())
            .finish()
    }
}

impl StftPlan {
    pub fn new(window_size: usize) -> Result<Self, DspError> {
        if window_size == 0 || !window_size.is_power_of_two() {
            return Err(DspError::WindowNotPowerOfTwo(window_size));
        }
        let fft = FftPlanner::new().plan_fft_forward(window_size);
        Ok(Self {
            fft,
            window: hann_window(window_size),
        })
    }

    pub fn window_size(&self) -> usize {
        self.window.len()
    }

    pub fn num_bins(&self) -> usize {
        self.window.len() / 2 + 1
    }

    /// Hann-windowed one-sided spectrum (`window_size/2 + 1` bins). Blocks
    /// shorter than the window are zero-padded, longer ones truncated.
    pub fn spectrum(&self, block: &[f32]) -> Vec<Complex64> {
        let n = self.window.len();
        let mut buf: Vec<Complex64> = self
            .window
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let s = block.get(i).copied().unwrap_or(0.0) as f64;
                Complex64::new(s * w, 0.0)
            })
            .collect();
        self.fft.process(&mut buf);
        buf.truncate(n / 2 + 1);
        buf
    }
}

#[derive(Debug, Clone)]
pub struct StftFrameSeries {
    pub frames: Vec<Vec<Complex64>>,
    pub window_size: usize,
    pub hop_size: usize,
    pub sample_rate: u32,
}

impl StftFrameSeries {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate as f64 / self.window_size as f64
    }
}

/// Short-time Fourier transform with a Hann window. Buffers shorter than
/// one window give an empty series.
pub fn stft(
    buffer: &AudioBuffer,
    window_size: usize,
    hop_size: usize,
) -> Result<StftFrameSeries, DspError> {
    if hop_size == 0 || hop_size > window_size {
        return Err(DspError::BadHop {
            hop: hop_size,
            window: window_size,
        });
    }
    let plan = StftPlan::new(window_size)?;
    let samples = buffer.samples();
    let frames = (0..frame_count(samples.len(), window_size, hop_size))
        .map(|f| {
            let start = f * hop_size;
            plan.spectrum(&samples[start..start + window_size])
        })
        .collect();
    Ok(StftFrameSeries {
        frames,
        window_size,
        hop_size,
        sample_rate: buffer.sample_rate(),
    })
}

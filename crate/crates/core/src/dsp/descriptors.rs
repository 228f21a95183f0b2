use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

pub const LOUDNESS_FLOOR_DB: f64 = -120.0;
pub const MFCC_COEFFS: usize = 12;
pub const MEL_BANDS: usize = 40;
pub const MEL_LOW_HZ: f64 = 20.0;
pub const MEL_LOG_FLOOR: f64 = 1e-10;
pub const CHROMA_MIN_HZ: f64 = 32.0;
pub const NUM_BARK_BANDS: usize = 24;

/// Zwicker critical-band edges in Hz. Band `b` covers `[edge[b], edge[b+1])`.
pub const BARK_EDGES_HZ: [f64; NUM_BARK_BANDS + 1] = [
    0.0, 100.0, 200.0, 300.0, 400.0, 510.0, 630.0, 770.0, 920.0, 1080.0, 1270.0, 1480.0, 1720.0,
    2000.0, 2320.0, 2700.0, 3150.0, 3700.0, 4400.0, 5300.0, 6400.0, 7700.0, 9500.0, 12000.0,
    15500.0,
];

fn window_size_of(num_bins: usize) -> usize {
    (num_bins.saturating_sub(1)) * 2
}

fn bin_hz(k: usize, window_size: usize, sample_rate: u32) -> f64 {
    k as f64 * sample_rate as f64 / window_size as f64
}

pub fn magnitudes(spectrum: &[Complex64]) -> Vec<f64> {
    spectrum.iter().map(|c| c.norm()).collect()
}

fn amplitude_to_db(rms: f64) -> f64 {
    if rms <= 0.0 {
        LOUDNESS_FLOOR_DB
    } else {
        (20.0 * rms.log10()).clamp(LOUDNESS_FLOOR_DB, 0.0)
    }
}

/// `20·log10(RMS)` of a sample block, floored at -120 dBFS.
pub fn loudness(block: &[f32]) -> f64 {
    if block.is_empty() {
        return LOUDNESS_FLOOR_DB;
    }
    let ms = block.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>() / block.len() as f64;
    amplitude_to_db(ms.sqrt())
}

/// Loudness estimated from a Hann-windowed one-sided spectrum via Parseval,
/// undoing the window's mean-square gain (3/8).
pub fn loudness_from_spectrum(spectrum: &[Complex64]) -> f64 {
    let n = window_size_of(spectrum.len());
    if n == 0 {
        return LOUDNESS_FLOOR_DB;
    }
    let last = spectrum.len() - 1;
    let mut two_sided = spectrum[0].norm_sqr() + spectrum[last].norm_sqr();
    for c in &spectrum[1..last] {
        two_sided += 2.0 * c.norm_sqr();
    }
    let windowed_ms = two_sided / (n as f64 * n as f64);
    amplitude_to_db((windowed_ms / 0.375).sqrt())
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular 40-band mel filterbank (20 Hz to Nyquist) plus the DCT-II
/// basis for coefficients 1..=12.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    bands: Vec<(usize, Vec<f64>)>,
    dct: Vec<[f64; MEL_BANDS]>,
}

impl MelFilterbank {
    pub fn new(window_size: usize, sample_rate: u32) -> Self {
        let num_bins = window_size / 2 + 1;
        let lo = hz_to_mel(MEL_LOW_HZ);
        let hi = hz_to_mel(sample_rate as f64 / 2.0);
        let points: Vec<f64> = (0..MEL_BANDS + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (MEL_BANDS + 1) as f64))
            .collect();
        let bands = (0..MEL_BANDS)
            .map(|m| {
                let (left, centre, right) = (points[m], points[m + 1], points[m + 2]);
                let mut first = None;
                let mut weights = Vec::new();
                for k in 0..num_bins {
                    let f = bin_hz(k, window_size, sample_rate);
                    let w = if f > left && f <= centre {
                        (f - left) / (centre - left)
                    } else if f > centre && f < right {
                        (right - f) / (right - centre)
                    } else {
                        0.0
                    };
                    if w > 0.0 {
                        first.get_or_insert(k);
                        weights.push(w);
                    } else if first.is_some() {
                        break;
                    }
                }
                (first.unwrap_or(0), weights)
            })
            .collect();
        let scale = (2.0 / MEL_BANDS as f64).sqrt();
        let dct = (1..=MFCC_COEFFS)
            .map(|c| {
                let mut row = [0.0; MEL_BANDS];
                for (m, v) in row.iter_mut().enumerate() {
                    *v = scale * (PI * c as f64 * (m as f64 + 0.5) / MEL_BANDS as f64).cos();
                }
                row
            })
            .collect();
        Self { bands, dct }
    }

    pub fn log_energies(&self, mags: &[f64]) -> [f64; MEL_BANDS] {
        let mut out = [0.0; MEL_BANDS];
        for (o, (start, weights)) in out.iter_mut().zip(&self.bands) {
            let e: f64 = weights
                .iter()
                .zip(mags.iter().skip(*start))
                .map(|(w, m)| w * m * m)
                .sum();
            *o = e.max(MEL_LOG_FLOOR).ln();
        }
        out
    }

    pub fn mfcc(&self, mags: &[f64]) -> [f64; MFCC_COEFFS] {
        let logs = self.log_energies(mags);
        let mut out = [0.0; MFCC_COEFFS];
        for (o, basis) in out.iter_mut().zip(&self.dct) {
            *o = basis.iter().zip(&logs).map(|(b, l)| b * l).sum();
        }
        out
    }
}

/// MFCC c1..c12 of a one-sided magnitude spectrum. Builds the filterbank on
/// every call; reuse a [`MelFilterbank`] on hot paths.
pub fn mfcc(mags: &[f64], sample_rate: u32) -> [f64; MFCC_COEFFS] {
    MelFilterbank::new(window_size_of(mags.len()), sample_rate).mfcc(mags)
}

/// Pitch class (C = 0) of a frequency relative to A4 = 440 Hz.
pub(crate) fn pitch_class(hz: f64) -> usize {
    let semis = (12.0 * (hz / 440.0).log2()).round() as i64 + 9;
    semis.rem_euclid(12) as usize
}

/// Bin-to-pitch-class assignment for one window size; bins below 32 Hz
/// and DC are left out.
#[derive(Debug, Clone)]
pub struct ChromaLayout {
    class_of_bin: Vec<Option<u8>>,
}

impl ChromaLayout {
    pub fn new(window_size: usize, sample_rate: u32) -> Self {
        let class_of_bin = (0..window_size / 2 + 1)
            .map(|k| {
                let f = bin_hz(k, window_size, sample_rate);
                (k > 0 && f >= CHROMA_MIN_HZ).then(|| pitch_class(f) as u8)
            })
            .collect();
        Self { class_of_bin }
    }

    /// Octave-folded energy profile, L1-normalized; all zeros for silence.
    pub fn profile(&self, mags: &[f64]) -> [f64; 12] {
        let mut out = [0.0; 12];
        for (m, class) in mags.iter().zip(&self.class_of_bin) {
            if let Some(c) = class {
                out[*c as usize] += m * m;
            }
        }
        let total: f64 = out.iter().sum();
        if total > 0.0 && total.is_finite() {
            out.iter_mut().for_each(|v| *v /= total);
        } else {
            out = [0.0; 12];
        }
        out
    }
}

/// Octave-folded energy profile, L1-normalized; all zeros for silence.
pub fn chroma(mags: &[f64], sample_rate: u32) -> [f64; 12] {
    let n = window_size_of(mags.len());
    if n == 0 {
        return [0.0; 12];
    }
    ChromaLayout::new(n, sample_rate).profile(mags)
}

/// Bin-to-band assignment for one window size. Bins at or above the top
/// edge (15.5 kHz) are not covered.
#[derive(Debug, Clone)]
pub struct BarkLayout {
    band_of_bin: Vec<Option<u8>>,
}

impl BarkLayout {
    pub fn new(window_size: usize, sample_rate: u32) -> Self {
        let band_of_bin = (0..window_size / 2 + 1)
            .map(|k| band_of(bin_hz(k, window_size, sample_rate)).map(|b| b as u8))
            .collect();
        Self { band_of_bin }
    }

    pub fn band_of_bin(&self, k: usize) -> Option<usize> {
        self.band_of_bin.get(k).copied().flatten().map(usize::from)
    }

    pub fn bands(&self, mags: &[f64]) -> [f64; NUM_BARK_BANDS] {
        let mut out = [0.0; NUM_BARK_BANDS];
        for (m, band) in mags.iter().zip(&self.band_of_bin) {
            if let Some(b) = band {
                out[*b as usize] += m * m;
            }
        }
        out
    }
}

fn band_of(hz: f64) -> Option<usize> {
    if !(0.0..BARK_EDGES_HZ[NUM_BARK_BANDS]).contains(&hz) {
        return None;
    }
    BARK_EDGES_HZ.windows(2).position(|e| hz >= e[0] && hz < e[1])
}

pub fn bark_bands(mags: &[f64], sample_rate: u32) -> [f64; NUM_BARK_BANDS] {
    BarkLayout::new(window_size_of(mags.len()), sample_rate).bands(mags)
}

/// Magnitude-weighted mean bin frequency; 0 for an all-zero frame.
pub fn spectral_centroid(mags: &[f64], sample_rate: u32) -> f64 {
    let n = window_size_of(mags.len());
    let total: f64 = mags.iter().sum();
    if n == 0 || total <= 0.0 {
        return 0.0;
    }
    mags.iter()
        .enumerate()
        .map(|(k, m)| bin_hz(k, n, sample_rate) * m)
        .sum::<f64>()
        / total
}

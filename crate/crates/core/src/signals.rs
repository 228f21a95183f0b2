//! Synthetic test signals: tones, chords, bursts and seeded noise. Used by
//! fixtures, examples and the default affect-model fit.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn sine(hz: f64, amplitude: f64, len: usize, sample_rate: u32) -> Vec<f32> {
    let step = 2.0 * PI * hz / sample_rate as f64;
    (0..len)
        .map(|i| (amplitude * (step * i as f64).sin()) as f32)
        .collect()
}

/// Equal-amplitude sum of sines; `amplitude` applies to each partial.
pub fn chord(freqs: &[f64], amplitude: f64, len: usize, sample_rate: u32) -> Vec<f32> {
    let mut out = vec![0.0f32; len];
    for &f in freqs {
        for (o, s) in out.iter_mut().zip(sine(f, amplitude, len, sample_rate)) {
            *o += s;
        }
    }
    out
}

/// Harmonic tone with `partials` harmonics at 1/k amplitude (a band-limited
/// sawtooth when `partials` is large), peak-normalized to `amplitude`.
pub fn harmonic_tone(
    hz: f64,
    partials: usize,
    amplitude: f64,
    len: usize,
    sample_rate: u32,
) -> Vec<f32> {
    let nyquist = sample_rate as f64 / 2.0;
    let mut out = vec![0.0f64; len];
    for k in 1..=partials.max(1) {
        let f = hz * k as f64;
        if f >= nyquist {
            break;
        }
        let step = 2.0 * PI * f / sample_rate as f64;
        for (i, o) in out.iter_mut().enumerate() {
            *o += (step * i as f64).sin() / k as f64;
        }
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { amplitude / peak } else { 0.0 };
    out.into_iter().map(|v| (v * scale) as f32).collect()
}

/// Uniform white noise in `[-amplitude, amplitude]`.
pub fn white_noise(len: usize, amplitude: f64, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| (amplitude * rng.random_range(-1.0..=1.0)) as f32)
        .collect()
}

pub fn silence(len: usize) -> Vec<f32> {
    vec![0.0; len]
}

/// `body` surrounded by `pad_before` and `pad_after` samples of silence.
pub fn padded(body: &[f32], pad_before: usize, pad_after: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(pad_before + body.len() + pad_after);
    out.resize(pad_before, 0.0);
    out.extend_from_slice(body);
    out.resize(pad_before + body.len() + pad_after, 0.0);
    out
}

/// Concatenates parts in order.
pub fn concat(parts: &[Vec<f32>]) -> Vec<f32> {
    parts.iter().flatten().copied().collect()
}

pub fn seconds(s: f64, sample_rate: u32) -> usize {
    (s * sample_rate as f64).round() as usize
}

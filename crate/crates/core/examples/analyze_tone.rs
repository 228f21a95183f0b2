//! Frame descriptors of a synthetic tone: loudness, MFCC, chroma, f0, Bark
//! bands and centroid at the 8192/512 analysis configuration.
//!
//!     cargo run --example analyze_tone [HZ]

use improv_core::dsp::{frame_count, FrameAnalyzer, DEFAULT_HOP_SIZE, DEFAULT_WINDOW_SIZE};
use improv_core::signals::harmonic_tone;

const NAMES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

fn main() {
    let hz: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(440.0);
    let sr = 48_000;
    let x = harmonic_tone(hz, 6, 0.5, sr as usize, sr);
    let an = FrameAnalyzer::new(sr, DEFAULT_WINDOW_SIZE).unwrap();
    let frames = frame_count(x.len(), DEFAULT_WINDOW_SIZE, DEFAULT_HOP_SIZE);
    println!("{hz} Hz, 1 s: {frames} frames of {DEFAULT_WINDOW_SIZE} at hop {DEFAULT_HOP_SIZE}");
    let d = an.describe(&x[..DEFAULT_WINDOW_SIZE]);
    println!("loudness {:.2} dBFS, f0 {:.2} Hz, centroid {:.1} Hz", d.loudness_db, d.f0_hz, d.spectral_centroid_hz);
    let top = (0..12).max_by(|&a, &b| d.chroma[a].total_cmp(&d.chroma[b])).unwrap();
    println!("chroma peak {} ({:.3})", NAMES[top], d.chroma[top]);
    println!("mfcc {:.2?}", d.mfcc);
    let loudest = (0..d.bark.len()).max_by(|&a, &b| d.bark[a].total_cmp(&d.bark[b])).unwrap();
    println!("strongest Bark band {loudest}");
}

//! Reproducible synthetic material: a three-file corpus (tones, chords,
//! noise), a "performer" stream and a session config wiring all three
//! agent kinds. Shared by the examples and the integration tests.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{build_corpus, write_wav_f32, CorpusError};
use crate::listening::{AffectModel, SegmenterConfig};
use crate::models::{save_models, train_models, ModelError, TrainOptions};
use crate::signals::{chord, harmonic_tone, padded, seconds, white_noise};

pub const FIXTURE_SR: u32 = 48_000;

const SCALE_HZ: [f64; 8] = [261.63, 293.66, 329.63, 349.23, 392.0, 440.0, 493.88, 523.25];

fn gap() -> usize {
    seconds(0.4, FIXTURE_SR)
}

/// `(file name, samples)` for each corpus source.
pub fn corpus_sources() -> Vec<(&'static str, Vec<f32>)> {
    let sr = FIXTURE_SR;
    let tones: Vec<f32> = (0..8)
        .flat_map(|i| {
            let dur = 0.3 + 0.15 * (i % 5) as f64;
            padded(&harmonic_tone(SCALE_HZ[i], 1 + i % 4, 0.5, seconds(dur, sr), sr), 0, gap())
        })
        .collect();
    let triads: [[f64; 3]; 6] = [
        [261.63, 329.63, 392.0],
        [220.0, 261.63, 329.63],
        [349.23, 440.0, 523.25],
        [293.66, 349.23, 440.0],
        [392.0, 493.88, 587.33],
        [329.63, 392.0, 493.88],
    ];
    let chords: Vec<f32> = triads
        .iter()
        .enumerate()
        .flat_map(|(i, t)| padded(&chord(t, 0.2, seconds(0.5 + 0.2 * (i % 3) as f64, sr), sr), 0, gap()))
        .collect();
    let noise: Vec<f32> = (0..6)
        .flat_map(|i| padded(&white_noise(seconds(0.3 + 0.1 * i as f64, sr), 0.05 + 0.05 * i as f64, 100 + i as u64), 0, gap()))
        .collect();
    vec![("tones.wav", tones), ("chords.wav", chords), ("noise.wav", noise)]
}

/// A seeded melodic line of tone bursts separated by rests, ending in
/// silence.
pub fn performer(duration_s: f64, seed: u64) -> Vec<f32> {
    let sr = FIXTURE_SR;
    let total = seconds(duration_s, sr);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(total);
    loop {
        let dur = seconds(rng.random_range(0.3..1.0), sr);
        let rest = seconds(rng.random_range(0.3..0.8), sr);
        if out.len() + dur + rest > total {
            break;
        }
        let hz = SCALE_HZ[rng.random_range(0..SCALE_HZ.len())];
        let partials = rng.random_range(1..5);
        out.extend(padded(&harmonic_tone(hz, partials, rng.random_range(0.2..0.6), dur, sr), 0, rest));
    }
    out.resize(total, 0.0);
    out
}

/// Session config over a corpus at `corpus` (as written into the TOML).
/// OSC and Art-Net destinations point at local ports; simulate only
/// captures them.
pub fn session_toml(corpus: &str) -> String {
    format!(
        r#"seed = 7
inputs = ["performer"]

[[agents]]
id = "muse"
kind = "spiremuse"
corpus = "{corpus}"

[[agents]]
id = "gen"
kind = "masom"
corpus = "{corpus}"
density = 40

[[agents]]
id = "nav"
kind = "macat"
corpus = "{corpus}"
continuity = 0.7
response_gain_db = -6

[routing]
feature_rate_hz = 30
meter_rate_hz = 10
artnet = "127.0.0.1:6454"
meter_destinations = ["127.0.0.1:9002"]

[routing.destinations]
performer = ["127.0.0.1:9000"]
muse = ["127.0.0.1:9001"]

[[dmx.entries]]
source = "performer"
feature = "loudness"
channel = 1
range = [-120.0, 0.0]

[[dmx.entries]]
source = "performer"
feature = "centroid"
channel = 2
range = [0.0, 4000.0]

[[dmx.entries]]
source = "muse"
feature = "valence"
channel = 3
range = [-1.0, 1.0]

[[scenes]]
name = "listen"
duration_s = 10
[scenes.agents.gen]
enable = false
[scenes.agents.nav]
enable = false

[[scenes]]
name = "converse"
duration_s = 10
[scenes.agents.gen]
enable = true
density = 20
[[scenes.ramps]]
path = "muse.weights.rhythmic"
from = 1.0
to = 0.2
start_s = 0
end_s = 10

[[scenes]]
name = "tutti"
[scenes.agents.nav]
enable = true
[[scenes.ramps]]
path = "gen.density"
from = 20
to = 60
start_s = 0
end_s = 5
"#
    )
}

#[derive(Debug, Clone)]
pub struct FixturePaths {
    pub corpus: PathBuf,
    pub session: PathBuf,
    pub performer: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Writes source WAVs, a built and trained corpus, a session config and a
/// performer WAV of `performer_s` seconds under `dir`.
pub fn build_fixture(dir: &Path, performer_s: f64) -> Result<FixturePaths, FixtureError> {
    let audio = dir.join("audio");
    std::fs::create_dir_all(&audio)?;
    let mut files = Vec::new();
    for (name, samples) in corpus_sources() {
        let p = audio.join(name);
        write_wav_f32(&p, &samples, FIXTURE_SR)?;
        files.push(p);
    }
    let corpus_dir = dir.join("corpus");
    let mut corpus = build_corpus(&files, SegmenterConfig::default(), &AffectModel::bundled_default())?;
    let opts = TrainOptions::default();
    let (models, report) = train_models(&mut corpus, &opts)?;
    save_models(&corpus_dir, &corpus, &models, &opts, &report)?;
    let session = dir.join("session.toml");
    std::fs::write(&session, session_toml("corpus"))?;
    let perf = dir.join("performer.wav");
    write_wav_f32(&perf, &performer(performer_s, 1), FIXTURE_SR)?;
    Ok(FixturePaths {
        corpus: corpus_dir,
        session,
        performer: perf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::AudioBuffer;
    use crate::listening::{segment_offline, SourceId};

    #[test]
    fn sources_segment_as_designed() {
        for (name, s) in corpus_sources() {
            let segs = segment_offline(&AudioBuffer::new(s, FIXTURE_SR).unwrap(), &SegmenterConfig::default(), 512, SourceId(0));
            let want = if name == "tones.wav" { 8 } else { 6 };
            assert_eq!(segs.len(), want, "{name}");
        }
    }

    #[test]
    fn performer_is_seeded_and_sized() {
        let a = performer(5.0, 3);
        assert_eq!(a.len(), 5 * FIXTURE_SR as usize);
        assert_eq!(a, performer(5.0, 3));
        assert_ne!(a, performer(5.0, 4));
    }
}

//! A responder agent answering one query under four single-dimension
//! weightings over the fixture corpus.

use std::sync::Arc;

use improv_core::agents::{AgentConfig, AgentKind, SpireMuseAgent};
use improv_core::corpus::{build_corpus, write_wav_f32};
use improv_core::dsp::FrameAnalyzer;
use improv_core::fixtures::{corpus_sources, FIXTURE_SR};
use improv_core::listening::{annotate, AffectModel, InfluenceWeights, SegmenterConfig};
use improv_core::signals::harmonic_tone;

fn main() -> anyhow::Result<()> {
    let dir = tempfile_dir();
    let mut files = Vec::new();
    for (name, s) in corpus_sources() {
        let p = dir.join(name);
        write_wav_f32(&p, &s, FIXTURE_SR)?;
        files.push(p);
    }
    let model = AffectModel::bundled_default();
    let corpus = Arc::new(build_corpus(&files, SegmenterConfig::default(), &model)?);
    let an = FrameAnalyzer::new(FIXTURE_SR, 8192)?;
    let query = annotate(&harmonic_tone(392.0, 3, 0.4, 30_000, FIXTURE_SR), &an, 512, &model);
    let mut agent = SpireMuseAgent::new(&AgentConfig::new("muse", AgentKind::SpireMuse), corpus.clone())?;
    for (name, w) in [
        ("rhythmic", [1.0, 0.0, 0.0, 0.0]),
        ("spectral", [0.0, 1.0, 0.0, 0.0]),
        ("melodic", [0.0, 0.0, 1.0, 0.0]),
        ("harmonic", [0.0, 0.0, 0.0, 1.0]),
    ] {
        agent.set_weights(InfluenceWeights::from_array(w)?)?;
        let c = agent.candidates(&query)?;
        let ids: Vec<u32> = c.iter().map(|m| m.segment).collect();
        let best = &corpus.features[ids[0] as usize];
        println!("{name:9} top-5 {ids:?}  best: {:.3}s, f0 {:.1} Hz", best.duration_s(), best.f0_mean());
    }
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join("improv-influence");
    std::fs::create_dir_all(&d).unwrap();
    d
}

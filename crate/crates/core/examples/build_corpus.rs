//! Builds, saves and reloads a bundled corpus from the fixture sources.
//!
//!     cargo run --release --example build_corpus [OUT_DIR]

use std::path::PathBuf;

use improv_core::corpus::{build_corpus, load_corpus, save_corpus, write_wav_f32, LoadOptions};
use improv_core::fixtures::{corpus_sources, FIXTURE_SR};
use improv_core::listening::{AffectModel, SegmenterConfig};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("improv-corpus"));
    let src = out.join("src");
    std::fs::create_dir_all(&src)?;
    let mut files = Vec::new();
    for (name, samples) in corpus_sources() {
        let p = src.join(name);
        write_wav_f32(&p, &samples, FIXTURE_SR)?;
        files.push(p);
    }
    let corpus = build_corpus(&files, SegmenterConfig::default(), &AffectModel::bundled_default())?;
    let dir = out.join("corpus");
    save_corpus(&corpus, &dir, true)?;
    let back = load_corpus(&dir, &LoadOptions::default())?;
    println!("{} segments from {} sources in {}", back.len(), back.sources.len(), dir.display());
    for (i, s) in back.segments.iter().enumerate().take(5) {
        println!("  {i}: source {} at {} (+{:.3}s)", s.source_id.0, s.start, s.duration_s);
    }
    Ok(())
}

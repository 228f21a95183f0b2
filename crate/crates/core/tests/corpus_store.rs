use std::path::{Path, PathBuf};

use improv_core::corpus::{
    build_corpus, load_corpus, read_manifest_value, save_corpus, write_wav_f32, Corpus, CorpusError, EngineConfig,
    LoadOptions, FEATURES_FILE, MANIFEST_FILE,
};
use improv_core::fixtures::{corpus_sources, FIXTURE_SR};
use improv_core::listening::{AffectModel, SegmenterConfig};
use improv_core::signals::{padded, seconds, sine};

fn write_sources(dir: &Path) -> Vec<PathBuf> {
    corpus_sources()
        .into_iter()
        .map(|(name, s)| {
            let p = dir.join(name);
            write_wav_f32(&p, &s, FIXTURE_SR).unwrap();
            p
        })
        .collect()
}

fn build(files: &[PathBuf]) -> Corpus {
    build_corpus(files, SegmenterConfig::default(), &AffectModel::bundled_default()).unwrap()
}

fn quantized(c: &Corpus) -> Corpus {
    let mut q = c.clone();
    q.features = c.features.iter().map(|f| f.quantized()).collect();
    q
}

#[test]
fn one_burst_gives_one_segment() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("burst.wav");
    let burst = padded(&sine(440.0, 0.5, seconds(0.6, FIXTURE_SR), FIXTURE_SR), 4800, 4800);
    write_wav_f32(&p, &burst, FIXTURE_SR).unwrap();
    let c = build(&[p]);
    assert_eq!(c.len(), 1);
    let s = &c.segments[0];
    // Boundaries land on 512-sample blocks around the burst.
    assert!(s.start <= 4800 && s.start + 512 > 4800, "{s:?}");
    assert!((s.duration_s - 0.6).abs() < 0.03, "{s:?}");
}

#[test]
fn fixture_builds_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let files = write_sources(tmp.path());
    let a = build(&files);
    let mut b = build(&files);
    assert_eq!(a.len(), 20);
    b.built_at = a.built_at;
    assert_eq!(a, b);
    assert_eq!(a.sources.len(), 3);
    assert!(a.features.iter().all(|f| f.is_finite()));
}

#[test]
fn save_load_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let files = write_sources(tmp.path());
    let c = build(&files);
    let dir = tmp.path().join("corpus");
    save_corpus(&c, &dir, false).unwrap();
    let back = load_corpus(&dir, &LoadOptions::default()).unwrap();
    assert_eq!(back, quantized(&c));
    // A second save of the loaded corpus writes the same bytes.
    let dir2 = tmp.path().join("corpus2");
    save_corpus(&back, &dir2, false).unwrap();
    for f in [MANIFEST_FILE, FEATURES_FILE] {
        assert_eq!(std::fs::read(dir.join(f)).unwrap(), std::fs::read(dir2.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn bundled_corpus_survives_a_move() {
    let tmp = tempfile::tempdir().unwrap();
    let src_dir = tmp.path().join("src");
    std::fs::create_dir_all(&src_dir).unwrap();
    let files = write_sources(&src_dir);
    let c = build(&files);
    let dir = tmp.path().join("bundle");
    save_corpus(&c, &dir, true).unwrap();
    std::fs::remove_dir_all(&src_dir).unwrap();
    let moved = tmp.path().join("moved");
    std::fs::rename(&dir, &moved).unwrap();
    let back = load_corpus(&moved, &LoadOptions::default()).unwrap();
    assert_eq!(back.len(), c.len());
    assert!(back.sources.iter().all(|s| s.path.starts_with("audio/")));
}

#[test]
fn unsupported_version_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let c = build(&write_sources(tmp.path()));
    let dir = tmp.path().join("corpus");
    save_corpus(&c, &dir, false).unwrap();
    let mut m = read_manifest_value(&dir).unwrap();
    m["format_version"] = 2.into();
    std::fs::write(dir.join(MANIFEST_FILE), m.to_string()).unwrap();
    let e = load_corpus(&dir, &LoadOptions::default()).unwrap_err();
    assert!(matches!(e, CorpusError::UnsupportedVersion(2)), "{e}");
}

#[test]
fn corrupted_features_fail_the_checksum() {
    let tmp = tempfile::tempdir().unwrap();
    let c = build(&write_sources(tmp.path()));
    let dir = tmp.path().join("corpus");
    save_corpus(&c, &dir, false).unwrap();
    let path = dir.join(FEATURES_FILE);
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[100] ^= 0x01;
    std::fs::write(&path, bytes).unwrap();
    let e = load_corpus(&dir, &LoadOptions::default()).unwrap_err();
    assert!(matches!(e, CorpusError::ChecksumMismatch(_)), "{e}");
}

#[test]
fn changed_audio_and_engine_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let files = write_sources(tmp.path());
    let c = build(&files);
    let dir = tmp.path().join("corpus");
    save_corpus(&c, &dir, false).unwrap();

    let mut other = EngineConfig::new(SegmenterConfig::default(), &AffectModel::bundled_default());
    other.segmenter.silence_threshold_db = -50.0;
    let strict = LoadOptions {
        expected_engine: Some(other.clone()),
        ..LoadOptions::default()
    };
    assert!(matches!(load_corpus(&dir, &strict), Err(CorpusError::EngineMismatch(_))));
    let forced = LoadOptions {
        expected_engine: Some(other),
        force: true,
        ..LoadOptions::default()
    };
    assert!(load_corpus(&dir, &forced).is_ok());

    write_wav_f32(&files[1], &sine(100.0, 0.1, 48_000, FIXTURE_SR), FIXTURE_SR).unwrap();
    let e = load_corpus(&dir, &LoadOptions::default()).unwrap_err();
    assert!(matches!(e, CorpusError::AudioHashMismatch { id: 1, .. }), "{e}");
    let lax = LoadOptions {
        verify_audio: false,
        ..LoadOptions::default()
    };
    assert!(load_corpus(&dir, &lax).is_ok());
}

#[test]
fn undecodable_file_fails_the_build() {
    let tmp = tempfile::tempdir().unwrap();
    let mut files = write_sources(tmp.path());
    let junk = tmp.path().join("junk.wav");
    std::fs::write(&junk, b"not a wav file").unwrap();
    files.push(junk.clone());
    let e = build_corpus(&files, SegmenterConfig::default(), &AffectModel::bundled_default()).unwrap_err();
    match e {
        CorpusError::Build(fails) => {
            assert_eq!(fails.len(), 1);
            assert_eq!(fails[0].0, junk);
        }
        other => panic!("{other}"),
    }
}

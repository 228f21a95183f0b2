use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{file_sha256, Corpus, CorpusError, EngineConfig, SourceInfo};
use crate::listening::{FeatureVector55, NormStats, Segment, FEATURE_DIMS};

pub const FORMAT_VERSION: u64 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FEATURES_FILE: &str = "features.f32";
const AUDIO_DIR: &str = "audio";

#[derive(Debug, Serialize, Deserialize)]
struct FeaturesRef {
    file: String,
    rows: usize,
    dims: usize,
    sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u64,
    built_at: u64,
    engine: EngineConfig,
    sources: Vec<SourceInfo>,
    segments: Vec<Segment>,
    features: FeaturesRef,
    norm_stats: NormStats,
    symbol_sequences: Option<Vec<Vec<u32>>>,
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// When set, the corpus engine config must equal this one.
    pub expected_engine: Option<EngineConfig>,
    /// Accept an engine-config mismatch.
    pub force: bool,
    /// Re-hash referenced audio files.
    pub verify_audio: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            expected_engine: None,
            force: false,
            verify_audio: true,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CorpusError {
    CorpusError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn encode_features(features: &[FeatureVector55]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(features.len() * FEATURE_DIMS * 4);
    for row in features {
        for v in row.0 {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    bytes
}

fn decode_features(bytes: &[u8], rows: usize) -> Result<Vec<FeatureVector55>, CorpusError> {
    if bytes.len() != rows * FEATURE_DIMS * 4 {
        return Err(CorpusError::Malformed(format!(
            "features file has {} bytes, expected {}",
            bytes.len(),
            rows * FEATURE_DIMS * 4
        )));
    }
    Ok(bytes
        .chunks_exact(FEATURE_DIMS * 4)
        .map(|row| {
            let mut out = [0.0; FEATURE_DIMS];
            for (o, b) in out.iter_mut().zip(row.chunks_exact(4)) {
                *o = f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64;
            }
            FeatureVector55(out)
        })
        .collect())
}

pub(crate) fn resolve_source_path(corpus_dir: Option<&Path>, path: &str) -> PathBuf {
    let p = PathBuf::from(path);
    match corpus_dir {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    }
}

/// Writes `manifest.json` and `features.f32` into `dir`. With `bundle`, the
/// source audio is copied under `audio/` and referenced relatively.
pub fn save_corpus(corpus: &Corpus, dir: &Path, bundle: bool) -> Result<(), CorpusError> {
    corpus.validate()?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut sources = corpus.sources.clone();
    if bundle {
        let audio_dir = dir.join(AUDIO_DIR);
        fs::create_dir_all(&audio_dir).map_err(|e| io_err(&audio_dir, e))?;
        for s in &mut sources {
            let src = PathBuf::from(&s.path);
            let name = src
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "source.wav".into());
            let rel = format!("{AUDIO_DIR}/{:03}_{name}", s.id.0);
            let dst = dir.join(&rel);
            if src != dst {
                fs::copy(&src, &dst).map_err(|e| io_err(&src, e))?;
            }
            s.path = rel;
        }
    }
    let bytes = encode_features(&corpus.features);
    let features_path = dir.join(FEATURES_FILE);
    fs::write(&features_path, &bytes).map_err(|e| io_err(&features_path, e))?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        built_at: corpus.built_at,
        engine: corpus.engine.clone(),
        sources,
        segments: corpus.segments.clone(),
        features: FeaturesRef {
            file: FEATURES_FILE.into(),
            rows: corpus.features.len(),
            dims: FEATURE_DIMS,
            sha256: hex::encode(Sha256::digest(&bytes)),
        },
        norm_stats: corpus.norm.clone(),
        symbol_sequences: corpus.symbol_sequences.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    let manifest_path = dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, text).map_err(|e| io_err(&manifest_path, e))
}

/// Parses the manifest as untyped JSON (for tooling and determinism checks).
pub fn read_manifest_value(dir: &Path) -> Result<serde_json::Value, CorpusError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    serde_json::from_str(&text).map_err(|e| CorpusError::Malformed(format!("{}: {e}", path.display())))
}

pub fn load_corpus(dir: &Path, opts: &LoadOptions) -> Result<Corpus, CorpusError> {
    let value = read_manifest_value(dir)?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| CorpusError::Malformed("manifest lacks format_version".into()))?;
    if version != FORMAT_VERSION {
        return Err(CorpusError::UnsupportedVersion(version));
    }
    let manifest: Manifest =
        serde_json::from_value(value).map_err(|e| CorpusError::Malformed(e.to_string()))?;
    if manifest.features.dims != FEATURE_DIMS {
        return Err(CorpusError::Malformed(format!(
            "features have {} dims, expected {FEATURE_DIMS}",
            manifest.features.dims
        )));
    }
    if let Some(expected) = &opts.expected_engine {
        if *expected != manifest.engine && !opts.force {
            return Err(CorpusError::EngineMismatch(format!(
                "corpus {:?} vs current {:?}",
                manifest.engine, expected
            )));
        }
    }
    let features_path = dir.join(&manifest.features.file);
    let bytes = fs::read(&features_path).map_err(|e| io_err(&features_path, e))?;
    if hex::encode(Sha256::digest(&bytes)) != manifest.features.sha256 {
        return Err(CorpusError::ChecksumMismatch(manifest.features.file.clone()));
    }
    let features = decode_features(&bytes, manifest.features.rows)?;
    if opts.verify_audio {
        for s in &manifest.sources {
            let path = resolve_source_path(Some(dir), &s.path);
            if file_sha256(&path)? != s.content_hash {
                return Err(CorpusError::AudioHashMismatch { id: s.id.0, path });
            }
        }
    }
    let corpus = Corpus {
        engine: manifest.engine,
        built_at: manifest.built_at,
        sources: manifest.sources,
        segments: manifest.segments,
        features,
        norm: manifest.norm_stats,
        symbol_sequences: manifest.symbol_sequences,
    };
    corpus.validate()?;
    Ok(corpus)
}

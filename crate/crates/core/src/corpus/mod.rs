//! Annotated corpora: build from audio files, persist, reload.
//!
//! A corpus directory holds `manifest.json` (human-readable), `features.f32`
//! (row-major little-endian f32, 55 columns) and, once trained, the model
//! files written by [`crate::models`]. Audio stays where it was unless the
//! corpus is saved with bundling, in which case it is copied into `audio/`.

mod audio;
mod store;
mod wav;

pub use audio::AudioStore;
pub use store::{
    load_corpus, read_manifest_value, save_corpus, LoadOptions, FEATURES_FILE, FORMAT_VERSION,
    MANIFEST_FILE,
};
pub use wav::{read_wav_mono, write_wav_f32, write_wav_i16, DecodedAudio};

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dsp::{
    resample_linear, AudioBuffer, FrameAnalyzer, DEFAULT_HOP_SIZE, DEFAULT_SAMPLE_RATE,
    DEFAULT_WINDOW_SIZE,
};
use crate::listening::{
    annotate, match_features, segment_offline, AffectModel, FeatureVector55, InfluenceWeights,
    ListeningError, Match, NormStats, Segment, SegmenterConfig, SourceId, FEATURE_DIMS, STD_FLOOR,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus needs at least one audio file")]
    EmptyCorpus,
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: cannot decode audio: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("corpus build failed for {} file(s):\n{}", .0.len(), format_failures(.0))]
    Build(Vec<(PathBuf, String)>),
    #[error("unsupported corpus format version {0} (expected {FORMAT_VERSION})")]
    UnsupportedVersion(u64),
    #[error("checksum mismatch in {0}")]
    ChecksumMismatch(String),
    #[error("source {id} ({path}) no longer matches its recorded content hash")]
    AudioHashMismatch { id: u32, path: PathBuf },
    #[error("engine configuration differs from the corpus: {0} (use --force to override)")]
    EngineMismatch(String),
    #[error("malformed corpus: {0}")]
    Malformed(String),
    #[error("segment {0} cannot be resolved to audio: {1}")]
    UnresolvableSegment(u32, String),
    #[error(transparent)]
    Listening(#[from] ListeningError),
}

fn format_failures(failures: &[(PathBuf, String)]) -> String {
    failures
        .iter()
        .map(|(p, m)| format!("  {}: {m}", p.display()))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub sample_rate: u32,
    pub window_size: usize,
    pub hop_size: usize,
    pub segmenter: SegmenterConfig,
    pub affect_model_hash: String,
}

impl EngineConfig {
    pub fn new(segmenter: SegmenterConfig, affect: &AffectModel) -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            window_size: DEFAULT_WINDOW_SIZE,
            hop_size: DEFAULT_HOP_SIZE,
            segmenter,
            affect_model_hash: affect.hash(),
        }
    }

    pub fn analyzer(&self) -> FrameAnalyzer {
        FrameAnalyzer::new(self.sample_rate, self.window_size).expect("validated engine config")
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.sample_rate == 0 {
            return Err(CorpusError::Malformed("sample rate is zero".into()));
        }
        if !self.window_size.is_power_of_two() || self.hop_size == 0 || self.hop_size > self.window_size {
            return Err(CorpusError::Malformed(format!(
                "window {} / hop {} is not a valid analysis config",
                self.window_size, self.hop_size
            )));
        }
        self.segmenter.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceInfo {
    pub id: SourceId,
    /// Absolute path, or relative to the corpus directory when bundled.
    pub path: String,
    /// Native sample rate of the file.
    pub sample_rate: u32,
    /// Frames in the file at its native rate.
    pub sample_count: u64,
    /// Length after resampling to the engine rate.
    pub engine_samples: u64,
    /// SHA-256 of the file bytes, hex encoded.
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub engine: EngineConfig,
    /// Unix seconds; the only field allowed to differ between identical builds.
    pub built_at: u64,
    pub sources: Vec<SourceInfo>,
    pub segments: Vec<Segment>,
    pub features: Vec<FeatureVector55>,
    pub norm: NormStats,
    /// Per-source SOM label sequences, filled in by training.
    pub symbol_sequences: Option<Vec<Vec<u32>>>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segment(&self, id: u32) -> Option<&Segment> {
        self.segments.get(id as usize)
    }

    /// z-scored feature rows.
    pub fn normalized_features(&self) -> Vec<Vec<f64>> {
        self.features.iter().map(|f| self.norm.zscore(f)).collect()
    }

    /// Segment ids of each source in time order.
    pub fn segments_by_source(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.sources.len()];
        for (i, s) in self.segments.iter().enumerate() {
            if let Some(list) = out.get_mut(s.source_id.0 as usize) {
                list.push(i as u32);
            }
        }
        for list in &mut out {
            list.sort_by_key(|&i| self.segments[i as usize].start);
        }
        out
    }

    pub fn match_query(
        &self,
        query: &FeatureVector55,
        w: &InfluenceWeights,
        k: usize,
    ) -> Result<Vec<Match>, ListeningError> {
        match_features(query, &self.features, &self.norm, w, k)
    }

    /// Checks the structural invariants: one feature row per segment, known
    /// sources, in-bounds offsets.
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.features.len() != self.segments.len() {
            return Err(CorpusError::Malformed(format!(
                "{} feature rows for {} segments",
                self.features.len(),
                self.segments.len()
            )));
        }
        if self.norm.mean.len() != FEATURE_DIMS || self.norm.std.len() != FEATURE_DIMS {
            return Err(CorpusError::Malformed("normalization stats are not 55-dim".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            let src = self.sources.get(s.source_id.0 as usize).ok_or_else(|| {
                CorpusError::Malformed(format!("segment {i} references unknown source {}", s.source_id.0))
            })?;
            if s.length == 0 || s.end() > src.engine_samples {
                return Err(CorpusError::Malformed(format!(
                    "segment {i} [{}, {}) outside source {} ({} samples)",
                    s.start,
                    s.end(),
                    src.id.0,
                    src.engine_samples
                )));
            }
        }
        if let Some(seqs) = &self.symbol_sequences {
            let by_source = self.segments_by_source();
            if seqs.len() != by_source.len()
                || seqs.iter().zip(&by_source).any(|(a, b)| a.len() != b.len())
            {
                return Err(CorpusError::Malformed(
                    "symbol sequences do not line up with segments".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Population mean and std per dimension, std floored at 1e-6.
pub fn normalization_stats(features: &[FeatureVector55]) -> NormStats {
    let n = features.len().max(1) as f64;
    let mut mean = vec![0.0; FEATURE_DIMS];
    for f in features {
        for (m, v) in mean.iter_mut().zip(f.0.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; FEATURE_DIMS];
    for f in features {
        for ((acc, v), m) in var.iter_mut().zip(f.0.iter()).zip(&mean) {
            *acc += (v - m).powi(2);
        }
    }
    let std = var.iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
    NormStats { mean, std }
}

pub fn file_sha256(path: &Path) -> Result<String, CorpusError> {
    let bytes = std::fs::read(path).map_err(|e| CorpusError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Decodes a file, mixes to mono and resamples to the engine rate.
pub fn load_engine_audio(path: &Path, sample_rate: u32) -> Result<(DecodedAudio, Vec<f32>), CorpusError> {
    let decoded = read_wav_mono(path)?;
    let resampled = resample_linear(&decoded.samples, decoded.sample_rate, sample_rate);
    Ok((decoded, resampled))
}

struct FileResult {
    source: SourceInfo,
    segments: Vec<Segment>,
    features: Vec<FeatureVector55>,
}

fn build_one(
    id: SourceId,
    path: &Path,
    engine: &EngineConfig,
    analyzer: &FrameAnalyzer,
    affect: &AffectModel,
) -> Result<FileResult, CorpusError> {
    let abs = std::fs::canonicalize(path).map_err(|e| CorpusError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let content_hash = file_sha256(&abs)?;
    let (decoded, samples) = load_engine_audio(&abs, engine.sample_rate)?;
    let buffer = AudioBuffer::new(samples, engine.sample_rate).map_err(|e| CorpusError::Decode {
        path: abs.clone(),
        message: e.to_string(),
    })?;
    let segments = segment_offline(&buffer, &engine.segmenter, engine.hop_size, id);
    let features = segments
        .iter()
        .map(|s| {
            let slice = &buffer.samples()[s.start as usize..s.end() as usize];
            annotate(slice, analyzer, engine.hop_size, affect).quantized()
        })
        .collect();
    Ok(FileResult {
        source: SourceInfo {
            id,
            path: abs.to_string_lossy().into_owned(),
            sample_rate: decoded.sample_rate,
            sample_count: decoded.frames,
            engine_samples: buffer.len() as u64,
            content_hash,
        },
        segments,
        features,
    })
}

/// Builds a corpus from audio files. Files are processed in parallel and
/// merged in input order; any failing file fails the whole build.
pub fn build_corpus(
    files: &[PathBuf],
    segmenter: SegmenterConfig,
    affect: &AffectModel,
) -> Result<Corpus, CorpusError> {
    build_corpus_with(files, EngineConfig::new(segmenter, affect), affect)
}

pub fn build_corpus_with(
    files: &[PathBuf],
    engine: EngineConfig,
    affect: &AffectModel,
) -> Result<Corpus, CorpusError> {
    if files.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    engine.validate()?;
    affect.validate()?;
    let analyzer = engine.analyzer();
    let results: Vec<Result<FileResult, CorpusError>> = files
        .par_iter()
        .enumerate()
        .map(|(i, p)| build_one(SourceId(i as u32), p, &engine, &analyzer, affect))
        .collect();
    let mut failures = Vec::new();
    let mut ok = Vec::new();
    for (path, r) in files.iter().zip(results) {
        match r {
            Ok(r) => ok.push(r),
            Err(e) => failures.push((path.clone(), e.to_string())),
        }
    }
    if !failures.is_empty() {
        return Err(CorpusError::Build(failures));
    }
    let mut corpus = Corpus {
        engine,
        built_at: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        sources: Vec::with_capacity(ok.len()),
        segments: Vec::new(),
        features: Vec::new(),
        norm: NormStats::identity(),
        symbol_sequences: None,
    };
    for r in ok {
        corpus.sources.push(r.source);
        corpus.segments.extend(r.segments);
        corpus.features.extend(r.features);
    }
    corpus.norm = normalization_stats(&corpus.features);
    Ok(corpus)
}

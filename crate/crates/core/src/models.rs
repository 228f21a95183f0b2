//! Training pipeline over a corpus and the model files kept next to it.
//!
//! Files written into the corpus directory:
//!
//! | file          | content                                          |
//! |---------------|--------------------------------------------------|
//! | `som.json`    | SOM header (grid, dims, seed, config, checksum)  |
//! | `som.f64`     | SOM weights, little-endian f64, row-major        |
//! | `vmm.txt`     | VMM context counts, one context per line         |
//! | `oracle.txt`  | factor oracle adjacency, one state per line      |
//! | `models.json` | training options, QE before/after, state map     |

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{save_corpus, Corpus, CorpusError};
use crate::sequence::{fo_build, vmm_build_with_alphabet, FactorOracle, SequenceError, VmmModel, DEFAULT_MAX_ORDER};
use crate::som::{default_grid, label_sequence, train_som, Som, SomError, SomTrainConfig};

pub const VMM_FILE: &str = "vmm.txt";
pub const ORACLE_FILE: &str = "oracle.txt";
pub const MODELS_FILE: &str = "models.json";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Som(#[from] SomError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("models do not match the corpus: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    /// `None` picks the default grid for the corpus size.
    pub grid: Option<(usize, usize)>,
    pub epochs: u32,
    pub seed: u64,
    pub learning_rate: f64,
    /// `None` uses half the longer grid side.
    pub neighborhood: Option<f64>,
    pub max_order: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            grid: None,
            epochs: 50,
            seed: 0,
            learning_rate: 0.5,
            neighborhood: None,
            max_order: DEFAULT_MAX_ORDER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub grid: (usize, usize),
    pub qe_before: f64,
    pub qe_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModels {
    pub som: Som,
    pub vmm: VmmModel,
    pub oracle: FactorOracle,
    /// Segment id behind oracle state `k` at index `k - 1`.
    pub oracle_segments: Vec<u32>,
    /// SOM node of every corpus segment, by segment id.
    pub labels: Vec<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelsMeta {
    options: TrainOptions,
    report: TrainReport,
    oracle_segments: Vec<u32>,
}

/// Trains SOM, labels the corpus (filling its symbol sequences), then fits
/// the VMM over the per-source sequences and the oracle over their
/// concatenation in source order.
pub fn train_models(corpus: &mut Corpus, opts: &TrainOptions) -> Result<(TrainedModels, TrainReport), ModelError> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus.into());
    }
    let rows = corpus.normalized_features();
    let grid = opts.grid.unwrap_or_else(|| default_grid(rows.len()));
    let mut cfg = SomTrainConfig::for_grid(grid.0, grid.1, opts.seed);
    cfg.epochs = opts.epochs;
    cfg.learning_rate = opts.learning_rate;
    if let Some(s) = opts.neighborhood {
        cfg.neighborhood = s;
    }
    cfg.validate()?;
    let qe_before = Som::initialize(&rows, grid, &cfg)?.quantization_error(&rows);
    let som = train_som(&rows, grid, &cfg)?;
    let qe_after = som.quantization_error(&rows);
    let sequences = label_sequence(corpus, &som);
    let vmm = vmm_build_with_alphabet(&sequences, opts.max_order, som.num_nodes())?;
    let by_source = corpus.segments_by_source();
    let oracle_segments: Vec<u32> = by_source.iter().flatten().copied().collect();
    let flat: Vec<u32> = sequences.iter().flatten().copied().collect();
    let oracle = fo_build(&flat);
    let mut labels = vec![0u32; corpus.len()];
    for (ids, seq) in by_source.iter().zip(&sequences) {
        for (&id, &l) in ids.iter().zip(seq) {
            labels[id as usize] = l;
        }
    }
    corpus.symbol_sequences = Some(sequences);
    let report = TrainReport { grid, qe_before, qe_after };
    Ok((
        TrainedModels {
            som,
            vmm,
            oracle,
            oracle_segments,
            labels,
        },
        report,
    ))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), ModelError> {
    let p = dir.join(name);
    fs::write(&p, text).map_err(|e| ModelError::Io {
        path: p.display().to_string(),
        message: e.to_string(),
    })
}

fn read(dir: &Path, name: &str) -> Result<String, ModelError> {
    let p = dir.join(name);
    fs::read_to_string(&p).map_err(|e| ModelError::Io {
        path: p.display().to_string(),
        message: e.to_string(),
    })
}

/// Writes model files and rewrites the manifest with the symbol sequences.
pub fn save_models(
    dir: &Path,
    corpus: &Corpus,
    models: &TrainedModels,
    opts: &TrainOptions,
    report: &TrainReport,
) -> Result<(), ModelError> {
    save_corpus(corpus, dir, false)?;
    models.som.save(dir)?;
    write(dir, VMM_FILE, &models.vmm.to_text())?;
    write(dir, ORACLE_FILE, &models.oracle.to_text())?;
    let meta = ModelsMeta {
        options: opts.clone(),
        report: report.clone(),
        oracle_segments: models.oracle_segments.clone(),
    };
    write(dir, MODELS_FILE, &(serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n"))
}

pub fn models_present(dir: &Path) -> bool {
    [VMM_FILE, ORACLE_FILE, MODELS_FILE, crate::som::SOM_HEADER_FILE]
        .iter()
        .all(|f| dir.join(f).is_file())
}

/// Loads models saved by [`save_models`] and checks them against `corpus`.
pub fn load_models(dir: &Path, corpus: &Corpus) -> Result<TrainedModels, ModelError> {
    let som = Som::load(dir)?;
    let vmm = VmmModel::from_text(&read(dir, VMM_FILE)?)?;
    let oracle = FactorOracle::from_text(&read(dir, ORACLE_FILE)?)?;
    let meta: ModelsMeta = serde_json::from_str(&read(dir, MODELS_FILE)?).map_err(|e| ModelError::Io {
        path: dir.join(MODELS_FILE).display().to_string(),
        message: e.to_string(),
    })?;
    if som.dim != crate::listening::FEATURE_DIMS {
        return Err(ModelError::Mismatch(format!("SOM has {} dims", som.dim)));
    }
    if meta.oracle_segments.len() != oracle.len() || meta.oracle_segments.iter().any(|&s| s as usize >= corpus.len()) {
        return Err(ModelError::Mismatch("oracle state map does not fit the corpus".into()));
    }
    let labels = corpus
        .features
        .iter()
        .map(|f| som.bmu(&corpus.norm.zscore(f)) as u32)
        .collect();
    Ok(TrainedModels {
        som,
        vmm,
        oracle,
        oracle_segments: meta.oracle_segments,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::toy_corpus;

    #[test]
    fn alternating_timbres_alternate_symbols() {
        let mut c = toy_corpus(6);
        let (m, report) = train_models(&mut c, &TrainOptions { grid: Some((2, 1)), ..Default::default() }).unwrap();
        let seq = &c.symbol_sequences.as_ref().unwrap()[0];
        assert_eq!(seq.len(), 6);
        assert!(seq.windows(2).all(|w| w[0] != w[1]));
        assert_eq!(m.oracle.len(), 6);
        assert_eq!(m.oracle_segments, (0..6).collect::<Vec<_>>());
        assert!(report.qe_after < 0.01, "{report:?}");
    }

    #[test]
    fn one_segment_one_label() {
        let mut c = toy_corpus(1);
        let (m, _) = train_models(&mut c, &TrainOptions { grid: Some((1, 1)), ..Default::default() }).unwrap();
        assert_eq!(c.symbol_sequences.unwrap(), vec![vec![0]]);
        assert_eq!(m.labels, vec![0]);
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("toy.wav");
        crate::corpus::write_wav_f32(&src, &vec![0.1; 6 * 48_000], 48_000).unwrap();
        let mut c = toy_corpus(6);
        c.sources[0].path = src.display().to_string();
        c.sources[0].content_hash = crate::corpus::file_sha256(&src).unwrap();
        let opts = TrainOptions { grid: Some((2, 2)), seed: 3, ..Default::default() };
        let (m, r) = train_models(&mut c, &opts).unwrap();
        save_models(dir.path(), &c, &m, &opts, &r).unwrap();
        assert!(models_present(dir.path()));
        let loaded_corpus = crate::corpus::load_corpus(dir.path(), &Default::default()).unwrap();
        assert_eq!(loaded_corpus.symbol_sequences, c.symbol_sequences);
        assert_eq!(load_models(dir.path(), &loaded_corpus).unwrap(), m);
    }
}

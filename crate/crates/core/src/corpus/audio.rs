use std::path::Path;
use std::sync::Arc;

use super::store::resolve_source_path;
use super::{load_engine_audio, Corpus, CorpusError};
use crate::listening::Segment;

/// Engine-rate mono audio for every source of a corpus, plus the segment
/// table needed to slice it.
#[derive(Debug, Clone)]
pub struct AudioStore {
    sources: Vec<Arc<Vec<f32>>>,
    segments: Vec<Segment>,
}

impl AudioStore {
    /// Decodes and resamples each referenced source file. Relative paths
    /// resolve against `corpus_dir`.
    pub fn open(corpus: &Corpus, corpus_dir: Option<&Path>) -> Result<Self, CorpusError> {
        let sources = corpus
            .sources
            .iter()
            .map(|s| {
                let path = resolve_source_path(corpus_dir, &s.path);
                let (_, samples) = load_engine_audio(&path, corpus.engine.sample_rate)?;
                if samples.len() as u64 != s.engine_samples {
                    return Err(CorpusError::Malformed(format!(
                        "source {} decodes to {} samples, manifest says {}",
                        s.id.0,
                        samples.len(),
                        s.engine_samples
                    )));
                }
                Ok(Arc::new(samples))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            sources,
            segments: corpus.segments.clone(),
        })
    }

    /// In-memory store, mainly for tests and synthetic corpora.
    pub fn from_parts(sources: Vec<Vec<f32>>, segments: Vec<Segment>) -> Self {
        Self {
            sources: sources.into_iter().map(Arc::new).collect(),
            segments,
        }
    }

    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn segment_len(&self, id: u32) -> Option<u64> {
        self.segments.get(id as usize).map(|s| s.length)
    }

    pub fn segment_samples(&self, id: u32) -> Result<&[f32], CorpusError> {
        let seg = self
            .segments
            .get(id as usize)
            .ok_or_else(|| CorpusError::UnresolvableSegment(id, "no such segment".into()))?;
        let src = self.sources.get(seg.source_id.0 as usize).ok_or_else(|| {
            CorpusError::UnresolvableSegment(id, format!("source {} not loaded", seg.source_id.0))
        })?;
        src.get(seg.start as usize..seg.end() as usize).ok_or_else(|| {
            CorpusError::UnresolvableSegment(
                id,
                format!("[{}, {}) beyond {} samples", seg.start, seg.end(), src.len()),
            )
        })
    }
}

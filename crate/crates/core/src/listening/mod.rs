//! Machine listening: segmentation, 55-dimension annotation, affect and
//! influence-weighted matching.

mod affect;
mod features;
mod matching;
mod segmenter;

pub use affect::{
    affect, fit_affect_model, fit_default_model, synthetic_training_set, AffectExample,
    AffectModel,
};
pub use features::{
    annotate, lowlevel_stats, segment_frames, FeatureVector55, AROUSAL, CHROMA_MEAN, CHROMA_STD,
    DURATION, F0_MEAN, F0_STD, FEATURE_DIMS, LOUDNESS_MEAN, LOUDNESS_STD, LOWLEVEL_DIMS,
    MFCC_MEAN, MFCC_STD, VALENCE,
};
pub use matching::{
    match_features, weighted_distance, InfluenceWeights, Match, NormStats, CHROMA_BLOCK,
    DURATION_BLOCK, F0_BLOCK, MFCC_BLOCK, STD_FLOOR,
};
pub use segmenter::{
    segment_offline, Segment, SegmentEvent, SegmenterConfig, SourceId, StreamingSegmenter,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ListeningError {
    #[error("{what}: expected {expected} entries, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("no match: corpus is empty")]
    NoMatch,
    #[error("invalid influence weights: {0}")]
    InvalidWeights(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

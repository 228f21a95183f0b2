//! Loudness-gate segmentation with hangover and forced max-length splits.
//!
//! Decisions are made per block of `hop` samples: a block is "loud" when its
//! RMS level is above the threshold. A segment opens on the first loud
//! block and closes after `hangover_frames` consecutive quiet blocks, ending
//! at the last loud block. The offline scan and the streaming state machine
//! are written separately and must agree on every boundary.

use serde::{Deserialize, Serialize};

use super::ListeningError;
use crate::dsp::{loudness, AudioBuffer, LOUDNESS_FLOOR_DB};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SourceId(pub u32);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub source_id: SourceId,
    /// Offset in samples from the start of the source.
    pub start: u64,
    pub length: u64,
    pub duration_s: f64,
}

impl Segment {
    pub fn new(source_id: SourceId, start: u64, length: u64, sample_rate: u32) -> Self {
        Self {
            source_id,
            start,
            length,
            duration_s: length as f64 / sample_rate as f64,
        }
    }

    pub fn end(&self) -> u64 {
        self.start + self.length
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmenterConfig {
    pub silence_threshold_db: f64,
    pub min_segment_s: f64,
    pub max_segment_s: f64,
    pub hangover_frames: u32,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            silence_threshold_db: -60.0,
            min_segment_s: 0.25,
            max_segment_s: 8.0,
            hangover_frames: 4,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<(), ListeningError> {
        if !(LOUDNESS_FLOOR_DB..=0.0).contains(&self.silence_threshold_db) {
            return Err(ListeningError::InvalidConfig(format!(
                "silence threshold {} dB outside [-120, 0]",
                self.silence_threshold_db
            )));
        }
        if !(self.min_segment_s >= 0.0 && self.min_segment_s < self.max_segment_s) {
            return Err(ListeningError::InvalidConfig(format!(
                "min_segment_s {} must be non-negative and below max_segment_s {}",
                self.min_segment_s, self.max_segment_s
            )));
        }
        Ok(())
    }

    fn max_blocks(&self, sample_rate: u32, hop: usize) -> u64 {
        ((self.max_segment_s * sample_rate as f64 / hop as f64).floor() as u64).max(1)
    }

    fn long_enough(&self, length: u64, sample_rate: u32) -> bool {
        length > 0 && length as f64 / sample_rate as f64 >= self.min_segment_s
    }
}

/// Offline segmentation of a whole buffer.
pub fn segment_offline(
    buffer: &AudioBuffer,
    cfg: &SegmenterConfig,
    hop: usize,
    source_id: SourceId,
) -> Vec<Segment> {
    let sr = buffer.sample_rate();
    let total = buffer.len() as u64;
    let loud: Vec<bool> = buffer
        .samples()
        .chunks(hop)
        .map(|b| loudness(b) > cfg.silence_threshold_db)
        .collect();
    let max_blocks = cfg.max_blocks(sr, hop);
    let hop = hop as u64;

    let mut out = Vec::new();
    let close = |start: u64, loud_end: u64, out: &mut Vec<Segment>| {
        let s = start * hop;
        let e = (loud_end * hop).min(total);
        if cfg.long_enough(e - s, sr) {
            out.push(Segment::new(source_id, s, e - s, sr));
        }
    };

    let mut open: Option<(u64, u64)> = None; // (start block, loud end block)
    let mut quiet = 0u32;
    for (i, &is_loud) in loud.iter().enumerate() {
        let i = i as u64;
        match open {
            None if is_loud => {
                open = Some((i, i + 1));
                quiet = 0;
            }
            None => {}
            Some((start, _)) if is_loud => {
                open = Some((start, i + 1));
                quiet = 0;
            }
            Some((start, end)) => {
                quiet += 1;
                if quiet >= cfg.hangover_frames {
                    close(start, end, &mut out);
                    open = None;
                }
                continue;
            }
        }
        if let Some((start, end)) = open {
            if end - start >= max_blocks {
                close(start, end, &mut out);
                open = None;
            }
        }
    }
    if let Some((start, end)) = open {
        close(start, end, &mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentEvent {
    Started {
        source_id: SourceId,
        start: u64,
    },
    /// Carries the segment's samples so listeners need not keep history.
    Ended { segment: Segment, samples: Vec<f32> },
}

#[derive(Debug)]
struct Open {
    start: u64,
    loud_end: u64,
    quiet: u32,
    buf: Vec<f32>,
}

/// Incremental segmenter for one input stream.
#[derive(Debug)]
pub struct StreamingSegmenter {
    cfg: SegmenterConfig,
    sample_rate: u32,
    max_len: u64,
    source_id: SourceId,
    position: u64,
    open: Option<Open>,
    capacity: usize,
}

impl StreamingSegmenter {
    pub fn new(cfg: SegmenterConfig, sample_rate: u32, hop: usize, source_id: SourceId) -> Self {
        let max_blocks = cfg.max_blocks(sample_rate, hop);
        let capacity = ((max_blocks + cfg.hangover_frames as u64 + 1) * hop as u64) as usize;
        Self {
            max_len: max_blocks * hop as u64,
            cfg,
            sample_rate,
            source_id,
            position: 0,
            open: None,
            capacity,
        }
    }

    /// Samples consumed so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn is_open(&self) -> bool {
        self.open.is_some()
    }

    fn close(&mut self, events: &mut Vec<SegmentEvent>) {
        if let Some(mut open) = self.open.take() {
            let len = open.loud_end - open.start;
            if self.cfg.long_enough(len, self.sample_rate) {
                open.buf.truncate(len as usize);
                events.push(SegmentEvent::Ended {
                    segment: Segment::new(self.source_id, open.start, len, self.sample_rate),
                    samples: open.buf,
                });
            }
        }
    }

    pub fn push(&mut self, block: &[f32]) -> Vec<SegmentEvent> {
        let mut events = Vec::new();
        if block.is_empty() {
            return events;
        }
        let block_start = self.position;
        let block_end = block_start + block.len() as u64;
        self.position = block_end;
        let is_loud = loudness(block) > self.cfg.silence_threshold_db;

        match &mut self.open {
            None if is_loud => {
                let mut buf = Vec::with_capacity(self.capacity);
                buf.extend_from_slice(block);
                self.open = Some(Open {
                    start: block_start,
                    loud_end: block_end,
                    quiet: 0,
                    buf,
                });
                events.push(SegmentEvent::Started {
                    source_id: self.source_id,
                    start: block_start,
                });
            }
            None => return events,
            Some(open) => {
                open.buf.extend_from_slice(block);
                if is_loud {
                    open.loud_end = block_end;
                    open.quiet = 0;
                } else {
                    open.quiet += 1;
                    if open.quiet >= self.cfg.hangover_frames {
                        self.close(&mut events);
                    }
                    return events;
                }
            }
        }
        if let Some(open) = &self.open {
            if open.loud_end - open.start >= self.max_len {
                self.close(&mut events);
            }
        }
        events
    }

    /// Closes a segment still open at end of stream.
    pub fn flush(&mut self) -> Vec<SegmentEvent> {
        let mut events = Vec::new();
        self.close(&mut events);
        events
    }
}

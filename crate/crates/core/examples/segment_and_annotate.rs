//! Streams the fixture performer through the block segmenter and prints
//! each segment with its feature summary and affect estimate.

use improv_core::dsp::FrameAnalyzer;
use improv_core::fixtures::{performer, FIXTURE_SR};
use improv_core::listening::{annotate, AffectModel, SegmentEvent, SegmenterConfig, SourceId, StreamingSegmenter};

fn main() {
    let x = performer(8.0, 1);
    let an = FrameAnalyzer::new(FIXTURE_SR, 8192).unwrap();
    let model = AffectModel::bundled_default();
    let mut seg = StreamingSegmenter::new(SegmenterConfig::default(), FIXTURE_SR, 512, SourceId(0));
    let mut events = Vec::new();
    for block in x.chunks(512) {
        events.extend(seg.push(block));
    }
    events.extend(seg.flush());
    for e in events {
        if let SegmentEvent::Ended { segment, samples } = e {
            let f = annotate(&samples, &an, 512, &model);
            println!(
                "{:6.3}s  {:.3}s  f0 {:7.2} Hz  valence {:+.2} arousal {:+.2}",
                segment.start as f64 / FIXTURE_SR as f64,
                f.duration_s(),
                f.f0_mean(),
                f.valence(),
                f.arousal()
            );
        }
    }
}

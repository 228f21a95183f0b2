//! Renders a hand-written playback plan over the fixture tone source with
//! overlapping events, and writes the result as a WAV.
//!
//!     cargo run --example concatenative_render [OUT.wav]

use improv_core::agents::{render, PlanEvent, PlaybackPlan};
use improv_core::corpus::{write_wav_f32, AudioStore};
use improv_core::dsp::AudioBuffer;
use improv_core::fixtures::{corpus_sources, FIXTURE_SR};
use improv_core::listening::{segment_offline, SegmenterConfig, SourceId};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "render.wav".into());
    let (_, tones) = corpus_sources().remove(0);
    let segs = segment_offline(&AudioBuffer::new(tones.clone(), FIXTURE_SR)?, &SegmenterConfig::default(), 512, SourceId(0));
    let store = AudioStore::from_parts(vec![tones], segs.clone());
    let mut plan = PlaybackPlan::new();
    let mut t = 0.0;
    for (i, id) in [0u32, 2, 4, 6, 7, 5, 3, 1].into_iter().enumerate() {
        let d = segs[id as usize].duration_s;
        plan.push(PlanEvent::new(id, t, if i % 2 == 0 { 0.0 } else { -6.0 }, 20.0, d))?;
        // Overlap each next event by 15 ms so the crossfade engages.
        t += d - 0.015;
    }
    let r = render(&plan, &store, FIXTURE_SR)?;
    write_wav_f32(std::path::Path::new(&out), r.audio.samples(), FIXTURE_SR)?;
    println!("{} events, {:.2}s, {} samples soft-clipped -> {out}", plan.events.len(), r.audio.duration_s(), r.clipped_samples);
    Ok(())
}

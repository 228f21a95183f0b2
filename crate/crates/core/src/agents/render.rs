use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use super::{db_to_gain, AgentError, PlanEvent, PlaybackPlan};
use crate::corpus::AudioStore;
use crate::dsp::AudioBuffer;

const KNEE: f64 = 0.8;

#[derive(Debug, Clone)]
struct Voice {
    segment: u32,
    start: u64,
    len: u64,
    gain: f64,
    fade_in: u64,
    fade_out: u64,
}

impl Voice {
    fn end(&self) -> u64 {
        self.start + self.len
    }

    fn envelope(&self, n: u64) -> f64 {
        let mut e = 1.0;
        if n < self.fade_in {
            e *= (FRAC_PI_2 * (n as f64 + 0.5) / self.fade_in as f64).sin();
        }
        if n + self.fade_out >= self.len {
            let m = n + self.fade_out - self.len;
            e *= (FRAC_PI_2 * (m as f64 + 0.5) / self.fade_out as f64).cos();
        }
        e
    }
}

/// Voice list shared by offline rendering and the block player. Samples are
/// summed in event order, so both paths produce the same mix.
#[derive(Debug, Clone)]
pub struct PlanMixer {
    sample_rate: u32,
    voices: Vec<Voice>,
    first_live: usize,
}

impl PlanMixer {
    pub fn new(sample_rate: u32) -> Self {
        Self {
            sample_rate,
            voices: Vec::new(),
            first_live: 0,
        }
    }

    /// Adds an event. If it starts within the crossfade window before the
    /// previous voice ends, both get matching sin/cos fades over the overlap.
    pub fn add(&mut self, e: &PlanEvent, store: &AudioStore) -> Result<(), AgentError> {
        let index = self.voices.len();
        let len = store
            .segment_len(e.segment)
            .ok_or_else(|| AgentError::InvalidPlan {
                index,
                message: format!("segment {} does not exist", e.segment),
            })?;
        store.segment_samples(e.segment)?;
        let sr = self.sample_rate as f64;
        let start = (e.start_s * sr).round().max(0.0) as u64;
        if let Some(prev) = self.voices.last() {
            if start < prev.start {
                return Err(AgentError::InvalidPlan {
                    index,
                    message: "event starts before the previous one".into(),
                });
            }
        }
        let mut voice = Voice {
            segment: e.segment,
            start,
            len,
            gain: db_to_gain(e.gain_db),
            fade_in: 0,
            fade_out: 0,
        };
        if let Some(prev) = self.voices.last_mut() {
            let window = ((e.crossfade_ms * sr / 1000.0).round() as u64).min(len / 2).min(prev.len / 2);
            let overlap = prev.end().saturating_sub(start);
            if overlap > 0 && overlap <= window {
                prev.fade_out = overlap;
                voice.fade_in = overlap;
            }
        }
        self.voices.push(voice);
        Ok(())
    }

    /// End sample of the latest-ending voice.
    pub fn end(&self) -> u64 {
        self.voices.iter().map(Voice::end).max().unwrap_or(0)
    }

    /// Adds the mix of `[start, start + out.len())` into `out`.
    pub fn mix_into(&mut self, store: &AudioStore, start: u64, out: &mut [f32]) {
        let stop = start + out.len() as u64;
        while self.first_live < self.voices.len() && self.voices[self.first_live].end() <= start {
            self.first_live += 1;
        }
        for v in &self.voices[self.first_live..] {
            if v.start >= stop {
                break;
            }
            if v.end() <= start {
                continue;
            }
            let src = store.segment_samples(v.segment).expect("checked when added");
            let from = v.start.max(start);
            let to = v.end().min(stop);
            for t in from..to {
                let n = t - v.start;
                let x = src[n as usize] as f64 * v.gain * v.envelope(n);
                out[(t - start) as usize] += x as f32;
            }
        }
    }
}

/// Soft knee above 0.8 that stays inside (-1, 1). Applied to the whole mix
/// when any sample exceeds 1; returns how many did.
pub fn soft_clip(samples: &mut [f32]) -> usize {
    let over = samples.iter().filter(|s| s.abs() > 1.0).count();
    if over > 0 {
        for s in samples.iter_mut() {
            let a = s.abs() as f64;
            if a > KNEE {
                let y = KNEE + (1.0 - KNEE) * ((a - KNEE) / (1.0 - KNEE)).tanh();
                *s = (y as f32).copysign(*s);
            }
        }
    }
    over
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub audio: AudioBuffer,
    /// Samples that exceeded ±1 before soft clipping.
    pub clipped_samples: usize,
}

pub fn render(plan: &PlaybackPlan, store: &AudioStore, sample_rate: u32) -> Result<RenderOutput, AgentError> {
    let mut mixer = PlanMixer::new(sample_rate);
    for e in &plan.events {
        mixer.add(e, store)?;
    }
    let mut out = vec![0.0f32; mixer.end() as usize];
    mixer.mix_into(store, 0, &mut out);
    let clipped_samples = soft_clip(&mut out);
    let audio = AudioBuffer::new(out, sample_rate).map_err(|e| AgentError::InvalidPlan {
        index: 0,
        message: e.to_string(),
    })?;
    Ok(RenderOutput { audio, clipped_samples })
}

/// Block-at-a-time playback of a growing plan. Events must be added before
/// the block containing their start is pulled.
#[derive(Debug, Clone)]
pub struct PlanPlayer {
    store: Arc<AudioStore>,
    mixer: PlanMixer,
    position: u64,
}

impl PlanPlayer {
    pub fn new(store: Arc<AudioStore>, sample_rate: u32) -> Self {
        Self {
            store,
            mixer: PlanMixer::new(sample_rate),
            position: 0,
        }
    }

    pub fn add(&mut self, e: &PlanEvent) -> Result<(), AgentError> {
        self.mixer.add(e, &self.store)
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    /// Unclipped mix of the next `len` samples.
    pub fn next_block(&mut self, len: usize) -> Vec<f32> {
        let mut out = vec![0.0; len];
        self.mixer.mix_into(&self.store, self.position, &mut out);
        self.position += len as u64;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::PlanEvent;
    use crate::listening::{Segment, SourceId};
    use crate::signals;
    use proptest::prelude::*;

    const SR: u32 = 48_000;

    fn store_with(src: Vec<f32>, cuts: &[(u64, u64)]) -> AudioStore {
        let segs = cuts
            .iter()
            .map(|&(s, l)| Segment::new(SourceId(0), s, l, SR))
            .collect();
        AudioStore::from_parts(vec![src], segs)
    }

    fn tone() -> Vec<f32> {
        signals::sine(440.0, 0.6, SR as usize, SR)
    }

    #[test]
    fn single_event_is_identity() {
        let src = tone();
        let store = store_with(src.clone(), &[(1000, 9000)]);
        let plan = PlaybackPlan { events: vec![PlanEvent::new(0, 0.0, 0.0, 20.0, 9000.0 / SR as f64)] };
        let out = render(&plan, &store, SR).unwrap();
        assert_eq!(out.audio.samples(), &src[1000..10_000]);
        assert_eq!(out.clipped_samples, 0);
    }

    #[test]
    fn back_to_back_concatenates() {
        let src = tone();
        let store = store_with(src.clone(), &[(0, 4800), (10_000, 2400)]);
        let plan = PlaybackPlan {
            events: vec![
                PlanEvent::new(0, 0.0, 0.0, 0.0, 0.1),
                PlanEvent::new(1, 0.1, 0.0, 0.0, 0.05),
            ],
        };
        let out = render(&plan, &store, SR).unwrap();
        assert_eq!(out.audio.len(), 7200);
        assert_eq!(&out.audio.samples()[..4800], &src[..4800]);
        assert_eq!(&out.audio.samples()[4800..], &src[10_000..12_400]);
    }

    #[test]
    fn full_overlap_at_minus_six_db_keeps_peak() {
        let src = tone();
        let store = store_with(src.clone(), &[(0, 24_000), (0, 24_000)]);
        let half = -20.0 * 2f64.log10();
        let plan = PlaybackPlan {
            events: vec![PlanEvent::new(0, 0.0, half, 20.0, 0.5), PlanEvent::new(1, 0.0, half, 20.0, 0.5)],
        };
        let out = render(&plan, &store, SR).unwrap();
        let peak = |x: &[f32]| x.iter().fold(0f32, |m, v| m.max(v.abs()));
        assert!((peak(out.audio.samples()) - peak(&src[..24_000])).abs() < 1e-3);
    }

    #[test]
    fn crossfade_keeps_constant_power() {
        // A DC source makes the overlap sum sin·a + cos·a; its power is
        // sin²+cos² = 1 relative to each side.
        let src = vec![0.5f32; 20_000];
        let store = store_with(src, &[(0, 10_000), (10_000, 10_000)]);
        let fade_s = 0.02;
        let plan = PlaybackPlan {
            events: vec![
                PlanEvent::new(0, 0.0, 0.0, 20.0, 10_000.0 / SR as f64),
                PlanEvent::new(1, 10_000.0 / SR as f64 - fade_s, 0.0, 20.0, 10_000.0 / SR as f64),
            ],
        };
        let mut m = PlanMixer::new(SR);
        for e in &plan.events {
            m.add(e, &store).unwrap();
        }
        let f = m.voices[0].fade_out;
        assert_eq!(f, 960);
        assert_eq!(m.voices[1].fade_in, 960);
        for n in 0..f {
            let a = m.voices[0].envelope(10_000 - f + n);
            let b = m.voices[1].envelope(n);
            assert!((a * a + b * b - 1.0).abs() < 1e-12);
        }
        let out = render(&plan, &store, SR).unwrap();
        assert_eq!(out.audio.len(), 19_040);
    }

    #[test]
    fn loud_mix_is_soft_clipped() {
        let src = vec![0.9f32; 1000];
        let store = store_with(src, &[(0, 1000), (0, 1000)]);
        let plan = PlaybackPlan {
            events: vec![PlanEvent::new(0, 0.0, 0.0, 0.0, 0.1), PlanEvent::new(1, 0.0, 0.0, 0.0, 0.1)],
        };
        let out = render(&plan, &store, SR).unwrap();
        assert_eq!(out.clipped_samples, 1000);
        assert!(out.audio.samples().iter().all(|s| s.abs() < 1.0));
        let mut quiet = vec![0.5f32, -0.95];
        assert_eq!(soft_clip(&mut quiet), 0);
        assert_eq!(quiet, vec![0.5, -0.95]);
    }

    #[test]
    fn unresolvable_segment_is_named() {
        let store = AudioStore::from_parts(vec![vec![0.0; 10]], vec![Segment::new(SourceId(0), 0, 100, SR)]);
        let plan = PlaybackPlan { events: vec![PlanEvent::new(0, 0.0, 0.0, 0.0, 1.0)] };
        let err = render(&plan, &store, SR).unwrap_err().to_string();
        assert!(err.contains("segment 0"), "{err}");
        let plan = PlaybackPlan { events: vec![PlanEvent::new(5, 0.0, 0.0, 0.0, 1.0)] };
        assert!(render(&plan, &store, SR).unwrap_err().to_string().contains("segment 5"));
    }

    proptest! {
        #[test]
        fn player_blocks_match_offline_render(
            starts in prop::collection::vec(0u64..2000, 1..8),
            segs in prop::collection::vec(0u32..3, 8),
            block in 64usize..700,
        ) {
            let store = store_with(tone(), &[(0, 3000), (5000, 1500), (9000, 800)]);
            let mut starts = starts;
            starts.sort_unstable();
            let mut plan = PlaybackPlan::new();
            for (i, s) in starts.iter().enumerate() {
                let seg = segs[i];
                let dur = store.segment_len(seg).unwrap() as f64 / SR as f64;
                plan.push(PlanEvent::new(seg, *s as f64 * 4.0 / SR as f64, -3.0, 20.0, dur)).unwrap();
            }
            let offline = render(&plan, &store, SR).unwrap();
            let mut player = PlanPlayer::new(Arc::new(store), SR);
            for e in &plan.events {
                player.add(e).unwrap();
            }
            let mut streamed = Vec::new();
            while (streamed.len() as u64) < offline.audio.len() as u64 {
                streamed.extend(player.next_block(block));
            }
            streamed.truncate(offline.audio.len());
            soft_clip(&mut streamed);
            prop_assert_eq!(&streamed[..], offline.audio.samples());
        }
    }
}

use std::sync::Arc;

use super::{AgentConfig, AgentError, PlanEvent};
use crate::corpus::Corpus;
use crate::sequence::{FactorOracle, OracleWalkConfig, OracleWalker};

/// Oracle navigator: walks a factor oracle built over the corpus symbol
/// sequence and plays the segment behind each visited state back to back.
#[derive(Debug, Clone)]
pub struct MacatAgent {
    corpus: Arc<Corpus>,
    oracle: Arc<FactorOracle>,
    /// `state_segments[k - 1]` is the segment for oracle state `k`.
    state_segments: Vec<u32>,
    walker: OracleWalker,
    gain_db: f64,
    crossfade_ms: f64,
    next_start_s: f64,
    last_state: usize,
    walker_continuity: f64,
}

impl MacatAgent {
    pub fn new(
        cfg: &AgentConfig,
        corpus: Arc<Corpus>,
        oracle: Arc<FactorOracle>,
        state_segments: Vec<u32>,
        start_s: f64,
    ) -> Result<Self, AgentError> {
        cfg.validate()?;
        if state_segments.len() != oracle.len() || oracle.is_empty() {
            return Err(AgentError::InvalidConfig(format!(
                "oracle has {} states past 0 but {} segments are mapped",
                oracle.len(),
                state_segments.len()
            )));
        }
        if let Some(&bad) = state_segments.iter().find(|&&s| s as usize >= corpus.len()) {
            return Err(AgentError::InvalidConfig(format!("segment {bad} is not in the corpus")));
        }
        let walker = OracleWalker::new(&OracleWalkConfig {
            continuity: cfg.continuity,
            rng_seed: cfg.rng_seed,
            max_jump_back: cfg.max_jump_back,
        })?;
        Ok(Self {
            corpus,
            oracle,
            state_segments,
            walker,
            gain_db: cfg.response_gain_db,
            crossfade_ms: cfg.crossfade_ms,
            next_start_s: start_s,
            last_state: 0,
            walker_continuity: cfg.continuity,
        })
    }

    pub fn continuity(&self) -> f64 {
        self.walker_continuity
    }

    pub fn set_continuity(&mut self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        self.walker.set_continuity(p).expect("clamped");
        self.walker_continuity = p;
        p
    }

    pub fn segment_for_state(&self, state: usize) -> u32 {
        self.state_segments[state - 1]
    }

    pub fn last_state(&self) -> usize {
        self.last_state
    }

    /// Skips ahead after a pause so playback restarts at `now_s`.
    pub fn resume(&mut self, now_s: f64) {
        self.next_start_s = self.next_start_s.max(now_s);
    }

    /// Emits every event whose start falls before `block_end_s`, each
    /// starting one crossfade before the previous one ends.
    pub fn step(&mut self, block_end_s: f64) -> Vec<(usize, PlanEvent)> {
        let mut out = Vec::new();
        while self.next_start_s < block_end_s {
            let state = self.walker.step(&self.oracle);
            self.last_state = state;
            let seg = self.segment_for_state(state);
            let dur = self.corpus.segments[seg as usize].duration_s;
            let e = PlanEvent::new(seg, self.next_start_s, self.gain_db, self.crossfade_ms, dur);
            self.next_start_s += dur - e.crossfade_ms / 1000.0;
            out.push((state, e));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::masom::tests::toy_corpus;
    use crate::agents::AgentKind;
    use crate::sequence::fo_build;

    fn agent(p: f64, seed: u64) -> MacatAgent {
        let c = Arc::new(toy_corpus(8));
        let symbols = [0, 1, 0, 0, 1, 1, 0, 1];
        let cfg = AgentConfig { continuity: p, rng_seed: seed, ..AgentConfig::new("c", AgentKind::Macat) };
        MacatAgent::new(&cfg, c, Arc::new(fo_build(&symbols)), (0..8).collect(), 0.0).unwrap()
    }

    fn run(a: &mut MacatAgent, secs: f64) -> Vec<(usize, PlanEvent)> {
        let mut out = Vec::new();
        let mut t = 0.0;
        while t < secs {
            t += 0.05;
            out.extend(a.step(t));
        }
        out
    }

    #[test]
    fn full_continuity_replays_corpus_order() {
        let ev = run(&mut agent(1.0, 0), 7.5);
        let segs: Vec<u32> = ev.iter().map(|(_, e)| e.segment).collect();
        assert_eq!(segs, (0..8).collect::<Vec<_>>());
        for w in ev.windows(2) {
            let gap = w[1].1.start_s - w[0].1.start_s;
            assert!((gap - (1.0 - 0.02)).abs() < 1e-9);
        }
    }

    #[test]
    fn seeded_stream_repeats_and_tracks_states() {
        let a = run(&mut agent(0.5, 9), 60.0);
        let b = run(&mut agent(0.5, 9), 60.0);
        assert_eq!(a, b);
        for (state, e) in &a {
            assert_eq!(e.segment as usize, state - 1);
        }
        assert!(a.windows(2).any(|w| w[1].0 != w[0].0 + 1));
    }

    #[test]
    fn mismatched_mapping_is_rejected() {
        let c = Arc::new(toy_corpus(3));
        let cfg = AgentConfig::new("c", AgentKind::Macat);
        assert!(MacatAgent::new(&cfg, c.clone(), Arc::new(fo_build(&[0, 1])), vec![0, 1, 2], 0.0).is_err());
        assert!(MacatAgent::new(&cfg, c, Arc::new(fo_build(&[0, 1])), vec![0, 9], 0.0).is_err());
    }
}

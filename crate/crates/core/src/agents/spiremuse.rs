use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AgentConfig, AgentError, PlanEvent};
use crate::corpus::Corpus;
use crate::listening::{FeatureVector55, InfluenceWeights, Match};

pub const DEFAULT_TOP_K: usize = 5;

/// Probability of each rank `1..=k`, proportional to `1/rank`.
pub fn rank_probabilities(k: usize) -> Vec<f64> {
    let h: f64 = (1..=k).map(|r| 1.0 / r as f64).sum();
    (1..=k).map(|r| 1.0 / r as f64 / h).collect()
}

/// Real-time responder: answers each completed input segment with one of
/// its nearest corpus segments under the current influence weights.
#[derive(Debug, Clone)]
pub struct SpireMuseAgent {
    corpus: Arc<Corpus>,
    weights: InfluenceWeights,
    rng: ChaCha8Rng,
    top_k: usize,
    gain_db: f64,
    crossfade_ms: f64,
}

impl SpireMuseAgent {
    pub fn new(cfg: &AgentConfig, corpus: Arc<Corpus>) -> Result<Self, AgentError> {
        cfg.validate()?;
        if corpus.is_empty() {
            return Err(AgentError::Listening(crate::listening::ListeningError::NoMatch));
        }
        Ok(Self {
            corpus,
            weights: cfg.influence,
            rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
            top_k: DEFAULT_TOP_K,
            gain_db: cfg.response_gain_db,
            crossfade_ms: cfg.crossfade_ms,
        })
    }

    pub fn with_top_k(mut self, k: usize) -> Self {
        self.top_k = k.max(1);
        self
    }

    pub fn weights(&self) -> InfluenceWeights {
        self.weights
    }

    pub fn set_weights(&mut self, w: InfluenceWeights) -> Result<(), AgentError> {
        w.validate()?;
        self.weights = w;
        Ok(())
    }

    /// The candidate list a response is drawn from.
    pub fn candidates(&self, query: &FeatureVector55) -> Result<Vec<Match>, AgentError> {
        Ok(self.corpus.match_query(query, &self.weights, self.top_k)?)
    }

    /// Picks a response scheduled at `at_s`. Returns the event and the rank
    /// (1-based) it was drawn from.
    pub fn respond(&mut self, query: &FeatureVector55, at_s: f64) -> Result<(PlanEvent, usize), AgentError> {
        let cands = self.candidates(query)?;
        let probs = rank_probabilities(cands.len());
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        let mut rank = cands.len();
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                rank = i + 1;
                break;
            }
        }
        let m = cands[rank - 1];
        let dur = self.corpus.segments[m.segment as usize].duration_s;
        Ok((PlanEvent::new(m.segment, at_s, self.gain_db, self.crossfade_ms, dur), rank))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::masom::tests::toy_corpus;
    use crate::agents::AgentKind;
    use crate::corpus::normalization_stats;
    use crate::listening::{match_features, F0_MEAN};
    use rand::Rng;

    fn random_corpus(seed: u64, n: usize) -> Corpus {
        let mut c = toy_corpus(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for f in &mut c.features {
            for v in f.0.iter_mut() {
                *v = rng.random_range(-3.0..3.0);
            }
        }
        c.norm = normalization_stats(&c.features);
        c
    }

    #[test]
    fn rank_weights() {
        let p = rank_probabilities(5);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((p[0] / p[1] - 2.0).abs() < 1e-12 && (p[0] / p[4] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn identical_query_at_rank_one() {
        let c = Arc::new(random_corpus(1, 20));
        let cfg = AgentConfig::new("s", AgentKind::SpireMuse);
        let q = c.features[7].clone();
        let mut a = SpireMuseAgent::new(&cfg, c.clone()).unwrap().with_top_k(1);
        for _ in 0..10 {
            assert_eq!(a.respond(&q, 0.0).unwrap().0.segment, 7);
        }
        let mut a = SpireMuseAgent::new(&cfg, c).unwrap();
        let mut seen = false;
        for _ in 0..50 {
            let (e, rank) = a.respond(&q, 0.0).unwrap();
            if rank == 1 {
                assert_eq!(e.segment, 7);
                seen = true;
            }
        }
        assert!(seen);
    }

    #[test]
    fn melodic_only_picks_nearest_pitch() {
        let mut c = toy_corpus(3);
        let pitches = [220.0, 330.0, 440.0];
        for (f, p) in c.features.iter_mut().zip(pitches) {
            *f = crate::listening::FeatureVector55([0.0; 55]);
            f.0[F0_MEAN] = p;
        }
        c.features[0].0[0] = 5.0;
        c.norm = normalization_stats(&c.features);
        let cfg = AgentConfig {
            influence: InfluenceWeights::new(0.0, 0.0, 1.0, 0.0).unwrap(),
            ..AgentConfig::new("s", AgentKind::SpireMuse)
        };
        let mut a = SpireMuseAgent::new(&cfg, Arc::new(c.clone())).unwrap().with_top_k(1);
        let mut q = c.features[1].clone();
        q.0[F0_MEAN] = 420.0;
        q.0[0] = 5.0;
        assert_eq!(a.respond(&q, 0.0).unwrap().0.segment, 2);
    }

    #[test]
    fn responses_within_brute_force_top_five() {
        for seed in 0..20 {
            let c = Arc::new(random_corpus(seed, 40));
            let cfg = AgentConfig { rng_seed: seed, ..AgentConfig::new("s", AgentKind::SpireMuse) };
            let mut a = SpireMuseAgent::new(&cfg, c.clone()).unwrap();
            let q = random_corpus(seed + 100, 1).features[0].clone();
            let mut all: Vec<(f64, u32)> = c
                .features
                .iter()
                .enumerate()
                .map(|(i, f)| (crate::listening::weighted_distance(&q, f, &cfg.influence, &c.norm), i as u32))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let top: Vec<u32> = all[..5].iter().map(|x| x.1).collect();
            let via_match: Vec<u32> = match_features(&q, &c.features, &c.norm, &cfg.influence, 5)
                .unwrap()
                .iter()
                .map(|m| m.segment)
                .collect();
            assert_eq!(top, via_match);
            for _ in 0..20 {
                assert!(top.contains(&a.respond(&q, 1.0).unwrap().0.segment));
            }
        }
    }
}

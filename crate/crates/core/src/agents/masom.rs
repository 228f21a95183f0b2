use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{AgentConfig, AgentError, PlanEvent, MAX_DENSITY_PER_MIN};
use crate::corpus::Corpus;
use crate::sequence::VmmModel;
use crate::som::Som;

const RESAMPLE_TRIES: usize = 10;

/// Segment ids grouped by SOM node.
pub fn cluster_members(labels: &[u32], num_nodes: usize) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new(); num_nodes];
    for (seg, &l) in labels.iter().enumerate() {
        out[l as usize].push(seg as u32);
    }
    out
}

/// Autonomous generator: Poisson-timed events whose SOM symbol comes from
/// the VMM over the last `max_order` emitted symbols.
#[derive(Debug, Clone)]
pub struct MasomAgent {
    corpus: Arc<Corpus>,
    vmm: Arc<VmmModel>,
    members: Vec<Vec<u32>>,
    /// For each node, the nearest node (by weight distance) with members.
    fallback: Vec<usize>,
    context: VecDeque<u32>,
    rng: ChaCha8Rng,
    density: f64,
    gain_db: f64,
    crossfade_ms: f64,
    next_event_s: f64,
}

impl MasomAgent {
    /// `labels[i]` is the SOM node of corpus segment `i`.
    pub fn new(
        cfg: &AgentConfig,
        corpus: Arc<Corpus>,
        som: &Som,
        vmm: Arc<VmmModel>,
        labels: &[u32],
        start_s: f64,
    ) -> Result<Self, AgentError> {
        cfg.validate()?;
        if labels.len() != corpus.len() || labels.is_empty() {
            return Err(AgentError::InvalidConfig(format!(
                "{} labels for {} segments",
                labels.len(),
                corpus.len()
            )));
        }
        let n = som.num_nodes();
        if labels.iter().any(|&l| l as usize >= n) || vmm.alphabet > n {
            return Err(AgentError::InvalidConfig("labels or VMM alphabet exceed the SOM grid".into()));
        }
        let members = cluster_members(labels, n);
        let fallback = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| !members[j].is_empty())
                    .min_by(|&a, &b| {
                        let d = |j: usize| -> f64 {
                            som.node(i).iter().zip(som.node(j)).map(|(x, y)| (x - y) * (x - y)).sum()
                        };
                        d(a).total_cmp(&d(b)).then(a.cmp(&b))
                    })
                    .expect("labels are non-empty")
            })
            .collect();
        let mut agent = Self {
            corpus,
            vmm,
            members,
            fallback,
            context: VecDeque::new(),
            rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
            density: cfg.density,
            gain_db: cfg.response_gain_db,
            crossfade_ms: cfg.crossfade_ms,
            next_event_s: f64::INFINITY,
        };
        agent.reschedule(start_s);
        Ok(agent)
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    /// Sets events per minute (clamped to the valid range) and restarts the
    /// Poisson clock at `now_s`. Returns the applied value.
    pub fn set_density(&mut self, per_min: f64, now_s: f64) -> f64 {
        self.density = per_min.clamp(0.0, MAX_DENSITY_PER_MIN);
        self.reschedule(now_s);
        self.density
    }

    /// Draws the next event time after `now_s`.
    pub fn reschedule(&mut self, now_s: f64) {
        self.next_event_s = if self.density > 0.0 {
            now_s + self.gap()
        } else {
            f64::INFINITY
        };
    }

    fn gap(&mut self) -> f64 {
        Exp::new(self.density / 60.0).expect("positive rate").sample(&mut self.rng)
    }

    pub fn next_event_s(&self) -> f64 {
        self.next_event_s
    }

    fn pick_symbol(&mut self) -> usize {
        let ctx: Vec<u32> = self.context.iter().copied().collect();
        let mut sym = self.vmm.sample(&ctx, &mut self.rng) as usize;
        for _ in 0..RESAMPLE_TRIES {
            if !self.members[sym].is_empty() {
                return sym;
            }
            sym = self.vmm.sample(&ctx, &mut self.rng) as usize;
        }
        if self.members[sym].is_empty() {
            sym = self.fallback[sym];
        }
        sym
    }

    /// Emits every event scheduled before `block_end_s`.
    pub fn step(&mut self, block_end_s: f64) -> Vec<PlanEvent> {
        let mut out = Vec::new();
        while self.next_event_s < block_end_s {
            let sym = self.pick_symbol();
            let m = &self.members[sym];
            let seg = m[self.rng.random_range(0..m.len())];
            self.context.push_back(sym as u32);
            while self.context.len() > self.vmm.max_order {
                self.context.pop_front();
            }
            let dur = self.corpus.segments[seg as usize].duration_s;
            out.push(PlanEvent::new(seg, self.next_event_s, self.gain_db, self.crossfade_ms, dur));
            self.next_event_s += self.gap();
        }
        out
    }

    pub fn symbol_of(&self, segment: u32) -> Option<usize> {
        self.members.iter().position(|m| m.contains(&segment))
    }
}

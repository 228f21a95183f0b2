use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SequenceError;

/// Factor oracle over a symbol sequence, built incrementally. State `k ≥ 1`
/// corresponds to the `k`-th symbol of the input.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorOracle {
    transitions: Vec<BTreeMap<u32, usize>>,
    suffix: Vec<Option<usize>>,
    reverse: Vec<Vec<usize>>,
    symbols: Vec<u32>,
}

pub fn fo_build(sequence: &[u32]) -> FactorOracle {
    let mut fo = FactorOracle {
        transitions: vec![BTreeMap::new()],
        suffix: vec![None],
        reverse: vec![Vec::new()],
        symbols: Vec::with_capacity(sequence.len()),
    };
    for &s in sequence {
        fo.push(s);
    }
    fo
}

impl FactorOracle {
    fn push(&mut self, sym: u32) {
        let m = self.transitions.len() - 1;
        let new = m + 1;
        self.transitions.push(BTreeMap::new());
        self.reverse.push(Vec::new());
        self.symbols.push(sym);
        self.transitions[m].insert(sym, new);
        let mut k = self.suffix[m];
        while let Some(state) = k {
            if self.transitions[state].contains_key(&sym) {
                break;
            }
            self.transitions[state].insert(sym, new);
            k = self.suffix[state];
        }
        let link = match k {
            None => 0,
            Some(state) => self.transitions[state][&sym],
        };
        self.suffix.push(Some(link));
        self.reverse[link].push(new);
    }

    /// Number of states, `n + 1` for an input of length `n`.
    pub fn num_states(&self) -> usize {
        self.transitions.len()
    }

    /// Length of the input sequence.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.iter().map(|t| t.len()).sum()
    }

    pub fn transition(&self, state: usize, sym: u32) -> Option<usize> {
        self.transitions.get(state)?.get(&sym).copied()
    }

    /// All transitions as `(from, symbol, to)`, ordered by source state.
    pub fn transitions(&self) -> Vec<(usize, u32, usize)> {
        self.transitions
            .iter()
            .enumerate()
            .flat_map(|(i, t)| t.iter().map(move |(&s, &j)| (i, s, j)))
            .collect()
    }

    pub fn suffix_link(&self, state: usize) -> Option<usize> {
        self.suffix.get(state).copied().flatten()
    }

    /// States whose suffix link points at `state`.
    pub fn reverse_links(&self, state: usize) -> &[usize] {
        &self.reverse[state]
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    /// Whether reading `word` from state 0 stays inside the automaton.
    pub fn accepts(&self, word: &[u32]) -> bool {
        let mut state = 0;
        for &s in word {
            match self.transition(state, s) {
                Some(next) => state = next,
                None => return false,
            }
        }
        true
    }

    /// Text adjacency: `oracle 1`, `states N`, then per state
    /// `<i> <suffix|-> [sym>to ...]`.
    pub fn to_text(&self) -> String {
        let mut out = format!("oracle 1\nstates {}\n", self.num_states());
        for i in 0..self.num_states() {
            let link = self.suffix[i].map_or("-".to_string(), |s| s.to_string());
            let sym = if i == 0 { "-".to_string() } else { self.symbols[i - 1].to_string() };
            let _ = write!(out, "{i} {sym} {link}");
            for (s, j) in &self.transitions[i] {
                let _ = write!(out, " {s}>{j}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SequenceError> {
        let perr = |line: usize, message: &str| SequenceError::Parse {
            line: line + 1,
            message: message.to_string(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, "oracle 1")) => {}
            _ => return Err(perr(0, "expected `oracle 1`")),
        }
        let n: usize = lines
            .next()
            .and_then(|(_, l)| l.strip_prefix("states ")?.trim().parse().ok())
            .ok_or_else(|| perr(1, "expected `states <n>`"))?;
        let mut fo = FactorOracle {
            transitions: vec![BTreeMap::new(); n],
            suffix: vec![None; n],
            reverse: vec![Vec::new(); n],
            symbols: Vec::with_capacity(n.saturating_sub(1)),
        };
        for expect in 0..n {
            let (li, line) = lines.next().ok_or_else(|| perr(expect + 2, "missing state line"))?;
            let mut parts = line.split_whitespace();
            let idx: usize = parts.next().and_then(|p| p.parse().ok()).ok_or_else(|| perr(li, "bad state"))?;
            if idx != expect {
                return Err(perr(li, "states out of order"));
            }
            let sym = parts.next().ok_or_else(|| perr(li, "missing symbol"))?;
            if idx > 0 {
                fo.symbols.push(sym.parse().map_err(|_| perr(li, "bad symbol"))?);
            }
            let link = parts.next().ok_or_else(|| perr(li, "missing suffix link"))?;
            if link != "-" {
                let l: usize = link.parse().map_err(|_| perr(li, "bad suffix link"))?;
                if l >= idx {
                    return Err(perr(li, "suffix link must point backwards"));
                }
                fo.suffix[idx] = Some(l);
                fo.reverse[l].push(idx);
            } else if idx > 0 {
                return Err(perr(li, "missing suffix link"));
            }
            for t in parts {
                let (s, j) = t.split_once('>').ok_or_else(|| perr(li, "bad transition"))?;
                let s: u32 = s.parse().map_err(|_| perr(li, "bad transition symbol"))?;
                let j: usize = j.parse().map_err(|_| perr(li, "bad transition target"))?;
                if j >= n || j <= idx {
                    return Err(perr(li, "transition target out of range"));
                }
                fo.transitions[idx].insert(s, j);
            }
        }
        Ok(fo)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleWalkConfig {
    /// Probability of the linear forward move.
    pub continuity: f64,
    pub rng_seed: u64,
    /// Largest allowed distance in states for a suffix-link jump.
    pub max_jump_back: usize,
}

impl Default for OracleWalkConfig {
    fn default() -> Self {
        Self {
            continuity: 0.8,
            rng_seed: 0,
            max_jump_back: 64,
        }
    }
}

impl OracleWalkConfig {
    pub fn validate(&self) -> Result<(), SequenceError> {
        if !(0.0..=1.0).contains(&self.continuity) {
            return Err(SequenceError::InvalidContinuity(self.continuity));
        }
        Ok(())
    }
}

/// Stateful random walk over an oracle. With probability `continuity` it
/// moves `i → i+1` (wrapping to a random earlier state at the end);
/// otherwise it jumps to a uniformly chosen member of the suffix-link family
/// of `i` (its suffix link and reverse links, state 0 excluded) within
/// `max_jump_back`. With no such member it moves forward instead.
#[derive(Debug, Clone)]
pub struct OracleWalker {
    state: usize,
    continuity: f64,
    max_jump_back: usize,
    rng: ChaCha8Rng,
}

impl OracleWalker {
    pub fn new(cfg: &OracleWalkConfig) -> Result<Self, SequenceError> {
        cfg.validate()?;
        Ok(Self {
            state: 0,
            continuity: cfg.continuity,
            max_jump_back: cfg.max_jump_back,
            rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
        })
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn set_continuity(&mut self, p: f64) -> Result<(), SequenceError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(SequenceError::InvalidContinuity(p));
        }
        self.continuity = p;
        Ok(())
    }

    /// Suffix-link family of `state` within the jump window.
    pub fn jump_candidates(&self, fo: &FactorOracle, state: usize) -> Vec<usize> {
        let mut c: Vec<usize> = fo
            .suffix_link(state)
            .into_iter()
            .chain(fo.reverse_links(state).iter().copied())
            .filter(|&j| j >= 1 && j != state && j.abs_diff(state) <= self.max_jump_back)
            .collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    fn forward(&mut self, fo: &FactorOracle) -> usize {
        let n = fo.len();
        if self.state < n {
            self.state + 1
        } else if n >= 2 {
            self.rng.random_range(1..n)
        } else {
            1
        }
    }

    /// Advances one move and returns the new state (always ≥ 1).
    pub fn step(&mut self, fo: &FactorOracle) -> usize {
        if fo.is_empty() {
            return 0;
        }
        let u: f64 = self.rng.random();
        let next = if u < self.continuity {
            self.forward(fo)
        } else {
            let cands = self.jump_candidates(fo, self.state);
            if cands.is_empty() {
                self.forward(fo)
            } else {
                cands[self.rng.random_range(0..cands.len())]
            }
        };
        self.state = next;
        next
    }
}

/// `steps` walk moves starting from state 0.
pub fn fo_walk(oracle: &FactorOracle, cfg: &OracleWalkConfig, steps: usize) -> Result<Vec<usize>, SequenceError> {
    let mut w = OracleWalker::new(cfg)?;
    Ok((0..steps).map(|_| w.step(oracle)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn factors(s: &[u32]) -> BTreeSet<Vec<u32>> {
        let mut out = BTreeSet::new();
        for i in 0..=s.len() {
            for j in i..=s.len() {
                out.insert(s[i..j].to_vec());
            }
        }
        out
    }

    #[test]
    fn hand_built_aab() {
        let fo = fo_build(&[0, 0, 1]);
        assert_eq!(fo.num_states(), 4);
        assert_eq!(
            fo.transitions(),
            vec![(0, 0, 1), (0, 1, 3), (1, 0, 2), (1, 1, 3), (2, 1, 3)]
        );
        assert_eq!(
            (fo.suffix_link(0), fo.suffix_link(1), fo.suffix_link(2), fo.suffix_link(3)),
            (None, Some(0), Some(1), Some(0))
        );
        assert!(fo.accepts(&[0, 1]));
    }

    #[test]
    fn single_symbol() {
        let fo = fo_build(&[7]);
        assert_eq!((fo.num_states(), fo.num_transitions()), (2, 1));
        assert_eq!(fo.suffix_link(1), Some(0));
    }

    #[test]
    fn accepts_some_non_factors() {
        let s = [0, 1, 1, 1, 0, 0, 1];
        let fo = fo_build(&s);
        assert!(!factors(&s).contains(&vec![0, 1, 0]));
        assert!(fo.accepts(&[0, 1, 0]));
    }

    #[test]
    fn all_short_strings_accept_their_factors() {
        for alpha in 1..=3u32 {
            for len in 1..=8usize {
                let total = (alpha as usize).pow(len as u32);
                for code in 0..total {
                    let mut c = code;
                    let s: Vec<u32> = (0..len)
                        .map(|_| {
                            let v = (c % alpha as usize) as u32;
                            c /= alpha as usize;
                            v
                        })
                        .collect();
                    let fo = fo_build(&s);
                    for f in factors(&s) {
                        assert!(fo.accepts(&f), "{s:?} rejects factor {f:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn pure_continuation() {
        let fo = fo_build(&[0, 1, 2]);
        let cfg = OracleWalkConfig { continuity: 1.0, ..Default::default() };
        assert_eq!(fo_walk(&fo, &cfg, 3).unwrap(), vec![1, 2, 3]);
        let wrapped = fo_walk(&fo, &cfg, 10).unwrap();
        assert!(wrapped.iter().all(|&s| (1..=3).contains(&s)));
        assert!(wrapped[3] < 3);
    }

    #[test]
    fn zero_continuity_always_jumps_in_family() {
        let fo = fo_build(&[0, 1, 0, 1, 1, 0, 1, 0, 0, 1]);
        let cfg = OracleWalkConfig { continuity: 0.0, rng_seed: 3, max_jump_back: 100 };
        let mut w = OracleWalker::new(&cfg).unwrap();
        for _ in 0..200 {
            let from = w.state();
            let cands = w.jump_candidates(&fo, from);
            let to = w.step(&fo);
            if cands.is_empty() {
                assert!(to == from + 1 || from == fo.len());
            } else {
                assert!(cands.contains(&to), "{from} -> {to} not in {cands:?}");
            }
        }
    }

    #[test]
    fn walks_repeat_under_seed() {
        let fo = fo_build(&[0, 1, 2, 0, 1, 0, 2, 2, 1]);
        let cfg = OracleWalkConfig { continuity: 0.5, rng_seed: 11, max_jump_back: 4 };
        assert_eq!(fo_walk(&fo, &cfg, 100).unwrap(), fo_walk(&fo, &cfg, 100).unwrap());
        let bad = OracleWalkConfig { continuity: 1.5, ..cfg };
        assert!(matches!(fo_walk(&fo, &bad, 1), Err(SequenceError::InvalidContinuity(_))));
    }

    #[test]
    fn text_round_trip() {
        let fo = fo_build(&[2, 0, 1, 2, 0, 0, 1]);
        assert_eq!(FactorOracle::from_text(&fo.to_text()).unwrap(), fo);
        assert!(FactorOracle::from_text("oracle 1\nstates 2\n0 - -\n1 3 1\n").is_err());
    }

    proptest! {
        #[test]
        fn size_bounds(s in prop::collection::vec(0u32..4, 1..2000)) {
            let fo = fo_build(&s);
            let n = s.len();
            prop_assert_eq!(fo.num_states(), n + 1);
            prop_assert!(fo.num_transitions() >= n && fo.num_transitions() <= 2 * n - 1);
            for i in 1..=n {
                prop_assert!(fo.suffix_link(i).unwrap() < i);
            }
        }

        #[test]
        fn random_factors_accepted(s in prop::collection::vec(0u32..3, 1..=12)) {
            let fo = fo_build(&s);
            for f in factors(&s) {
                prop_assert!(fo.accepts(&f));
            }
        }
    }
}

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;

use super::SequenceError;

pub const DEFAULT_MAX_ORDER: usize = 3;

/// Variable-order Markov model: successor counts for every context of
/// length `0..=max_order` seen in training.
#[derive(Debug, Clone, PartialEq)]
pub struct VmmModel {
    pub max_order: usize,
    pub alphabet: usize,
    counts: BTreeMap<Vec<u32>, BTreeMap<u32, u64>>,
}

pub fn vmm_build(sequences: &[Vec<u32>], max_order: usize) -> Result<VmmModel, SequenceError> {
    let alphabet = sequences
        .iter()
        .flatten()
        .max()
        .map(|&m| m as usize + 1)
        .unwrap_or(0);
    vmm_build_with_alphabet(sequences, max_order, alphabet)
}

pub fn vmm_build_with_alphabet(
    sequences: &[Vec<u32>],
    max_order: usize,
    alphabet: usize,
) -> Result<VmmModel, SequenceError> {
    if max_order == 0 {
        return Err(SequenceError::InvalidOrder);
    }
    if sequences.iter().all(|s| s.is_empty()) {
        return Err(SequenceError::EmptyTrainingSet);
    }
    let mut counts: BTreeMap<Vec<u32>, BTreeMap<u32, u64>> = BTreeMap::new();
    for seq in sequences {
        for (i, &next) in seq.iter().enumerate() {
            if next as usize >= alphabet {
                return Err(SequenceError::SymbolOutOfRange { symbol: next, alphabet });
            }
            for k in 0..=max_order.min(i) {
                *counts
                    .entry(seq[i - k..i].to_vec())
                    .or_default()
                    .entry(next)
                    .or_default() += 1;
            }
        }
    }
    Ok(VmmModel {
        max_order,
        alphabet,
        counts,
    })
}

impl VmmModel {
    pub fn count(&self, context: &[u32], next: u32) -> u64 {
        self.counts
            .get(context)
            .and_then(|m| m.get(&next))
            .copied()
            .unwrap_or(0)
    }

    pub fn context_total(&self, context: &[u32]) -> u64 {
        self.counts.get(context).map(|m| m.values().sum()).unwrap_or(0)
    }

    pub fn contexts(&self) -> impl Iterator<Item = (&Vec<u32>, &BTreeMap<u32, u64>)> {
        self.counts.iter()
    }

    /// Order-0 distribution with add-one smoothing.
    fn base(&self) -> Vec<f64> {
        let total = self.context_total(&[]) as f64 + self.alphabet as f64;
        (0..self.alphabet as u32)
            .map(|s| (self.count(&[], s) as f64 + 1.0) / total)
            .collect()
    }

    /// Next-symbol distribution. Starts from the longest stored suffix of
    /// `context` and blends toward shorter contexts with PPM-C escape weight
    /// `distinct / (total + distinct)` whenever some symbols are unseen.
    pub fn predict(&self, context: &[u32]) -> Vec<f64> {
        let start = context.len().saturating_sub(self.max_order);
        let ctx = &context[start..];
        let longest = (1..=ctx.len())
            .rev()
            .find(|&k| self.counts.contains_key(&ctx[ctx.len() - k..]))
            .unwrap_or(0);
        let mut p = self.base();
        for k in 1..=longest {
            let succ = &self.counts[&ctx[ctx.len() - k..]];
            let total = succ.values().sum::<u64>() as f64;
            let distinct = succ.len() as f64;
            if succ.len() == self.alphabet {
                p = (0..self.alphabet as u32)
                    .map(|s| succ.get(&s).copied().unwrap_or(0) as f64 / total)
                    .collect();
            } else {
                let esc = distinct / (total + distinct);
                for (s, v) in p.iter_mut().enumerate() {
                    let c = succ.get(&(s as u32)).copied().unwrap_or(0) as f64;
                    *v = c / (total + distinct) + esc * *v;
                }
            }
        }
        p
    }

    /// Inverse-CDF draw from `predict`.
    pub fn sample<R: Rng + ?Sized>(&self, context: &[u32], rng: &mut R) -> u32 {
        let p = self.predict(context);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (s, &v) in p.iter().enumerate() {
            acc += v;
            if u < acc {
                return s as u32;
            }
        }
        p.iter().rposition(|&v| v > 0.0).unwrap_or(0) as u32
    }

    /// Line format: header lines, then one `ctx <symbols|-> : sym=count ...`
    /// line per context.
    pub fn to_text(&self) -> String {
        let mut out = format!("vmm 1\nmax_order {}\nalphabet {}\n", self.max_order, self.alphabet);
        for (ctx, succ) in &self.counts {
            let c = if ctx.is_empty() {
                "-".to_string()
            } else {
                ctx.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
            };
            let _ = write!(out, "ctx {c} :");
            for (s, n) in succ {
                let _ = write!(out, " {s}={n}");
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
        let mut lines = text.lines().enumerate();
        let mut header = |key: &str| -> Result<usize, SequenceError> {
            let (i, l) = lines.next().ok_or_else(|| perr(0, "truncated header"))?;
            l.strip_prefix(key)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| perr(i, &format!("expected `{key} <n>`")))
        };
        if header("vmm")? != 1 {
            return Err(perr(0, "unsupported vmm format version"));
        }
        let max_order = header("max_order")?;
        let alphabet = header("alphabet")?;
        let mut counts = BTreeMap::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let body = line.strip_prefix("ctx ").ok_or_else(|| perr(i, "expected `ctx`"))?;
            let (ctx, succ) = body.split_once(':').ok_or_else(|| perr(i, "missing `:`"))?;
            let ctx: Vec<u32> = match ctx.trim() {
                "-" => Vec::new(),
                c => c
                    .split_whitespace()
                    .map(|s| s.parse().map_err(|_| perr(i, "bad context symbol")))
                    .collect::<Result<_, _>>()?,
            };
            let mut m = BTreeMap::new();
            for pair in succ.split_whitespace() {
                let (s, n) = pair.split_once('=').ok_or_else(|| perr(i, "bad count"))?;
                let s: u32 = s.parse().map_err(|_| perr(i, "bad symbol"))?;
                let n: u64 = n.parse().map_err(|_| perr(i, "bad count"))?;
                if s as usize >= alphabet {
                    return Err(perr(i, "symbol outside alphabet"));
                }
                m.insert(s, n);
            }
            counts.insert(ctx, m);
        }
        Ok(Self {
            max_order,
            alphabet,
            counts,
        })
    }
}

pub fn vmm_predict(model: &VmmModel, context: &[u32]) -> Vec<f64> {
    model.predict(context)
}

pub fn vmm_sample<R: Rng + ?Sized>(model: &VmmModel, context: &[u32], rng: &mut R) -> u32 {
    model.sample(context, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn brute_count(seqs: &[Vec<u32>], ctx: &[u32], next: u32) -> u64 {
        let k = ctx.len();
        seqs.iter()
            .flat_map(|s| s.windows(k + 1))
            .filter(|w| &w[..k] == ctx && w[k] == next)
            .count() as u64
    }

    #[test]
    fn alternating_bigrams() {
        let m = vmm_build(&[vec![0, 1, 0, 1, 0]], 1).unwrap();
        assert_eq!(m.count(&[0], 1), 2);
        assert_eq!(m.count(&[1], 0), 2);
        assert_eq!(m.count(&[0], 0), 0);
    }

    #[test]
    fn escape_arithmetic_by_hand() {
        // After `a`: b seen twice, a unseen, so escape 1/3 to the smoothed
        // unigram (a: 4/7, b: 3/7). P(b|a) = 2/3 + 1/7, P(a|a) = 4/21.
        let m = vmm_build(&[vec![0, 1, 0, 1, 0]], 1).unwrap();
        let p = m.predict(&[0]);
        assert_eq!(p[1], 2.0 / 3.0 + (1.0 / 3.0) * (3.0 / 7.0));
        assert_eq!(p[0], (1.0 / 3.0) * (4.0 / 7.0));
        assert!((p[1] - 17.0 / 21.0).abs() < 1e-15);
        assert!(p[1] > p[0]);
    }

    #[test]
    fn single_symbol_alphabet() {
        let m = vmm_build(&[vec![0, 0, 0, 0]], 2).unwrap();
        assert_eq!(m.predict(&[0, 0]), vec![1.0]);
        assert_eq!(m.predict(&[]), vec![1.0]);
    }

    #[test]
    fn uniform_counts_give_uniform_base() {
        let m = vmm_build(&[vec![0, 1, 2, 3]], 1).unwrap();
        let p = m.predict(&[]);
        for v in &p {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn no_contexts_across_sequences() {
        let m = vmm_build(&[vec![0, 0], vec![1, 1]], 2).unwrap();
        assert_eq!(m.count(&[0], 1), 0);
        assert!(m.contexts().all(|(c, _)| !(c.contains(&0) && c.contains(&1))));
    }

    #[test]
    fn empty_and_bad_input() {
        assert_eq!(vmm_build(&[], 1), Err(SequenceError::EmptyTrainingSet));
        assert_eq!(vmm_build(&[vec![]], 1), Err(SequenceError::EmptyTrainingSet));
        assert_eq!(vmm_build(&[vec![1]], 0), Err(SequenceError::InvalidOrder));
        assert!(matches!(
            vmm_build_with_alphabet(&[vec![5]], 1, 3),
            Err(SequenceError::SymbolOutOfRange { symbol: 5, .. })
        ));
    }

    #[test]
    fn deterministic_successor_is_always_drawn() {
        let m = vmm_build_with_alphabet(&[vec![0, 1, 0, 1, 0, 1]], 2, 2).unwrap();
        let full = vmm_build_with_alphabet(&[vec![0, 0]], 1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(full.sample(&[0], &mut rng), 0);
        }
        let a: Vec<u32> = (0..50).map(|_| m.sample(&[0], &mut ChaCha8Rng::seed_from_u64(9))).collect();
        let b: Vec<u32> = (0..50).map(|_| m.sample(&[0], &mut ChaCha8Rng::seed_from_u64(9))).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_frequencies_track_prediction() {
        let m = vmm_build(&[vec![0, 1, 2, 0, 1, 1, 2, 0, 2, 2, 1, 0]], 2).unwrap();
        let ctx = [1, 2];
        let p = m.predict(&ctx);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mut hist = vec![0usize; p.len()];
        for _ in 0..n {
            hist[m.sample(&ctx, &mut rng) as usize] += 1;
        }
        for (h, q) in hist.iter().zip(&p) {
            assert!((*h as f64 / n as f64 - q).abs() < 0.02);
        }
    }

    #[test]
    fn text_round_trip() {
        let m = vmm_build(&[vec![0, 1, 2, 0, 1], vec![2, 2, 1]], 3).unwrap();
        assert_eq!(VmmModel::from_text(&m.to_text()).unwrap(), m);
        assert!(VmmModel::from_text("vmm 2\nmax_order 1\nalphabet 1\n").is_err());
    }

    proptest! {
        #[test]
        fn counts_equal_brute_force(
            seqs in prop::collection::vec(prop::collection::vec(0u32..4, 1..30), 1..4),
            d in 1usize..4,
        ) {
            let m = vmm_build(&seqs, d).unwrap();
            for (ctx, succ) in m.contexts() {
                prop_assert!(ctx.len() <= d);
                let total: u64 = succ.values().sum();
                prop_assert_eq!(total, m.context_total(ctx));
                for (&s, &c) in succ {
                    prop_assert_eq!(c, brute_count(&seqs, ctx, s));
                }
            }
            for s in seqs.iter().flatten() {
                prop_assert_eq!(m.count(&[], *s), brute_count(&seqs, &[], *s));
            }
        }

        #[test]
        fn predictions_normalize(
            seqs in prop::collection::vec(prop::collection::vec(0u32..5, 1..30), 1..4),
            ctx in prop::collection::vec(0u32..5, 0..6),
            d in 1usize..4,
        ) {
            let m = vmm_build_with_alphabet(&seqs, d, 5).unwrap();
            let p = m.predict(&ctx);
            prop_assert_eq!(p.len(), 5);
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

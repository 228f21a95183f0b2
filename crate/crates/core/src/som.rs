//! Kohonen self-organizing map over z-scored feature vectors.
//!
//! Online training with linear decay: at step `t` of `T = epochs · rows`,
//! the learning rate is `α0·(1 − t/T)` and the neighbourhood radius is
//! `σ0·(1 − t/T) + 0.5`. The neighbourhood is a Gaussian over Euclidean grid
//! distance, truncated at the radius, so the final phase is purely
//! competitive. Rows are visited in a seeded shuffle each epoch.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Corpus;

pub const SOM_HEADER_FILE: &str = "som.json";
pub const SOM_WEIGHTS_FILE: &str = "som.f64";

#[derive(Debug, Error)]
pub enum SomError {
    #[error("SOM training needs at least one feature row")]
    EmptyInput,
    #[error("row {row} has {got} dims, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, got: usize },
    #[error("invalid SOM config: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomTrainConfig {
    pub epochs: u32,
    pub learning_rate: f64,
    /// Initial neighbourhood radius σ0 in grid units.
    pub neighborhood: f64,
    pub seed: u64,
}

impl SomTrainConfig {
    /// Defaults for a `width × height` grid: 50 epochs, α0 = 0.5,
    /// σ0 = half the longer side (at least 1).
    pub fn for_grid(width: usize, height: usize, seed: u64) -> Self {
        Self {
            epochs: 50,
            learning_rate: 0.5,
            neighborhood: (width.max(height) as f64 / 2.0).max(1.0),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SomError> {
        if self.epochs == 0 {
            return Err(SomError::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(SomError::InvalidConfig(format!(
                "learning rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        if !(self.neighborhood > 0.0 && self.neighborhood.is_finite()) {
            return Err(SomError::InvalidConfig("neighbourhood must be positive".into()));
        }
        Ok(())
    }
}

/// Side length heuristic `ceil(sqrt(5·sqrt(n)))`, square grid.
pub fn default_grid(num_rows: usize) -> (usize, usize) {
    let side = (5.0 * (num_rows.max(1) as f64).sqrt()).sqrt().ceil() as usize;
    (side.max(1), side.max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Som {
    pub width: usize,
    pub height: usize,
    pub dim: usize,
    /// Row-major `(width·height) × dim`; node `i` sits at `(i % width, i / width)`.
    pub weights: Vec<f64>,
    /// SHA-256 of the training rows.
    pub trained_on: String,
    pub config: SomTrainConfig,
}

fn check_rows(rows: &[Vec<f64>]) -> Result<usize, SomError> {
    let dim = rows.first().ok_or(SomError::EmptyInput)?.len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(SomError::DimensionMismatch {
                row: i,
                expected: dim,
                got: r.len(),
            });
        }
    }
    Ok(dim)
}

fn rows_hash(rows: &[Vec<f64>]) -> String {
    let mut h = Sha256::new();
    for r in rows {
        for v in r {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl Som {
    fn init_with_rng(
        rows: &[Vec<f64>],
        grid: (usize, usize),
        cfg: &SomTrainConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, SomError> {
        let dim = check_rows(rows)?;
        let (width, height) = grid;
        if width == 0 || height == 0 {
            return Err(SomError::InvalidConfig("grid must be at least 1x1".into()));
        }
        let nodes = width * height;
        let picks: Vec<usize> = if rows.len() >= nodes {
            rand::seq::index::sample(rng, rows.len(), nodes).into_vec()
        } else {
            (0..nodes).map(|_| rng.random_range(0..rows.len())).collect()
        };
        let weights = picks.iter().flat_map(|&i| rows[i].iter().copied()).collect();
        Ok(Self {
            width,
            height,
            dim,
            weights,
            trained_on: rows_hash(rows),
            config: cfg.clone(),
        })
    }

    /// The untrained map `train_som` starts from for the same seed.
    pub fn initialize(rows: &[Vec<f64>], grid: (usize, usize), cfg: &SomTrainConfig) -> Result<Self, SomError> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Self::init_with_rng(rows, grid, cfg, &mut rng)
    }

    pub fn num_nodes(&self) -> usize {
        self.width * self.height
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.weights[i * self.dim..(i + 1) * self.dim]
    }

    pub fn grid_pos(&self, i: usize) -> (usize, usize) {
        (i % self.width, i / self.width)
    }

    /// Nearest node by Euclidean distance; ties go to the lowest index.
    pub fn bmu(&self, v: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for i in 0..self.num_nodes() {
            let d = sq_dist(self.node(i), v);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn quantization_error(&self, rows: &[Vec<f64>]) -> f64 {
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter()
            .map(|r| sq_dist(self.node(self.bmu(r)), r).sqrt())
            .sum::<f64>()
            / rows.len() as f64
    }

    pub fn save(&self, dir: &Path) -> Result<(), SomError> {
        let bytes: Vec<u8> = self.weights.iter().flat_map(|w| w.to_le_bytes()).collect();
        let header = SomHeader {
            width: self.width,
            height: self.height,
            dim: self.dim,
            trained_on: self.trained_on.clone(),
            config: self.config.clone(),
            weights_file: SOM_WEIGHTS_FILE.into(),
            weights_sha256: hex::encode(Sha256::digest(&bytes)),
        };
        let io = |e: std::io::Error| SomError::Io(e.to_string());
        fs::write(dir.join(SOM_WEIGHTS_FILE), &bytes).map_err(io)?;
        let text = serde_json::to_string_pretty(&header).expect("header serializes") + "\n";
        fs::write(dir.join(SOM_HEADER_FILE), text).map_err(io)
    }

    pub fn load(dir: &Path) -> Result<Self, SomError> {
        let io = |e: std::io::Error| SomError::Io(e.to_string());
        let text = fs::read_to_string(dir.join(SOM_HEADER_FILE)).map_err(io)?;
        let header: SomHeader =
            serde_json::from_str(&text).map_err(|e| SomError::Io(e.to_string()))?;
        let bytes = fs::read(dir.join(&header.weights_file)).map_err(io)?;
        if hex::encode(Sha256::digest(&bytes)) != header.weights_sha256 {
            return Err(SomError::Io(format!("checksum mismatch in {}", header.weights_file)));
        }
        if bytes.len() != header.width * header.height * header.dim * 8 {
            return Err(SomError::Io("SOM weights file has the wrong size".into()));
        }
        let weights = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Ok(Self {
            width: header.width,
            height: header.height,
            dim: header.dim,
            weights,
            trained_on: header.trained_on,
            config: header.config,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SomHeader {
    width: usize,
    height: usize,
    dim: usize,
    trained_on: String,
    config: SomTrainConfig,
    weights_file: String,
    weights_sha256: String,
}

pub fn train_som(rows: &[Vec<f64>], grid: (usize, usize), cfg: &SomTrainConfig) -> Result<Som, SomError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut som = Som::init_with_rng(rows, grid, cfg, &mut rng)?;
    let total = cfg.epochs as f64 * rows.len() as f64;
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut t = 0usize;
    let positions: Vec<(f64, f64)> = (0..som.num_nodes())
        .map(|i| {
            let (x, y) = som.grid_pos(i);
            (x as f64, y as f64)
        })
        .collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &r in &order {
            let frac = t as f64 / total;
            let alpha = cfg.learning_rate * (1.0 - frac);
            let sigma = cfg.neighborhood * (1.0 - frac) + 0.5;
            let x = &rows[r];
            let winner = som.bmu(x);
            let (wx, wy) = positions[winner];
            for (j, &(px, py)) in positions.iter().enumerate() {
                let d2 = (px - wx).powi(2) + (py - wy).powi(2);
                if d2 > sigma * sigma {
                    continue;
                }
                let h = alpha * (-d2 / (2.0 * sigma * sigma)).exp();
                let node = &mut som.weights[j * som.dim..(j + 1) * som.dim];
                for (w, xv) in node.iter_mut().zip(x) {
                    *w += h * (xv - *w);
                }
            }
            t += 1;
        }
    }
    Ok(som)
}

/// Per-source, time-ordered BMU labels of the corpus segments.
pub fn label_sequence(corpus: &Corpus, som: &Som) -> Vec<Vec<u32>> {
    corpus
        .segments_by_source()
        .iter()
        .map(|ids| {
            ids.iter()
                .map(|&id| som.bmu(&corpus.norm.zscore(&corpus.features[id as usize])) as u32)
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_rows(seed: u64, n: usize, dim: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect()
    }

    /// Brute-force two-means (Lloyd iterations from the two most distant
    /// points) as the clustering oracle.
    fn two_means(rows: &[Vec<f64>]) -> [Vec<f64>; 2] {
        let mut a = rows[0].clone();
        let mut b = rows
            .iter()
            .max_by(|x, y| sq_dist(x, &a).partial_cmp(&sq_dist(y, &a)).unwrap())
            .unwrap()
            .clone();
        for _ in 0..20 {
            let (mut sa, mut sb) = (vec![0.0; a.len()], vec![0.0; a.len()]);
            let (mut na, mut nb) = (0.0, 0.0);
            for r in rows {
                let (s, n) = if sq_dist(r, &a) <= sq_dist(r, &b) { (&mut sa, &mut na) } else { (&mut sb, &mut nb) };
                s.iter_mut().zip(r).for_each(|(s, v)| *s += v);
                *n += 1.0;
            }
            a = sa.iter().map(|v| v / na).collect();
            b = sb.iter().map(|v| v / nb).collect();
        }
        [a, b]
    }

    fn clusters(seed: u64, dim: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..100)
            .map(|i| {
                let c = if i % 2 == 0 { 1.0 } else { -1.0 };
                (0..dim).map(|_| c + rng.random_range(-0.01..0.01)).collect()
            })
            .collect()
    }

    #[test]
    fn two_clusters_match_two_means() {
        for seed in 0..5 {
            let rows = clusters(seed, 55);
            let oracle = two_means(&rows);
            let cfg = SomTrainConfig::for_grid(2, 1, seed);
            let som = train_som(&rows, (2, 1), &cfg).unwrap();
            let (n0, n1) = (som.node(0), som.node(1));
            let near = |n: &[f64]| oracle.iter().map(|c| sq_dist(n, c).sqrt()).fold(f64::INFINITY, f64::min);
            assert!(near(n0) < 0.1 && near(n1) < 0.1, "seed {seed}: {} {}", near(n0), near(n1));
            assert!(sq_dist(n0, n1).sqrt() > 1.0, "nodes collapsed");
        }
    }

    #[test]
    fn repeated_vector_is_a_fixed_point() {
        let rows = vec![vec![0.3, -1.2, 4.0]; 20];
        let som = train_som(&rows, (3, 3), &SomTrainConfig::for_grid(3, 3, 1)).unwrap();
        for i in 0..som.num_nodes() {
            assert!(sq_dist(som.node(i), &rows[0]).sqrt() < 1e-3);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let rows = random_rows(3, 60, 55);
        let cfg = SomTrainConfig::for_grid(4, 3, 77);
        let a = train_som(&rows, (4, 3), &cfg).unwrap();
        let b = train_som(&rows, (4, 3), &cfg).unwrap();
        assert_eq!(a.weights, b.weights);
        let c = train_som(&rows, (4, 3), &SomTrainConfig { seed: 78, ..cfg }).unwrap();
        assert_ne!(a.weights, c.weights);
    }

    #[test]
    fn bmu_cases() {
        let rows = random_rows(4, 30, 5);
        let som = train_som(&rows, (3, 2), &SomTrainConfig::for_grid(3, 2, 2)).unwrap();
        assert_eq!(som.bmu(som.node(3)), 3);
        for r in &rows {
            let brute = (0..som.num_nodes())
                .min_by(|&a, &b| sq_dist(som.node(a), r).partial_cmp(&sq_dist(som.node(b), r)).unwrap())
                .unwrap();
            assert_eq!(som.bmu(r), brute);
        }
        let flat = Som { weights: vec![1.0; 6 * 5], ..som };
        assert_eq!(flat.bmu(&[0.0; 5]), 0);
    }

    #[test]
    fn quantization_error_cases() {
        let rows = random_rows(5, 40, 6);
        let cfg = SomTrainConfig::for_grid(2, 2, 9);
        let som = train_som(&rows, (2, 2), &cfg).unwrap();
        let nodes: Vec<Vec<f64>> = (0..4).map(|i| som.node(i).to_vec()).collect();
        assert_eq!(som.quantization_error(&nodes), 0.0);

        let single = train_som(&rows, (1, 1), &SomTrainConfig::for_grid(1, 1, 9)).unwrap();
        let mean_d = rows.iter().map(|r| sq_dist(r, single.node(0)).sqrt()).sum::<f64>() / rows.len() as f64;
        assert!((single.quantization_error(&rows) - mean_d).abs() < 1e-12);

        let init = Som::initialize(&rows, (2, 2), &cfg).unwrap();
        assert!(som.quantization_error(&rows) < init.quantization_error(&rows));
    }

    #[test]
    fn qe_decreases_for_ten_seeds() {
        for seed in 0..10 {
            let rows = random_rows(100 + seed, 80, 55);
            let cfg = SomTrainConfig { epochs: 50, ..SomTrainConfig::for_grid(3, 3, seed) };
            let init = Som::initialize(&rows, (3, 3), &cfg).unwrap();
            let som = train_som(&rows, (3, 3), &cfg).unwrap();
            assert!(som.quantization_error(&rows) < init.quantization_error(&rows), "seed {seed}");
        }
    }

    #[test]
    fn config_and_input_errors() {
        assert!(matches!(train_som(&[], (1, 1), &SomTrainConfig::for_grid(1, 1, 0)), Err(SomError::EmptyInput)));
        let bad = SomTrainConfig { epochs: 0, ..SomTrainConfig::for_grid(1, 1, 0) };
        assert!(train_som(&[vec![1.0]], (1, 1), &bad).is_err());
        assert!(matches!(
            train_som(&[vec![1.0], vec![1.0, 2.0]], (1, 1), &SomTrainConfig::for_grid(1, 1, 0)),
            Err(SomError::DimensionMismatch { row: 1, .. })
        ));
        assert_eq!(default_grid(100), (8, 8));
        assert_eq!(default_grid(1), (3, 3));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = random_rows(6, 20, 55);
        let som = train_som(&rows, (2, 3), &SomTrainConfig::for_grid(2, 3, 4)).unwrap();
        som.save(dir.path()).unwrap();
        assert_eq!(Som::load(dir.path()).unwrap(), som);
    }
}

//! Linear valence/arousal regression over the 53 low-level statistics.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::features::{annotate, LOWLEVEL_DIMS};
use super::ListeningError;
use crate::dsp::FrameAnalyzer;
use crate::signals;

const DEFAULT_MODEL: &str = include_str!("../../assets/affect_default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffectModel {
    pub valence_bias: f64,
    pub arousal_bias: f64,
    pub valence_weights: Vec<f64>,
    pub arousal_weights: Vec<f64>,
}

impl AffectModel {
    pub fn zero() -> Self {
        Self {
            valence_bias: 0.0,
            arousal_bias: 0.0,
            valence_weights: vec![0.0; LOWLEVEL_DIMS],
            arousal_weights: vec![0.0; LOWLEVEL_DIMS],
        }
    }

    /// Small random coefficients; handy for tests that need a non-trivial model.
    pub fn seeded_random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = || -> Vec<f64> {
            (0..LOWLEVEL_DIMS)
                .map(|_| rng.random_range(-0.01..0.01))
                .collect()
        };
        let (valence_weights, arousal_weights) = (w(), w());
        Self {
            valence_bias: rng.random_range(-0.5..0.5),
            arousal_bias: rng.random_range(-0.5..0.5),
            valence_weights,
            arousal_weights,
        }
    }

    /// The bundled demo model, fit on synthetic tones by
    /// [`fit_default_model`]. Not fit on any real listening data.
    pub fn bundled_default() -> Self {
        Self::from_toml(DEFAULT_MODEL).expect("bundled affect model parses")
    }

    pub fn validate(&self) -> Result<(), ListeningError> {
        for (name, w) in [
            ("valence_weights", &self.valence_weights),
            ("arousal_weights", &self.arousal_weights),
        ] {
            if w.len() != LOWLEVEL_DIMS {
                return Err(ListeningError::DimensionMismatch {
                    what: name,
                    expected: LOWLEVEL_DIMS,
                    got: w.len(),
                });
            }
        }
        let finite = self
            .valence_weights
            .iter()
            .chain(&self.arousal_weights)
            .chain([&self.valence_bias, &self.arousal_bias])
            .all(|v| v.is_finite());
        if !finite {
            return Err(ListeningError::InvalidConfig(
                "affect model has non-finite coefficients".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, ListeningError> {
        let model: Self =
            toml::from_str(text).map_err(|e| ListeningError::InvalidConfig(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model serializes")
    }

    pub fn load(path: &Path) -> Result<Self, ListeningError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ListeningError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// SHA-256 of the canonical TOML serialization, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

/// `(valence, arousal)`, each `clamp(w·x + b, -1, 1)`.
pub fn affect(lowlevel: &[f64], model: &AffectModel) -> Result<(f64, f64), ListeningError> {
    if lowlevel.len() != LOWLEVEL_DIMS {
        return Err(ListeningError::DimensionMismatch {
            what: "low-level statistics",
            expected: LOWLEVEL_DIMS,
            got: lowlevel.len(),
        });
    }
    model.validate()?;
    let dot = |w: &[f64]| w.iter().zip(lowlevel).map(|(a, b)| a * b).sum::<f64>();
    let v = (dot(&model.valence_weights) + model.valence_bias).clamp(-1.0, 1.0);
    let a = (dot(&model.arousal_weights) + model.arousal_bias).clamp(-1.0, 1.0);
    Ok((v, a))
}

/// One labelled example for [`fit_affect_model`].
#[derive(Debug, Clone)]
pub struct AffectExample {
    pub lowlevel: Vec<f64>,
    pub valence: f64,
    pub arousal: f64,
}

/// Ridge regression on standardized statistics, folded back into raw-unit
/// weights and biases.
pub fn fit_affect_model(examples: &[AffectExample], ridge: f64) -> AffectModel {
    let n = examples.len();
    let d = LOWLEVEL_DIMS;
    assert!(n > 0, "need at least one example");
    let mut means = vec![0.0; d];
    let mut stds = vec![0.0; d];
    for j in 0..d {
        means[j] = examples.iter().map(|e| e.lowlevel[j]).sum::<f64>() / n as f64;
        let var = examples
            .iter()
            .map(|e| (e.lowlevel[j] - means[j]).powi(2))
            .sum::<f64>()
            / n as f64;
        stds[j] = var.sqrt();
    }
    let x = DMatrix::from_fn(n, d, |i, j| {
        if stds[j] > 1e-9 {
            (examples[i].lowlevel[j] - means[j]) / stds[j]
        } else {
            0.0
        }
    });
    let gram = x.transpose() * &x + DMatrix::identity(d, d) * ridge;
    let chol = gram.cholesky().expect("ridge system is positive definite");
    let solve = |targets: Vec<f64>| -> (Vec<f64>, f64) {
        let mean_t = targets.iter().sum::<f64>() / n as f64;
        let y = DVector::from_iterator(n, targets.iter().map(|t| t - mean_t));
        let w_std = chol.solve(&(x.transpose() * y));
        let w: Vec<f64> = (0..d)
            .map(|j| if stds[j] > 1e-9 { w_std[j] / stds[j] } else { 0.0 })
            .collect();
        let bias = mean_t - w.iter().zip(&means).map(|(a, m)| a * m).sum::<f64>();
        (w, bias)
    };
    let (valence_weights, valence_bias) = solve(examples.iter().map(|e| e.valence).collect());
    let (arousal_weights, arousal_bias) = solve(examples.iter().map(|e| e.arousal).collect());
    AffectModel {
        valence_bias,
        arousal_bias,
        valence_weights,
        arousal_weights,
    }
}

const ROOT_HZ: f64 = 220.0;

/// Chords with their valence label: consonant intervals positive,
/// clusters and tritones negative.
const CHORDS: [(&[f64], f64); 5] = [
    (&[1.0], 0.6),
    (&[1.0, 1.5], 0.5),
    (&[1.0, 1.259_921, 1.498_307], 0.6),
    (&[1.0, 1.059_463], -0.6),
    (&[1.0, 1.414_214], -0.5),
];
const LEVELS: [f64; 3] = [0.05, 0.2, 0.8];
const PARTIALS: [usize; 3] = [1, 4, 16];

/// Labelled synthetic tones: arousal rises with level and brightness,
/// valence follows chord consonance.
pub fn synthetic_training_set(sample_rate: u32, window: usize, hop: usize) -> Vec<AffectExample> {
    let analyzer = FrameAnalyzer::new(sample_rate, window).expect("valid analysis config");
    let len = sample_rate as usize / 2;
    let zero = AffectModel::zero();
    let mut out = Vec::new();
    for (ratios, valence) in CHORDS {
        for (li, level) in LEVELS.iter().enumerate() {
            for (pi, partials) in PARTIALS.iter().enumerate() {
                let mut mix = vec![0.0f32; len];
                for r in ratios {
                    let tone =
                        signals::harmonic_tone(ROOT_HZ * r, *partials, *level, len, sample_rate);
                    for (m, t) in mix.iter_mut().zip(tone) {
                        *m += t / ratios.len() as f32;
                    }
                }
                let v = annotate(&mix, &analyzer, hop, &zero);
                out.push(AffectExample {
                    lowlevel: v.lowlevel().to_vec(),
                    valence,
                    arousal: 0.4 * ((li as f64 - 1.0) + (pi as f64 - 1.0)),
                });
            }
        }
    }
    out
}

/// Regenerates the bundled model.
pub fn fit_default_model() -> AffectModel {
    let set = synthetic_training_set(
        crate::dsp::DEFAULT_SAMPLE_RATE,
        crate::dsp::DEFAULT_WINDOW_SIZE,
        crate::dsp::DEFAULT_HOP_SIZE,
    );
    fit_affect_model(&set, 1.0)
}

//! Binary animal detector: an L2-regularized hinge-loss linear classifier
//! trained by stochastic subgradient descent with the `1/(λt)` step schedule.
//!
//! The objective is `(λ/2)‖w‖² + mean_i max(0, 1 − y_i (w·x_i + b))`; the bias
//! is an unregularized extra coordinate. After each step the weight vector is
//! projected onto the ball of radius `1/√λ`, which contains the optimum.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_for;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmTrainConfig {
    pub epochs: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for SvmTrainConfig {
    fn default() -> Self {
        SvmTrainConfig {
            epochs: 30,
            lambda: 1e-3,
            seed: 0,
        }
    }
}

/// Training output: the final iterate plus per-epoch objective traces.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmFit {
    pub model: LinearModel,
    /// Objective of the iterate at the end of each epoch.
    pub objective: Vec<f64>,
    /// Running mean, over every step taken so far, of the instantaneous
    /// objective `(λ/2)‖w‖² + hinge` on the visited example at the iterate
    /// before the step; one entry per epoch.
    pub epoch_averaged_objective: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_rows<R: AsRef<[f64]>>(features: &[R], dim: usize) -> Result<()> {
    for row in features {
        let row = row.as_ref();
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature rows must be finite"));
        }
    }
    Ok(())
}

/// `(λ/2)‖w‖² + mean hinge loss`.
pub fn objective<R: AsRef<[f64]>>(
    weights: &[f64],
    bias: f64,
    lambda: f64,
    features: &[R],
    labels: &[f64],
) -> f64 {
    let hinge: f64 = features
        .iter()
        .zip(labels)
        .map(|(x, &y)| (1.0 - y * (dot(weights, x.as_ref()) + bias)).max(0.0))
        .sum();
    0.5 * lambda * dot(weights, weights) + hinge / features.len() as f64
}

pub fn train_linear_svm<R: AsRef<[f64]>>(
    features: &[R],
    labels: &[f64],
    cfg: &SvmTrainConfig,
) -> Result<SvmFit> {
    if cfg.epochs == 0 {
        return Err(Error::invalid("epochs must be at least 1"));
    }
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::invalid("lambda must be positive"));
    }
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            actual: labels.len(),
        });
    }
    if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::invalid("labels must be +1 or -1"));
    }
    let has_pos = labels.iter().any(|&y| y > 0.0);
    let has_neg = labels.iter().any(|&y| y < 0.0);
    if features.len() < 2 || !has_pos || !has_neg {
        return Err(Error::SingleClass);
    }
    let dim = features[0].as_ref().len();
    check_rows(features, dim)?;

    let lambda = cfg.lambda;
    let radius = 1.0 / lambda.sqrt();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut t = 0usize;
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut rng = rng_for(cfg.seed, "svm/shuffle");
    let mut objective_trace = Vec::with_capacity(cfg.epochs);
    let mut averaged_trace = Vec::with_capacity(cfg.epochs);
    let mut instantaneous_sum = 0.0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let x = features[i].as_ref();
            let y = labels[i];
            let eta = 1.0 / (lambda * t as f64);
            let margin = y * (dot(&w, x) + b);
            instantaneous_sum += 0.5 * lambda * dot(&w, &w) + (1.0 - margin).max(0.0);
            let violated = margin < 1.0;
            let shrink = 1.0 - 1.0 / t as f64;
            for wj in &mut w {
                *wj *= shrink;
            }
            if violated {
                for (wj, xj) in w.iter_mut().zip(x) {
                    *wj += eta * y * xj;
                }
                b += eta * y;
            }
            let norm = dot(&w, &w).sqrt();
            if norm > radius {
                let s = radius / norm;
                for wj in &mut w {
                    *wj *= s;
                }
            }
        }
        objective_trace.push(objective(&w, b, lambda, features, labels));
        averaged_trace.push(instantaneous_sum / t as f64);
    }
    Ok(SvmFit {
        model: LinearModel {
            weights: w,
            bias: b,
            lambda,
        },
        objective: objective_trace,
        epoch_averaged_objective: averaged_trace,
    })
}

/// Logistic function, stable for large |z|.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn check(&self, feature: &[f64]) -> Result<()> {
        if feature.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                actual: feature.len(),
            });
        }
        Ok(())
    }

    /// `w·x + b`
    pub fn predict_margin(&self, feature: &[f64]) -> Result<f64> {
        self.check(feature)?;
        Ok(dot(&self.weights, feature) + self.bias)
    }

    /// Sign of the margin; a margin of exactly zero is labeled +1.
    pub fn predict_label(&self, feature: &[f64]) -> Result<i8> {
        Ok(if self.predict_margin(feature)? >= 0.0 {
            1
        } else {
            -1
        })
    }

    /// `logistic(scale × margin)`.
    pub fn margin_to_probability(&self, feature: &[f64], scale: f64) -> Result<f64> {
        if scale.is_nan() || scale <= 0.0 {
            return Err(Error::invalid("probability scale must be positive"));
        }
        Ok(logistic(scale * self.predict_margin(feature)?))
    }

    pub fn accuracy<R: AsRef<[f64]>>(&self, features: &[R], labels: &[f64]) -> Result<f64> {
        let mut correct = 0usize;
        for (x, &y) in features.iter().zip(labels) {
            if f64::from(self.predict_label(x.as_ref())?) == y {
                correct += 1;
            }
        }
        Ok(correct as f64 / features.len().max(1) as f64)
    }

    pub fn to_toml(&self) -> Result<String> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            lambda: self.lambda,
            bias: self.bias,
            dim: self.weights.len(),
            weights: self.weights.clone(),
        };
        toml::to_string(&file).map_err(|e| Error::format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ModelFile = toml::from_str(text).map_err(|e| Error::format(e.to_string()))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::format(format!(
                "unsupported model file version {}",
                file.format_version
            )));
        }
        if file.weights.len() != file.dim {
            return Err(Error::format("weight array length does not match dim"));
        }
        if !file.bias.is_finite() || file.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::format("model parameters must be finite"));
        }
        Ok(LinearModel {
            weights: file.weights,
            bias: file.bias,
            lambda: file.lambda,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    lambda: f64,
    bias: f64,
    dim: usize,
    weights: Vec<f64>,
}

/// One-vs-rest linear classifiers, one per class. Used as the image-level
/// species classifier that the region-scoring head is compared against.
#[derive(Debug, Clone, PartialEq)]
pub struct OneVsRest {
    pub class_names: Vec<String>,
    pub models: Vec<LinearModel>,
}

impl OneVsRest {
    pub fn train<R: AsRef<[f64]>>(
        features: &[R],
        labels: &[usize],
        class_names: Vec<String>,
        cfg: &SvmTrainConfig,
    ) -> Result<Self> {
        let c = class_names.len();
        if labels.iter().any(|&l| l >= c) {
            return Err(Error::invalid("label index out of range"));
        }
        let mut models = Vec::with_capacity(c);
        for class in 0..c {
            let y: Vec<f64> = labels
                .iter()
                .map(|&l| if l == class { 1.0 } else { -1.0 })
                .collect();
            let class_cfg = SvmTrainConfig {
                seed: crate::rng::derive_seed(cfg.seed, &format!("ovr/{class}")),
                ..*cfg
            };
            models.push(train_linear_svm(features, &y, &class_cfg)?.model);
        }
        Ok(OneVsRest {
            class_names,
            models,
        })
    }

    pub fn margins(&self, feature: &[f64]) -> Result<Vec<f64>> {
        self.models
            .iter()
            .map(|m| m.predict_margin(feature))
            .collect()
    }

    /// Class indices by descending margin, ties to the lower index.
    pub fn ranking(&self, feature: &[f64]) -> Result<Vec<usize>> {
        let m = self.margins(feature)?;
        let mut idx: Vec<usize> = (0..m.len()).collect();
        idx.sort_by(|&a, &b| m[b].total_cmp(&m[a]).then(a.cmp(&b)));
        Ok(idx)
    }
}

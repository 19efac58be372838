//! Multiclass linear superpixel classifier with softmax posteriors.
//!
//! One weight vector per class, no bias. Training minimizes the
//! Crammer-Singer multiclass hinge with an epoch-budgeted stochastic
//! subgradient method (Pegasos steps, averaged iterate). Scoring emits
//! the stabilized softmax of the per-class logits.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::descriptors::SuperpixelDescriptor;
use crate::error::{Error, Result};
use crate::util;

/// Class count of the standard superpixel detector.
pub const NUM_CLASSES: usize = 23;
/// Epoch budget of [`train_multiclass`]; the solver runs exactly this
/// many passes, there is no early stop.
pub const DEFAULT_EPOCHS: usize = 100;
const SCHEMA_VERSION: u32 = 1;

/// Per-superpixel class posterior. Entries lie in [0, 1] and sum to 1
/// within 1e-9; softmax outputs are additionally strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    probs: Vec<f64>,
}

impl ScoreVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Shape("score vector must not be empty".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Domain(format!("score entry {p} outside [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("score entries sum to {sum}, expected 1")));
        }
        Ok(ScoreVector { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate().skip(1) {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Trained multiclass model: weight rows aligned with `class_names`,
/// plus the per-dimension standardization fitted on the training set.
/// Scoring standardizes internally, so the model is self-contained.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorModel {
    schema_version: u32,
    pub class_names: Vec<String>,
    pub feature_dim: usize,
    pub weights: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl DetectorModel {
    pub fn new(
        class_names: Vec<String>,
        feature_dim: usize,
        weights: Vec<Vec<f64>>,
        mean: Vec<f64>,
        scale: Vec<f64>,
    ) -> Result<Self> {
        let model =
            DetectorModel { schema_version: SCHEMA_VERSION, class_names, feature_dim, weights, mean, scale };
        model.validate()?;
        Ok(model)
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    fn validate(&self) -> Result<()> {
        if self.class_names.len() < 2 {
            return Err(Error::Shape("detector needs at least 2 classes".into()));
        }
        if self.weights.len() != self.class_names.len() {
            return Err(Error::Shape(format!(
                "{} weight rows for {} classes",
                self.weights.len(),
                self.class_names.len()
            )));
        }
        for row in &self.weights {
            if row.len() != self.feature_dim {
                return Err(Error::Shape(format!(
                    "weight row length {} does not match feature_dim {}",
                    row.len(),
                    self.feature_dim
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("non-finite weight {v}")));
            }
        }
        if self.mean.len() != self.feature_dim || self.scale.len() != self.feature_dim {
            return Err(Error::Shape("standardization vectors must match feature_dim".into()));
        }
        if self.scale.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::Domain("standardization scales must be positive".into()));
        }
        Ok(())
    }

    fn standardize(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    fn logits(&self, s: &SuperpixelDescriptor) -> Result<Vec<f64>> {
        if s.values.len() != self.feature_dim {
            return Err(Error::Shape(format!(
                "descriptor length {} does not match feature_dim {}",
                s.values.len(),
                self.feature_dim
            )));
        }
        let z = self.standardize(&s.values);
        Ok(self.weights.iter().map(|row| dot(row, &z)).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = serde_json::to_vec_pretty(self)
            .map_err(|e| Error::Format { path: path.into(), reason: e.to_string() })?;
        util::write_atomic(path, &bytes)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let model: DetectorModel = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Format { path: path.into(), reason: e.to_string() })?;
        if model.schema_version != SCHEMA_VERSION {
            return Err(Error::Format {
                path: path.into(),
                reason: format!(
                    "unsupported detector schema_version {} (expected {SCHEMA_VERSION})",
                    model.schema_version
                ),
            });
        }
        model.validate().map_err(|e| Error::Format { path: path.into(), reason: e.to_string() })?;
        Ok(model)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains with generated class names `class_0..class_{K-1}` where K is
/// one past the largest class id seen.
pub fn train_multiclass(
    samples: &[(SuperpixelDescriptor, usize)],
    c: f64,
    seed: u64,
) -> Result<DetectorModel> {
    let k = samples.iter().map(|(_, y)| y + 1).max().unwrap_or(0);
    let names = (0..k).map(|i| format!("class_{i}")).collect();
    train_multiclass_named(samples, names, c, seed, DEFAULT_EPOCHS)
}

/// Full-control variant: explicit class names and epoch budget.
pub fn train_multiclass_named(
    samples: &[(SuperpixelDescriptor, usize)],
    class_names: Vec<String>,
    c: f64,
    seed: u64,
    epochs: usize,
) -> Result<DetectorModel> {
    use rand::seq::SliceRandom;

    if c <= 0.0 || !c.is_finite() {
        return Err(Error::Domain(format!("regularization C must be positive, got {c}")));
    }
    let k = class_names.len();
    let first = samples
        .first()
        .ok_or_else(|| Error::DegenerateData("no training samples".into()))?;
    let dim = first.0.values.len();
    let mut present = vec![false; k];
    for (s, y) in samples {
        if s.values.len() != dim {
            return Err(Error::Shape(format!(
                "descriptor length {} does not match first sample's {dim}",
                s.values.len()
            )));
        }
        if *y >= k {
            return Err(Error::Domain(format!("class id {y} out of range for {k} classes")));
        }
        present[*y] = true;
    }
    if present.iter().filter(|p| **p).count() < 2 {
        return Err(Error::DegenerateData(
            "multiclass training needs samples from at least 2 classes".into(),
        ));
    }

    let (mean, scale) = fit_standardization(samples, dim);
    let z: Vec<Vec<f64>> = samples
        .iter()
        .map(|(s, _)| {
            s.values
                .iter()
                .zip(mean.iter().zip(&scale))
                .map(|(v, (m, sc))| (v - m) / sc)
                .collect()
        })
        .collect();

    let n = samples.len();
    let lambda = 1.0 / (c * n as f64);
    let mut w = vec![vec![0.0; dim]; k];
    let mut w_sum = vec![vec![0.0; dim]; k];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = util::rng_from(seed);
    let mut step = 0usize;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            step += 1;
            let eta = 1.0 / (lambda * step as f64);
            let y = samples[i].1;
            // most violating class: argmax of score plus unit margin,
            // lowest index on ties
            let mut r = 0;
            let mut r_val = f64::NEG_INFINITY;
            for (cls, row) in w.iter().enumerate() {
                let v = dot(row, &z[i]) + if cls == y { 0.0 } else { 1.0 };
                if v > r_val {
                    r_val = v;
                    r = cls;
                }
            }
            let shrink = 1.0 - 1.0 / step as f64;
            for row in w.iter_mut() {
                for v in row.iter_mut() {
                    *v *= shrink;
                }
            }
            if r != y {
                for (wv, zv) in w[r].iter_mut().zip(&z[i]) {
                    *wv -= eta * zv;
                }
                for (wv, zv) in w[y].iter_mut().zip(&z[i]) {
                    *wv += eta * zv;
                }
            }
            for (acc, row) in w_sum.iter_mut().zip(&w) {
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += v;
                }
            }
        }
    }
    let weights: Vec<Vec<f64>> = w_sum
        .into_iter()
        .map(|row| row.into_iter().map(|v| v / step as f64).collect())
        .collect();
    DetectorModel::new(class_names, dim, weights, mean, scale)
}

fn fit_standardization(samples: &[(SuperpixelDescriptor, usize)], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    let mut mean = vec![0.0; dim];
    for (s, _) in samples {
        for (m, v) in mean.iter_mut().zip(&s.values) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; dim];
    for (s, _) in samples {
        for (vv, (v, m)) in var.iter_mut().zip(s.values.iter().zip(&mean)) {
            let d = v - m;
            *vv += d * d;
        }
    }
    let scale = var
        .into_iter()
        .map(|v| {
            let sd = (v / n).sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0 // constant dimension, leave centered values at 0
            }
        })
        .collect();
    (mean, scale)
}

/// Stabilized softmax of the per-class logits. Entries are clamped to
/// the smallest positive normal float and renormalized, keeping the
/// output strictly inside the simplex even under extreme saturation.
pub fn score(model: &DetectorModel, s: &SuperpixelDescriptor) -> Result<ScoreVector> {
    let logits = model.logits(s)?;
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p = (*p / total).max(f64::MIN_POSITIVE);
    }
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        // the upper clamp keeps a saturated entry from rounding to
        // exactly 1; it moves the sum by at most one ulp
        *p = (*p / total).min(1.0 - f64::EPSILON / 2.0);
    }
    ScoreVector::new(probs)
}

/// Class with the highest posterior, lowest index on ties.
pub fn predict_class(model: &DetectorModel, s: &SuperpixelDescriptor) -> Result<usize> {
    Ok(score(model, s)?.argmax())
}

/// Writes one headerless CSV row of K probabilities per superpixel.
pub fn write_scores_csv(scores: &[ScoreVector], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut buf);
        for s in scores {
            w.write_record(s.probs().iter().map(|v| format!("{v:.17e}")))
                .map_err(|e| Error::Format { path: path.into(), reason: e.to_string() })?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    util::write_atomic(path, &buf)
}

/// Reads a scores CSV; every row must be a valid probability vector of
/// the same width.
pub fn read_scores_csv(path: impl AsRef<Path>) -> Result<Vec<ScoreVector>> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Format { path: path.into(), reason: e.to_string() })?;
    let mut out: Vec<ScoreVector> = Vec::new();
    for (row, record) in r.records().enumerate() {
        let record = record.map_err(|e| Error::Format { path: path.into(), reason: e.to_string() })?;
        let probs: Vec<f64> = record
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| Error::Format {
                    path: path.into(),
                    reason: format!("row {row}: not a number: {f:?}"),
                })
            })
            .collect::<Result<_>>()?;
        let sv = ScoreVector::new(probs).map_err(|e| Error::Format {
            path: path.into(),
            reason: format!("row {row}: {e}"),
        })?;
        if let Some(prev) = out.first() {
            if prev.len() != sv.len() {
                return Err(Error::Format {
                    path: path.into(),
                    reason: format!("row {row} has {} entries, expected {}", sv.len(), prev.len()),
                });
            }
        }
        out.push(sv);
    }
    Ok(out)
}

//! The structural action model: joint features over measurements,
//! latent superpixel states and a binary action label; greedy and exact
//! inference; and alternating max-margin training.

pub mod features;
pub mod inference;
pub mod training;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use features::{
    feature_class, feature_measurement, feature_state, joint_feature, score_direct, score_joint,
    JointFeatureVector,
};
pub use inference::{complete_latent, infer_exact, infer_greedy, infer_loss_augmented, init_latent};
pub use training::{regularized_risk, train_lssvm, TrainConfig, TrainingReport};

use crate::detector::ScoreVector;
use crate::error::{Error, Result};
use crate::util;

const SCHEMA_VERSION: u32 = 1;

/// The per-image input to the structural model: one probability vector
/// per superpixel, all over the same state count.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleMeasurements {
    x: Vec<ScoreVector>,
}

impl ExampleMeasurements {
    pub fn new(x: Vec<ScoreVector>) -> Result<Self> {
        let first = x
            .first()
            .ok_or_else(|| Error::Shape("an example needs at least one superpixel".into()))?;
        let k = first.len();
        if let Some(bad) = x.iter().find(|sv| sv.len() != k) {
            return Err(Error::Shape(format!(
                "inconsistent state counts: {} vs {k}",
                bad.len()
            )));
        }
        Ok(ExampleMeasurements { x })
    }

    /// Superpixel count T.
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires at least one measurement
    }

    /// State count K.
    pub fn states(&self) -> usize {
        self.x[0].len()
    }

    pub fn get(&self, t: usize) -> &ScoreVector {
        &self.x[t]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ScoreVector> {
        self.x.iter()
    }
}

/// One latent state per superpixel, 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentAssignment {
    h: Vec<usize>,
}

impl LatentAssignment {
    pub fn new(h: Vec<usize>) -> Self {
        LatentAssignment { h }
    }

    pub fn states(&self) -> &[usize] {
        &self.h
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

pub(crate) fn check_label(y: usize) -> Result<()> {
    if y > 1 {
        return Err(Error::Domain(format!("action label {y} is not binary")));
    }
    Ok(())
}

/// Weights of the structural model, stored as the three feature blocks;
/// total parameter length 2K² + 2K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionModel {
    schema_version: u32,
    pub k: usize,
    pub normalize_pairs: bool,
    pub w_meas: Vec<f64>,
    pub w_state: Vec<f64>,
    pub w_class: Vec<f64>,
    pub metadata: String,
}

impl ActionModel {
    pub fn with_blocks(
        k: usize,
        w_meas: Vec<f64>,
        w_state: Vec<f64>,
        w_class: Vec<f64>,
        normalize_pairs: bool,
    ) -> Result<Self> {
        let model = ActionModel {
            schema_version: SCHEMA_VERSION,
            k,
            normalize_pairs,
            w_meas,
            w_state,
            w_class,
            metadata: String::new(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn zeros(k: usize) -> Self {
        Self::zeros_with(k, false)
    }

    pub fn zeros_with(k: usize, normalize_pairs: bool) -> Self {
        ActionModel {
            schema_version: SCHEMA_VERSION,
            k,
            normalize_pairs,
            w_meas: vec![0.0; k * k],
            w_state: vec![0.0; k * k],
            w_class: vec![0.0; 2 * k],
            metadata: String::new(),
        }
    }

    /// Total parameter count 2K² + 2K.
    pub fn dim(&self) -> usize {
        2 * self.k * self.k + 2 * self.k
    }

    /// The three blocks concatenated in feature order.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.w_meas);
        v.extend_from_slice(&self.w_state);
        v.extend_from_slice(&self.w_class);
        v
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Domain("state count must be positive".into()));
        }
        let kk = self.k * self.k;
        if self.w_meas.len() != kk || self.w_state.len() != kk || self.w_class.len() != 2 * self.k {
            return Err(Error::Shape(format!(
                "block lengths ({}, {}, {}) do not match K = {}",
                self.w_meas.len(),
                self.w_state.len(),
                self.w_class.len(),
                self.k
            )));
        }
        let finite = self
            .w_meas
            .iter()
            .chain(&self.w_state)
            .chain(&self.w_class)
            .all(|w| w.is_finite());
        if !finite {
            return Err(Error::Domain("model weights must be finite".into()));
        }
        Ok(())
    }

    fn scale_in_place(&mut self, factor: f64) {
        for w in self
            .w_meas
            .iter_mut()
            .chain(self.w_state.iter_mut())
            .chain(self.w_class.iter_mut())
        {
            *w *= factor;
        }
    }

    /// Adds `factor` times a joint feature vector, block by block.
    fn add_scaled(&mut self, psi: &JointFeatureVector, factor: f64) {
        for (w, v) in self.w_meas.iter_mut().zip(psi.measurement_block()) {
            *w += factor * v;
        }
        for (w, v) in self.w_state.iter_mut().zip(psi.state_block()) {
            *w += factor * v;
        }
        for (w, v) in self.w_class.iter_mut().zip(psi.class_block()) {
            *w += factor * v;
        }
    }

    fn accumulate(&mut self, other: &ActionModel) {
        for (a, b) in self.w_meas.iter_mut().zip(&other.w_meas) {
            *a += b;
        }
        for (a, b) in self.w_state.iter_mut().zip(&other.w_state) {
            *a += b;
        }
        for (a, b) in self.w_class.iter_mut().zip(&other.w_class) {
            *a += b;
        }
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
        let model: ActionModel = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Format { path: path.into(), reason: e.to_string() })?;
        if model.schema_version != SCHEMA_VERSION {
            return Err(Error::Format {
                path: path.into(),
                reason: format!(
                    "unsupported action model schema_version {} (expected {SCHEMA_VERSION})",
                    model.schema_version
                ),
            });
        }
        model.validate().map_err(|e| Error::Format { path: path.into(), reason: e.to_string() })?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measurements_require_consistent_state_counts() {
        assert!(ExampleMeasurements::new(vec![]).is_err());
        let a = ScoreVector::new(vec![0.5, 0.5]).unwrap();
        let b = ScoreVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert!(ExampleMeasurements::new(vec![a.clone(), b]).is_err());
        let ok = ExampleMeasurements::new(vec![a.clone(), a]).unwrap();
        assert_eq!(ok.len(), 2);
        assert_eq!(ok.states(), 2);
    }

    #[test]
    fn model_dimension_and_block_validation() {
        let m = ActionModel::zeros(23);
        assert_eq!(m.dim(), 1104);
        assert_eq!(m.flat().len(), 1104);
        assert!(ActionModel::with_blocks(3, vec![0.0; 9], vec![0.0; 9], vec![0.0; 6], false).is_ok());
        assert!(ActionModel::with_blocks(3, vec![0.0; 8], vec![0.0; 9], vec![0.0; 6], false).is_err());
        assert!(ActionModel::with_blocks(
            2,
            vec![f64::NAN; 4],
            vec![0.0; 4],
            vec![0.0; 4],
            false
        )
        .is_err());
    }

    #[test]
    fn model_save_load_roundtrip_and_schema_check() {
        let mut m = ActionModel::zeros(4);
        m.w_meas[3] = 1.25;
        m.w_state[7] = -0.5;
        m.w_class[5] = 0.125;
        m.metadata = "C=1;seed=0".into();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("action.json");
        m.save(&path).unwrap();
        let back = ActionModel::load(&path).unwrap();
        assert_eq!(back, m);
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"schema_version\": 1", "\"schema_version\": 3");
        std::fs::write(&path, text).unwrap();
        assert!(ActionModel::load(&path).is_err());
    }
}

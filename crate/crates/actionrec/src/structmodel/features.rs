//! Joint feature maps over (measurements, latent states, action label).
//!
//! The joint vector has three blocks, in order:
//!
//! * measurement, K² values: each superpixel's score vector placed at
//!   the offset of its state;
//! * state, K² values: counts of ordered state pairs (t, u), u != t;
//! * class, 2K values: counts of states split by action label half.
//!
//! All indices are 0-based: state j places measurements at
//! `[K*j, K*j + K)`, the pair (j, k) lands at flat index `K*j + k`, and
//! the class entry for (y, j) at `y*K + j`.

use crate::detector::ScoreVector;
use crate::error::{Error, Result};

use super::{check_label, ActionModel, ExampleMeasurements, LatentAssignment};

/// Dense joint feature vector of length 2K² + 2K.
#[derive(Debug, Clone, PartialEq)]
pub struct JointFeatureVector {
    k: usize,
    values: Vec<f64>,
}

impl JointFeatureVector {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn measurement_block(&self) -> &[f64] {
        &self.values[..self.k * self.k]
    }

    pub fn state_block(&self) -> &[f64] {
        &self.values[self.k * self.k..2 * self.k * self.k]
    }

    pub fn class_block(&self) -> &[f64] {
        &self.values[2 * self.k * self.k..]
    }
}

/// K² vector with `x_t` copied into the K slots starting at `K*j`.
pub fn feature_measurement(x_t: &ScoreVector, j: usize) -> Result<Vec<f64>> {
    let k = x_t.len();
    if j >= k {
        return Err(Error::Domain(format!("state {j} out of range for {k} states")));
    }
    let mut v = vec![0.0; k * k];
    v[k * j..k * j + k].copy_from_slice(x_t.probs());
    Ok(v)
}

/// K² one-hot at flat index `K*j + k` for the ordered state pair (j, k).
pub fn feature_state(j: usize, k: usize, num_states: usize) -> Result<Vec<f64>> {
    if j >= num_states || k >= num_states {
        return Err(Error::Domain(format!(
            "state pair ({j}, {k}) out of range for {num_states} states"
        )));
    }
    let mut v = vec![0.0; num_states * num_states];
    v[num_states * j + k] = 1.0;
    Ok(v)
}

/// 2K one-hot at `y*K + j`; the two label halves never overlap.
pub fn feature_class(y: usize, j: usize, num_states: usize) -> Result<Vec<f64>> {
    check_label(y)?;
    if j >= num_states {
        return Err(Error::Domain(format!("state {j} out of range for {num_states} states")));
    }
    let mut v = vec![0.0; 2 * num_states];
    v[y * num_states + j] = 1.0;
    Ok(v)
}

/// Sums the three feature families over all superpixels and all ordered
/// pairs (t, u), u != t. With `normalize_pairs` the state block is
/// divided by (T - 1), taming its quadratic growth in T.
pub fn joint_feature(
    x: &ExampleMeasurements,
    h: &LatentAssignment,
    y: usize,
    normalize_pairs: bool,
) -> Result<JointFeatureVector> {
    check_label(y)?;
    let k = x.states();
    let t_count = x.len();
    check_assignment(h, t_count, k)?;
    let mut values = vec![0.0; 2 * k * k + 2 * k];
    for (t, x_t) in x.iter().enumerate() {
        let j = h.states()[t];
        for (slot, p) in values[k * j..k * j + k].iter_mut().zip(x_t.probs()) {
            *slot += p;
        }
        values[2 * k * k + y * k + j] += 1.0;
    }
    let pair = pair_weight(normalize_pairs, t_count);
    for t in 0..t_count {
        for u in 0..t_count {
            if u != t {
                values[k * k + k * h.states()[t] + h.states()[u]] += pair;
            }
        }
    }
    Ok(JointFeatureVector { k, values })
}

/// Inner product of the model's concatenated blocks with a joint
/// feature vector.
pub fn score_joint(model: &ActionModel, psi: &JointFeatureVector) -> Result<f64> {
    if psi.k != model.k {
        return Err(Error::Shape(format!(
            "feature vector built for {} states, model has {}",
            psi.k, model.k
        )));
    }
    let kk = model.k * model.k;
    let mut s = 0.0;
    for (w, v) in model.w_meas.iter().zip(&psi.values[..kk]) {
        s += w * v;
    }
    for (w, v) in model.w_state.iter().zip(&psi.values[kk..2 * kk]) {
        s += w * v;
    }
    for (w, v) in model.w_class.iter().zip(&psi.values[2 * kk..]) {
        s += w * v;
    }
    Ok(s)
}

/// The same quantity accumulated directly as three sums, without
/// materializing the joint vector: per-superpixel measurement terms,
/// ordered-pair state terms, and per-superpixel class terms.
pub fn score_direct(
    model: &ActionModel,
    x: &ExampleMeasurements,
    h: &LatentAssignment,
    y: usize,
) -> Result<f64> {
    check_label(y)?;
    let k = model.k;
    if x.states() != k {
        return Err(Error::Shape(format!(
            "measurements carry {} states, model has {k}",
            x.states()
        )));
    }
    let t_count = x.len();
    check_assignment(h, t_count, k)?;
    let states = h.states();
    let mut s = 0.0;
    for (t, x_t) in x.iter().enumerate() {
        let j = states[t];
        for (w, p) in model.w_meas[k * j..k * j + k].iter().zip(x_t.probs()) {
            s += w * p;
        }
    }
    let pair = pair_weight(model.normalize_pairs, t_count);
    for t in 0..t_count {
        for u in 0..t_count {
            if u != t {
                s += pair * model.w_state[k * states[t] + states[u]];
            }
        }
    }
    for &j in states {
        s += model.w_class[y * k + j];
    }
    Ok(s)
}

pub(super) fn pair_weight(normalize_pairs: bool, t_count: usize) -> f64 {
    if normalize_pairs && t_count > 1 {
        1.0 / (t_count - 1) as f64
    } else {
        1.0
    }
}

pub(super) fn check_assignment(h: &LatentAssignment, t_count: usize, k: usize) -> Result<()> {
    if h.len() != t_count {
        return Err(Error::Shape(format!(
            "{} latent states for {} superpixels",
            h.len(),
            t_count
        )));
    }
    if let Some(s) = h.states().iter().find(|s| **s >= k) {
        return Err(Error::Domain(format!("latent state {s} out of range for {k} states")));
    }
    Ok(())
}

//! Inference over the joint (action label, latent states) space:
//! greedy coordinate ascent, exhaustive enumeration at desk scale, and
//! the loss-augmented variant used during training.
//!
//! Tie-breaking is uniform everywhere: lowest state index, then action
//! label 0.

use crate::error::{Error, Result};

use super::features::{check_assignment, pair_weight, score_direct};
use super::{ActionModel, ExampleMeasurements, LatentAssignment};

const MAX_SWEEPS: usize = 50;
const EXACT_CAPACITY: f64 = 1e7;

/// Per-superpixel argmax of the measurements, lowest index on ties.
/// The standard latent initialization before any model exists.
pub fn init_latent(x: &ExampleMeasurements) -> LatentAssignment {
    LatentAssignment::new(x.iter().map(|sv| sv.argmax()).collect())
}

/// Greedy maximization: for each label, initialize each state from the
/// measurement and class terms alone, then sweep the superpixels in
/// ascending order, moving each state to its best value given all
/// others, until a sweep changes nothing (at most 50 sweeps). Returns
/// the better label's result; exact ties keep label 0.
pub fn infer_greedy(
    model: &ActionModel,
    x: &ExampleMeasurements,
) -> Result<(usize, LatentAssignment, f64)> {
    check_dims(model, x)?;
    let (h0, s0) = greedy_fixed_label(model, x, 0, None);
    let (h1, s1) = greedy_fixed_label(model, x, 1, None);
    Ok(if s1 > s0 { (1, h1, s1) } else { (0, h0, s0) })
}

/// Greedy maximization over states with the label clamped, started
/// from an explicit assignment. Used for latent completion during
/// training.
pub fn complete_latent(
    model: &ActionModel,
    x: &ExampleMeasurements,
    y: usize,
    start: &LatentAssignment,
) -> Result<(LatentAssignment, f64)> {
    super::check_label(y)?;
    check_dims(model, x)?;
    check_assignment(start, x.len(), model.k)?;
    Ok(greedy_fixed_label(model, x, y, Some(start)))
}

/// Exhaustive maximization; the oracle for greedy inference at desk
/// scale. Enumerates labels 0 then 1 and assignments in lexicographic
/// order (first superpixel most significant), replacing only on a
/// strictly better score, so ties resolve exactly as in infer_greedy.
pub fn infer_exact(
    model: &ActionModel,
    x: &ExampleMeasurements,
) -> Result<(usize, LatentAssignment, f64)> {
    check_dims(model, x)?;
    let k = model.k;
    let t_count = x.len();
    let space = (k as f64).powi(t_count as i32) * 2.0;
    if space > EXACT_CAPACITY {
        return Err(Error::Capacity(format!(
            "exact inference over {space:.3e} assignments exceeds the {EXACT_CAPACITY:.0e} cap"
        )));
    }
    let mut best: Option<(usize, Vec<usize>, f64)> = None;
    for y in 0..2 {
        let mut h = vec![0usize; t_count];
        loop {
            let s = score_direct(model, x, &LatentAssignment::new(h.clone()), y)?;
            if best.as_ref().is_none_or(|(_, _, bs)| s > *bs) {
                best = Some((y, h.clone(), s));
            }
            if !advance(&mut h, k) {
                break;
            }
        }
    }
    let (y, h, s) = best.unwrap();
    Ok((y, LatentAssignment::new(h), s))
}

/// Greedy inference with a unit bonus on the label differing from the
/// ground truth, implementing the 0-1 loss: the returned score includes
/// the bonus. The state optimization is unchanged since the bonus is
/// constant per label.
pub fn infer_loss_augmented(
    model: &ActionModel,
    x: &ExampleMeasurements,
    y_gt: usize,
) -> Result<(usize, LatentAssignment, f64)> {
    super::check_label(y_gt)?;
    check_dims(model, x)?;
    let (h0, s0) = greedy_fixed_label(model, x, 0, None);
    let (h1, s1) = greedy_fixed_label(model, x, 1, None);
    let a0 = s0 + if y_gt == 0 { 0.0 } else { 1.0 };
    let a1 = s1 + if y_gt == 1 { 0.0 } else { 1.0 };
    Ok(if a1 > a0 { (1, h1, a1) } else { (0, h0, a0) })
}

fn check_dims(model: &ActionModel, x: &ExampleMeasurements) -> Result<()> {
    if x.states() != model.k {
        return Err(Error::Shape(format!(
            "measurements carry {} states, model has {}",
            x.states(),
            model.k
        )));
    }
    Ok(())
}

/// Coordinate ascent over states for a fixed label. `start` of None
/// initializes each superpixel independently from its measurement and
/// class terms. Each move never decreases the total score, so the sweep
/// loop terminates.
pub(super) fn greedy_fixed_label(
    model: &ActionModel,
    x: &ExampleMeasurements,
    y: usize,
    start: Option<&LatentAssignment>,
) -> (LatentAssignment, f64) {
    let k = model.k;
    let t_count = x.len();
    // meas[t][j]: measurement term of superpixel t under state j
    let meas: Vec<Vec<f64>> = x
        .iter()
        .map(|x_t| {
            (0..k)
                .map(|j| {
                    model.w_meas[k * j..k * j + k]
                        .iter()
                        .zip(x_t.probs())
                        .map(|(w, p)| w * p)
                        .sum()
                })
                .collect()
        })
        .collect();
    let class = &model.w_class[y * k..y * k + k];

    let mut h: Vec<usize> = match start {
        Some(a) => a.states().to_vec(),
        None => meas
            .iter()
            .map(|row| argmax_lowest((0..k).map(|j| row[j] + class[j])))
            .collect(),
    };
    let mut counts = vec![0usize; k];
    for &s in &h {
        counts[s] += 1;
    }
    let pair = pair_weight(model.normalize_pairs, t_count);

    for _ in 0..MAX_SWEEPS {
        let mut changed = false;
        for t in 0..t_count {
            let cur = h[t];
            counts[cur] -= 1;
            let best = argmax_lowest((0..k).map(|j| {
                let mut v = meas[t][j] + class[j];
                for (s, &c) in counts.iter().enumerate() {
                    if c > 0 {
                        v += pair * c as f64 * (model.w_state[k * j + s] + model.w_state[k * s + j]);
                    }
                }
                v
            }));
            counts[best] += 1;
            if best != cur {
                h[t] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let h = LatentAssignment::new(h);
    let score = score_direct(model, x, &h, y).expect("assignment built for this instance");
    (h, score)
}

fn argmax_lowest(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

/// Odometer increment with the last position fastest; false at wrap.
fn advance(h: &mut [usize], k: usize) -> bool {
    for slot in h.iter_mut().rev() {
        *slot += 1;
        if *slot < k {
            return true;
        }
        *slot = 0;
    }
    false
}

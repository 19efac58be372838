//! Synthetic corpora for desk-scale validation: ground-truth states
//! are drawn uniformly, the action label follows a known rule over the
//! states, and measurements are noise-perturbed one-hots on the
//! simplex.

use rand::Rng;

use crate::detector::ScoreVector;
use crate::error::{Error, Result};
use crate::structmodel::{ActionModel, ExampleMeasurements, LatentAssignment};
use crate::util;

/// Deterministic mapping from a ground-truth state multiset to the
/// binary action label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthRule {
    /// Label 1 iff at least one superpixel carries the state.
    ContainsState(usize),
    /// Label 1 iff at least `min` superpixels carry the state.
    MinCountOfState { state: usize, min: usize },
}

impl SynthRule {
    pub fn holds(&self, states: &[usize]) -> bool {
        match *self {
            SynthRule::ContainsState(s) => states.contains(&s),
            SynthRule::MinCountOfState { state, min } => {
                states.iter().filter(|v| **v == state).count() >= min
            }
        }
    }

    /// A rule that can never hold, or always holds, under the given
    /// state count and superpixel range cannot produce both labels.
    fn validate(&self, k: usize, t_range: (usize, usize)) -> Result<()> {
        let state = match *self {
            SynthRule::ContainsState(s) => s,
            SynthRule::MinCountOfState { state, .. } => state,
        };
        if state >= k {
            return Err(Error::Domain(format!(
                "rule refers to state {state}, but there are only {k} states"
            )));
        }
        if let SynthRule::MinCountOfState { min, .. } = *self {
            if min == 0 {
                return Err(Error::Validation(
                    "rule with min = 0 always holds; labels would be constant".into(),
                ));
            }
            if min > t_range.1 {
                return Err(Error::Validation(format!(
                    "rule needs {min} matching superpixels but examples have at most {}",
                    t_range.1
                )));
            }
        }
        Ok(())
    }
}

/// Draws `n` examples. Per superpixel, the evidence state equals the
/// ground truth except with probability `noise`, where it is replaced
/// by a uniformly random wrong state; the emitted measurement puts
/// 1 - noise on the evidence state and noise/(K - 1) elsewhere, staying
/// on the simplex. Returns the examples with labels and the
/// ground-truth assignments.
#[allow(clippy::type_complexity)]
pub fn synth_generate(
    k: usize,
    t_range: (usize, usize),
    n: usize,
    rule: SynthRule,
    noise: f64,
    seed: u64,
) -> Result<(Vec<(ExampleMeasurements, usize)>, Vec<LatentAssignment>)> {
    if k < 2 {
        return Err(Error::Domain(format!("need at least 2 states, got {k}")));
    }
    if n < 4 {
        return Err(Error::Domain(format!("need at least 4 examples, got {n}")));
    }
    if !(0.0..0.5).contains(&noise) {
        return Err(Error::Domain(format!("noise must lie in [0, 0.5), got {noise}")));
    }
    if t_range.0 < 1 || t_range.0 > t_range.1 {
        return Err(Error::Domain(format!(
            "invalid superpixel range {} ..= {}",
            t_range.0, t_range.1
        )));
    }
    rule.validate(k, t_range)?;

    let mut rng = util::rng_from(seed);
    let off = noise / (k - 1) as f64;
    let top = 1.0 - noise;
    let mut data = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for _ in 0..n {
        let t = rng.random_range(t_range.0..=t_range.1);
        let states: Vec<usize> = (0..t).map(|_| rng.random_range(0..k)).collect();
        let y = usize::from(rule.holds(&states));
        let measurements = states
            .iter()
            .map(|&s| {
                let flip = rng.random::<f64>() < noise;
                let evidence = if flip {
                    let wrong = rng.random_range(0..k - 1);
                    if wrong >= s {
                        wrong + 1
                    } else {
                        wrong
                    }
                } else {
                    s
                };
                let mut p = vec![off; k];
                p[evidence] = top;
                ScoreVector::new(p).expect("mixture stays on the simplex")
            })
            .collect();
        data.push((ExampleMeasurements::new(measurements)?, y));
        truth.push(LatentAssignment::new(states));
    }
    Ok((data, truth))
}

/// Hand-built weights that separate a clean corpus generated with
/// `ContainsState(k - 1)`: a diagonal measurement block ties each state
/// to its evidence, and the label-1 class weights reward state k - 1
/// strongly enough (`t_max`) to outweigh a penalty on every other
/// superpixel.
pub fn handcrafted_presence_model(k: usize, t_max: usize) -> ActionModel {
    let alpha = 3.0 * t_max as f64;
    let mut w_meas = vec![0.0; k * k];
    for j in 0..k {
        w_meas[k * j + j] = alpha;
    }
    let mut w_class = vec![0.0; 2 * k];
    for s in 0..k - 1 {
        w_class[k + s] = -1.0;
    }
    w_class[k + k - 1] = t_max as f64;
    ActionModel::with_blocks(k, w_meas, vec![0.0; k * k], w_class, false)
        .expect("blocks sized for k")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structmodel::{infer_exact, init_latent};
    use approx::assert_abs_diff_eq;

    #[test]
    fn labels_match_a_recount_of_the_rule_over_ground_truth() {
        let (data, truth) =
            synth_generate(2, (1, 4), 4, SynthRule::ContainsState(1), 0.1, 11).unwrap();
        assert_eq!(data.len(), 4);
        for ((x, y), h) in data.iter().zip(&truth) {
            assert_eq!(x.len(), h.len());
            assert_eq!(*y, usize::from(h.states().contains(&1)));
        }
        let (data, truth) = synth_generate(
            3,
            (2, 5),
            40,
            SynthRule::MinCountOfState { state: 0, min: 2 },
            0.0,
            12,
        )
        .unwrap();
        for ((_, y), h) in data.iter().zip(&truth) {
            let count = h.states().iter().filter(|s| **s == 0).count();
            assert_eq!(*y, usize::from(count >= 2));
        }
    }

    #[test]
    fn clean_measurements_are_exact_one_hots_of_the_truth() {
        let (data, truth) =
            synth_generate(4, (1, 6), 25, SynthRule::ContainsState(3), 0.0, 13).unwrap();
        for ((x, _), h) in data.iter().zip(&truth) {
            assert_eq!(init_latent(x).states(), h.states());
            for (sv, &s) in x.iter().zip(h.states()) {
                for (i, p) in sv.probs().iter().enumerate() {
                    assert_eq!(*p, if i == s { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn noisy_measurements_stay_on_the_simplex_with_known_levels() {
        let noise = 0.2;
        let k = 5;
        let (data, truth) =
            synth_generate(k, (3, 8), 100, SynthRule::ContainsState(4), noise, 14).unwrap();
        let mut nodes = 0;
        let mut flipped = 0;
        for ((x, _), h) in data.iter().zip(&truth) {
            for (sv, &s) in x.iter().zip(h.states()) {
                nodes += 1;
                let top = sv.probs().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert_abs_diff_eq!(top, 1.0 - noise, epsilon = 1e-12);
                for p in sv.probs() {
                    if (*p - top).abs() > 1e-12 {
                        assert_abs_diff_eq!(*p, noise / (k - 1) as f64, epsilon = 1e-12);
                    }
                }
                flipped += usize::from(sv.argmax() != s);
            }
        }
        // the flip rate concentrates around the noise level
        let rate = flipped as f64 / nodes as f64;
        assert!((0.13..=0.27).contains(&rate), "flip rate {rate}");
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let args = (4, (2, 6), 30, SynthRule::ContainsState(2), 0.1);
        let a = synth_generate(args.0, args.1, args.2, args.3, args.4, 15).unwrap();
        let b = synth_generate(args.0, args.1, args.2, args.3, args.4, 15).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let c = synth_generate(args.0, args.1, args.2, args.3, args.4, 16).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn infeasible_rules_and_bad_parameters_are_rejected() {
        let contains = SynthRule::ContainsState(1);
        assert!(synth_generate(1, (1, 3), 10, contains, 0.0, 0).is_err());
        assert!(synth_generate(3, (1, 3), 3, contains, 0.0, 0).is_err());
        assert!(synth_generate(3, (1, 3), 10, contains, 0.5, 0).is_err());
        assert!(synth_generate(3, (1, 3), 10, contains, -0.1, 0).is_err());
        assert!(synth_generate(3, (3, 2), 10, contains, 0.0, 0).is_err());
        assert!(synth_generate(3, (1, 3), 10, SynthRule::ContainsState(3), 0.0, 0).is_err());
        assert!(matches!(
            synth_generate(
                3,
                (1, 3),
                10,
                SynthRule::MinCountOfState { state: 0, min: 0 },
                0.0,
                0
            ),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            synth_generate(
                3,
                (1, 3),
                10,
                SynthRule::MinCountOfState { state: 0, min: 4 },
                0.0,
                0
            ),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn handcrafted_model_separates_clean_data_exactly() {
        let k = 3;
        let t_max = 5;
        let (data, truth) =
            synth_generate(k, (1, t_max), 30, SynthRule::ContainsState(k - 1), 0.0, 17).unwrap();
        let model = handcrafted_presence_model(k, t_max);
        for ((x, y), h) in data.iter().zip(&truth) {
            let (y_hat, h_hat, _) = infer_exact(&model, x).unwrap();
            assert_eq!(y_hat, *y);
            assert_eq!(h_hat.states(), h.states());
        }
    }
}

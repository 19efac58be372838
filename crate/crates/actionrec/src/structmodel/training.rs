//! Latent-variable max-margin training by alternation: complete the
//! latent states under the current model, then run a stochastic
//! subgradient solve of the convex structural objective with the
//! latents fixed, using loss-augmented inference for the max-violation
//! term.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::util;

use super::features::{joint_feature, score_joint, JointFeatureVector};
use super::inference::{complete_latent, greedy_fixed_label, infer_loss_augmented, init_latent};
use super::{ActionModel, ExampleMeasurements, LatentAssignment};

/// Tolerance for the per-round objective monitor; the objective is
/// expected to be non-increasing across rounds, but both the inner
/// solver and the inference are approximate, so small rises are logged
/// and counted rather than fatal.
pub const RISK_RISE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub seed: u64,
    /// Passes over the data per inner solve.
    pub epochs: usize,
    /// Cap on alternation rounds.
    pub max_rounds: usize,
    /// Divide the state block of the joint features by (T - 1).
    pub normalize_pairs: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { seed: 0, epochs: 50, max_rounds: 10, normalize_pairs: false }
    }
}

/// Per-round diagnostics of a training run.
#[derive(Debug, Clone)]
pub struct TrainingReport {
    /// Inner solves performed.
    pub rounds: usize,
    /// Objective value after each round's solve.
    pub risks: Vec<f64>,
    /// Rounds whose objective rose by more than [`RISK_RISE_TOLERANCE`].
    pub risk_violations: usize,
    /// True when the latent assignments stabilized before the round cap.
    pub converged: bool,
    /// The latent assignments each round's solve was run against.
    pub latents_per_round: Vec<Vec<LatentAssignment>>,
}

/// Alternating training. Round one fixes the latents to the
/// measurement argmax; later rounds recompute them by label-clamped
/// greedy completion started from the previous assignment, and stop
/// early once they no longer change. Returns the averaged model of the
/// final round together with the per-round diagnostics.
pub fn train_lssvm(
    data: &[(ExampleMeasurements, usize)],
    c: f64,
    config: &TrainConfig,
) -> Result<(ActionModel, TrainingReport)> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("regularization C must be positive, got {c}")));
    }
    if config.epochs == 0 || config.max_rounds == 0 {
        return Err(Error::Domain("epochs and max_rounds must be positive".into()));
    }
    let first = data
        .first()
        .ok_or_else(|| Error::DegenerateData("no training examples".into()))?;
    let k = first.0.states();
    let mut seen = [false; 2];
    for (x, y) in data {
        super::check_label(*y)?;
        seen[*y] = true;
        if x.states() != k {
            return Err(Error::Shape(format!(
                "example carries {} states, first example has {k}",
                x.states()
            )));
        }
    }
    if !(seen[0] && seen[1]) {
        return Err(Error::DegenerateData(
            "training needs examples of both action labels".into(),
        ));
    }

    let n = data.len();
    let lambda = 1.0 / (c * n as f64);
    let mut latents: Vec<LatentAssignment> = data.iter().map(|(x, _)| init_latent(x)).collect();
    let mut raw = ActionModel::zeros_with(k, config.normalize_pairs);
    let mut averaged = raw.clone();
    let mut rng = util::rng_from(config.seed);
    let mut step = 0usize;
    let mut report = TrainingReport {
        rounds: 0,
        risks: Vec::new(),
        risk_violations: 0,
        converged: false,
        latents_per_round: Vec::new(),
    };

    for round in 0..config.max_rounds {
        if round > 0 {
            let completed: Vec<LatentAssignment> = data
                .iter()
                .zip(&latents)
                .map(|((x, y), h)| Ok(complete_latent(&averaged, x, *y, h)?.0))
                .collect::<Result<_>>()?;
            if completed == latents {
                report.converged = true;
                break;
            }
            latents = completed;
        }
        report.latents_per_round.push(latents.clone());

        let psis: Vec<JointFeatureVector> = data
            .iter()
            .zip(&latents)
            .map(|((x, y), h)| joint_feature(x, h, *y, config.normalize_pairs))
            .collect::<Result<_>>()?;
        averaged = inner_solve(&mut raw, data, &psis, lambda, config.epochs, &mut rng, &mut step)?;
        report.rounds = round + 1;

        let risk = regularized_risk(&averaged, data, c)?;
        if let Some(prev) = report.risks.last() {
            if risk > prev + RISK_RISE_TOLERANCE {
                report.risk_violations += 1;
                log::warn!(
                    "objective rose from {prev:.6} to {risk:.6} in round {}",
                    round + 1
                );
            }
        }
        report.risks.push(risk);
    }

    averaged.metadata = format!(
        "C={c};seed={};epochs={};max_rounds={};normalize_pairs={};K={k};N={n}",
        config.seed, config.epochs, config.max_rounds, config.normalize_pairs
    );
    Ok((averaged, report))
}

/// One subgradient pass over `epochs` shuffled epochs. The step count
/// and the raw iterate persist across rounds, so later rounds refine
/// with an already-decayed schedule instead of being thrown back to a
/// cold start. Returns the average of the raw iterates of this round.
fn inner_solve(
    raw: &mut ActionModel,
    data: &[(ExampleMeasurements, usize)],
    psis: &[JointFeatureVector],
    lambda: f64,
    epochs: usize,
    rng: &mut impl rand::Rng,
    step: &mut usize,
) -> Result<ActionModel> {
    let n = data.len();
    let mut sum = ActionModel::zeros_with(raw.k, raw.normalize_pairs);
    let mut order: Vec<usize> = (0..n).collect();
    let mut round_steps = 0usize;
    for _ in 0..epochs {
        order.shuffle(rng);
        for &i in &order {
            *step += 1;
            round_steps += 1;
            let eta = 1.0 / (lambda * *step as f64);
            let (x, y) = &data[i];
            let (y_hat, h_hat, aug) = infer_loss_augmented(raw, x, *y)?;
            let gt = score_joint(raw, &psis[i])?;
            let violated = aug > gt;
            let shrink = 1.0 - 1.0 / *step as f64;
            raw.scale_in_place(shrink);
            if violated {
                let psi_hat = joint_feature(x, &h_hat, y_hat, raw.normalize_pairs)?;
                raw.add_scaled(&psis[i], eta);
                raw.add_scaled(&psi_hat, -eta);
            }
            sum.accumulate(raw);
        }
    }
    let mut avg = sum;
    avg.scale_in_place(1.0 / round_steps as f64);
    Ok(avg)
}

/// The learning objective: ½‖w‖² plus C times the per-example hinge
/// between the loss-augmented maximum and the score at the label's own
/// best (greedily completed) latent assignment.
pub fn regularized_risk(
    model: &ActionModel,
    data: &[(ExampleMeasurements, usize)],
    c: f64,
) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("regularization C must be positive, got {c}")));
    }
    let mut risk = 0.5 * model.flat().iter().map(|w| w * w).sum::<f64>();
    for (x, y) in data {
        super::check_label(*y)?;
        if x.states() != model.k {
            return Err(Error::Shape(format!(
                "example carries {} states, model has {}",
                x.states(),
                model.k
            )));
        }
        let (_, gt_score) = greedy_fixed_label(model, x, *y, None);
        let (_, _, aug) = infer_loss_augmented(model, x, *y)?;
        risk += c * (aug - gt_score).max(0.0);
    }
    Ok(risk)
}

//! Reconstruction-error autoencoder and its fairness-regularized variant.
//!
//! Training is transductive (scores come from the same rows the model fits),
//! full-batch, and driven by adaptive-moment gradient descent with
//! bias-corrected moments (decay 0.9/0.999, eps 1e-8). The regularized
//! variant adds a statistical-parity term and a per-group rank-fidelity term
//! against a frozen base model; at zero regularizer weights it reduces to the
//! plain autoencoder bit for bit under a shared seed.

mod fairness;
mod net;

pub use fairness::{ParityContext, RankFidelityContext};
pub use net::{encoder_widths, Adam, Layer, Mlp};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroupLabel};
use crate::error::{Error, Result};
use crate::metrics::{Grouping, ScoreVector};

/// Autoencoder hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeepHP {
    pub num_layers: usize,
    pub input_decay: f64,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
}

impl DeepHP {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::Config("num_layers must be at least 1".into()));
        }
        if !(self.input_decay >= 1.0) {
            return Err(Error::Config(format!(
                "input_decay must be at least 1; got {}",
                self.input_decay
            )));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Regularized-autoencoder hyperparameters: a base config plus the two
/// trade-off weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairHP {
    #[serde(flatten)]
    pub base: DeepHP,
    pub alpha: f64,
    pub gamma: f64,
}

impl FairHP {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.alpha < 0.0 || self.gamma < 0.0 {
            return Err(Error::Config("alpha and gamma must be non-negative".into()));
        }
        Ok(())
    }
}

/// A trained autoencoder with its per-epoch objective trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeModel {
    pub hp: DeepHP,
    pub net: Mlp,
    /// Objective value at the start of each epoch.
    pub trace: Vec<f64>,
}

/// Assembled fairness terms for one dataset (or one minibatch of it).
pub struct FairTerms {
    pub alpha: f64,
    pub gamma: f64,
    /// Absent when the rows at hand contain a single group; the parity term
    /// then contributes nothing for those rows.
    parity: Option<ParityContext>,
    fidelity: Option<RankFidelityContext>,
    indicator: Vec<f64>,
    base_scores: Option<Vec<f64>>,
}

impl FairTerms {
    /// Builds the parity context from the chosen group column and, when
    /// `gamma > 0`, the rank-fidelity context from frozen base scores.
    pub fn new(
        ds: &Dataset,
        grouping: Grouping,
        alpha: f64,
        gamma: f64,
        base_scores: Option<&[f64]>,
    ) -> Result<FairTerms> {
        let column = match grouping {
            Grouping::Reported => &ds.group,
            Grouping::True => &ds.true_group,
        };
        let indicator: Vec<f64> =
            column.iter().map(|&g| if g == GroupLabel::B { 1.0 } else { 0.0 }).collect();
        let parity = Some(ParityContext::new(&indicator).ok_or_else(|| {
            Error::Dataset("statistical-parity term needs both groups present".into())
        })?);
        let base_scores = if gamma > 0.0 {
            let base = base_scores.ok_or_else(|| {
                Error::Config("rank-fidelity term needs frozen base scores".into())
            })?;
            if base.len() != ds.n_rows() {
                return Err(Error::Dataset("base scores do not align with dataset".into()));
            }
            Some(base.to_vec())
        } else {
            None
        };
        let fidelity = base_scores.as_ref().map(|base| {
            let groups = indicator_groups(&indicator);
            RankFidelityContext::new(groups, base)
        });
        Ok(FairTerms { alpha, gamma, parity, fidelity, indicator, base_scores })
    }

    /// Batch-local view: the terms are re-derived over the selected rows so a
    /// stochastic step optimizes the same objective in expectation.
    pub fn restrict(&self, rows: &[usize]) -> FairTerms {
        let indicator: Vec<f64> = rows.iter().map(|&r| self.indicator[r]).collect();
        let parity = ParityContext::new(&indicator);
        let base_scores: Option<Vec<f64>> =
            self.base_scores.as_ref().map(|b| rows.iter().map(|&r| b[r]).collect());
        let fidelity = base_scores.as_ref().map(|base| {
            let groups = indicator_groups(&indicator);
            RankFidelityContext::new(groups, base)
        });
        FairTerms { alpha: self.alpha, gamma: self.gamma, parity, fidelity, indicator, base_scores }
    }
}

fn indicator_groups(indicator: &[f64]) -> Vec<Vec<usize>> {
    vec![
        (0..indicator.len()).filter(|&i| indicator[i] == 0.0).collect(),
        (0..indicator.len()).filter(|&i| indicator[i] == 1.0).collect(),
    ]
}

/// Objective evaluation; gradients land in `grads` when present.
///
/// The objective is mean squared reconstruction error, plus half the weight
/// decay times the squared weight norm, plus the weighted fairness terms.
fn objective(
    net: &Mlp,
    x: &[f64],
    n: usize,
    d: usize,
    masks: Option<&[Vec<f64>]>,
    weight_decay: f64,
    fair: Option<&FairTerms>,
    pair_buf: &mut Vec<f64>,
    want_grads: bool,
) -> (f64, Option<Vec<Layer>>) {
    let outputs = net.forward(x, n, masks);
    let recon = outputs.last().expect("at least one layer");
    let mut errors = vec![0.0; n * d];
    let mut row_scores = vec![0.0; n];
    for r in 0..n {
        let mut s = 0.0;
        for c in 0..d {
            let e = recon[r * d + c] - x[r * d + c];
            errors[r * d + c] = e;
            s += e * e;
        }
        row_scores[r] = s;
    }
    let nd = (n * d) as f64;
    let mut loss = row_scores.iter().sum::<f64>() / nd;
    loss += 0.5 * weight_decay * net.weight_sq_sum();

    // Per-row weight on d(loss)/d(score_r); reconstruction contributes 1/(n d).
    let mut row_weight = vec![1.0 / nd; n];
    if let Some(fair) = fair {
        let mut score_grad = vec![0.0; n];
        if fair.alpha > 0.0 {
            if let Some(parity) = &fair.parity {
                let mut sp_grad = vec![0.0; n];
                let sp = parity.value_and_grad(&row_scores, &mut sp_grad);
                loss += fair.alpha * sp;
                for (g, sg) in score_grad.iter_mut().zip(&sp_grad) {
                    *g += fair.alpha * sg;
                }
            }
        }
        if let Some(fidelity) = &fair.fidelity {
            let mut gf_grad = vec![0.0; n];
            let gf = fidelity.value_and_grad(&row_scores, &mut gf_grad, pair_buf);
            loss += fair.gamma * gf;
            for (g, fg) in score_grad.iter_mut().zip(&gf_grad) {
                *g += fair.gamma * fg;
            }
        }
        for (w, g) in row_weight.iter_mut().zip(&score_grad) {
            *w += g;
        }
    }

    if !want_grads {
        return (loss, None);
    }
    let mut delta = errors;
    for r in 0..n {
        let w = 2.0 * row_weight[r];
        for c in 0..d {
            delta[r * d + c] *= w;
        }
    }
    let grads = net.backward(x, n, &outputs, masks, delta, weight_decay);
    (loss, Some(grads))
}

/// Loss of the full objective at the given parameters (no dropout).
pub fn full_objective(
    net: &Mlp,
    ds: &Dataset,
    weight_decay: f64,
    fair: Option<&FairTerms>,
) -> f64 {
    let mut buf = Vec::new();
    objective(
        net,
        ds.features(),
        ds.n_rows(),
        ds.n_cols(),
        None,
        weight_decay,
        fair,
        &mut buf,
        false,
    )
    .0
}

/// Loss and flat analytic gradient of the full objective (no dropout).
pub fn objective_with_grad(
    net: &Mlp,
    ds: &Dataset,
    weight_decay: f64,
    fair: Option<&FairTerms>,
) -> (f64, Vec<f64>) {
    let mut buf = Vec::new();
    let (loss, grads) = objective(
        net,
        ds.features(),
        ds.n_rows(),
        ds.n_cols(),
        None,
        weight_decay,
        fair,
        &mut buf,
        true,
    );
    let grads = grads.expect("gradients requested");
    let mut flat = Vec::new();
    for l in &grads {
        flat.extend_from_slice(&l.w);
        flat.extend_from_slice(&l.b);
    }
    (loss, flat)
}

/// Rows per optimizer step. The epoch budget assumes minibatch progress;
/// batch composition is drawn from the training seed, so runs stay
/// reproducible.
pub const BATCH_SIZE: usize = 64;

fn train(ds: &Dataset, hp: &DeepHP, seed: u64, fair: Option<FairTerms>) -> Result<AeModel> {
    hp.validate()?;
    let n = ds.n_rows();
    let d = ds.n_cols();
    if n == 0 {
        return Err(Error::Dataset("cannot train on an empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Mlp::init(d, hp.num_layers, hp.input_decay, &mut rng);
    let mut adam = Adam::new(net.param_count(), hp.lr);
    let mut params = net.to_flat();
    let mut trace = Vec::with_capacity(hp.epochs);
    let mut pair_buf = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch = vec![0.0; BATCH_SIZE.min(n) * d];
    for epoch in 0..hp.epochs {
        for i in (1..n).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut epoch_loss = 0.0;
        for rows in order.chunks(BATCH_SIZE) {
            batch.clear();
            for &r in rows {
                batch.extend_from_slice(ds.row(r));
            }
            let masks =
                (hp.dropout > 0.0).then(|| net.sample_masks(rows.len(), hp.dropout, &mut rng));
            let fair_batch = fair.as_ref().map(|f| f.restrict(rows));
            let (loss, grads) = objective(
                &net,
                &batch,
                rows.len(),
                d,
                masks.as_deref(),
                hp.weight_decay,
                fair_batch.as_ref(),
                &mut pair_buf,
                true,
            );
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch, loss });
            }
            epoch_loss += loss * rows.len() as f64;
            let grads = grads.expect("gradients requested");
            let mut flat_grads = Vec::with_capacity(params.len());
            for l in &grads {
                flat_grads.extend_from_slice(&l.w);
                flat_grads.extend_from_slice(&l.b);
            }
            adam.step(&mut params, &flat_grads);
            net.from_flat(&params);
        }
        trace.push(epoch_loss / n as f64);
    }
    Ok(AeModel { hp: *hp, net, trace })
}

/// Trains the plain reconstruction autoencoder.
pub fn ae_train(ds: &Dataset, hp: &DeepHP, seed: u64) -> Result<AeModel> {
    train(ds, hp, seed, None)
}

/// Per-row squared reconstruction error with dropout disabled.
pub fn ae_score(model: &AeModel, ds: &Dataset) -> Result<ScoreVector> {
    let d = ds.n_cols();
    if model.net.layers[0].in_dim != d {
        return Err(Error::Dataset(format!(
            "model expects {} columns, dataset has {d}",
            model.net.layers[0].in_dim
        )));
    }
    let n = ds.n_rows();
    let outputs = model.net.forward(ds.features(), n, None);
    let recon = outputs.last().expect("at least one layer");
    let scores: Vec<f64> = (0..n)
        .map(|r| {
            (0..d)
                .map(|c| {
                    let e = recon[r * d + c] - ds.value(r, c);
                    e * e
                })
                .sum()
        })
        .collect();
    ScoreVector::new(scores, n)
}

/// Trains the fairness-regularized autoencoder on the reported group labels.
pub fn fairod_train(ds: &Dataset, hp: &FairHP, seed: u64) -> Result<AeModel> {
    fairod_train_grouped(ds, hp, seed, Grouping::Reported)
}

/// Trains the fairness-regularized autoencoder with an explicit choice of
/// group column.
///
/// When the rank-fidelity weight is positive, a base model is first trained
/// with the same seed and its scores frozen as the ranking target; the main
/// loop then re-seeds, so a zero-weight run consumes exactly the plain
/// autoencoder's random stream.
pub fn fairod_train_grouped(
    ds: &Dataset,
    hp: &FairHP,
    seed: u64,
    grouping: Grouping,
) -> Result<AeModel> {
    hp.validate()?;
    let base_scores = if hp.gamma > 0.0 {
        let base = ae_train(ds, &hp.base, seed)?;
        Some(ae_score(&base, ds)?.into_vec())
    } else {
        None
    };
    let fair = FairTerms::new(ds, grouping, hp.alpha, hp.gamma, base_scores.as_deref())?;
    train(ds, &hp.base, seed, Some(fair))
}

//! Regularization, the optimizer, the gradient checker and the minibatch
//! training loop.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::model::{self, DropoutSpec, EmbeddingUpdate, Encoded, Model, ModelParams};
use crate::params::{ParamKind, Parameters};
use crate::tensor::{seeded_rng, Vector};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout_p: f64,
    /// Apply dropout to word embeddings entering the cell.
    pub dropout_embeddings: bool,
    /// Apply dropout to the representation entering the classifier.
    pub dropout_representation: bool,
    pub l2_coeff: f64,
    pub embedding_dim: usize,
    /// Defaults to `embedding_dim`.
    pub hidden_dim: Option<usize>,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub dev_fraction: f64,
    pub init_low: f64,
    pub init_high: f64,
    pub fine_tune_embeddings: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 16,
            dropout_p: 0.5,
            dropout_embeddings: true,
            dropout_representation: true,
            l2_coeff: 0.01,
            embedding_dim: 300,
            hidden_dim: None,
            max_epochs: 50,
            early_stop_patience: 5,
            seed: 1,
            dev_fraction: 0.2,
            init_low: -0.1,
            init_high: 0.1,
            fine_tune_embeddings: true,
        }
    }
}

impl TrainConfig {
    pub fn hidden(&self) -> usize {
        self.hidden_dim.unwrap_or(self.embedding_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::config("dropout_p must lie in [0, 1)"));
        }
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 1.0) {
            return Err(Error::config("dev_fraction must lie in (0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if !(self.l2_coeff >= 0.0) {
            return Err(Error::config("l2_coeff must be non-negative"));
        }
        if !(self.init_low < self.init_high) {
            return Err(Error::config("init_low must be below init_high"));
        }
        Ok(())
    }

    pub fn dropout_spec(&self) -> DropoutSpec {
        DropoutSpec {
            p: self.dropout_p,
            embeddings: self.dropout_embeddings,
            representation: self.dropout_representation,
        }
    }

    fn embedding_update(&self) -> EmbeddingUpdate {
        if self.fine_tune_embeddings {
            EmbeddingUpdate::FineTune
        } else {
            EmbeddingUpdate::Frozen
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Eval,
}

/// Inverted dropout. In training mode each entry is zeroed with probability
/// `p` and survivors are scaled by `1 / (1 - p)`. The returned mask holds
/// the per-entry multiplier for the backward pass.
pub fn dropout<R: Rng + ?Sized>(
    v: &Vector,
    p: f64,
    mode: DropoutMode,
    rng: &mut R,
) -> Result<(Vector, Vector)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::arg(format!("dropout probability must lie in [0, 1), got {p}")));
    }
    if mode == DropoutMode::Eval || p == 0.0 {
        return Ok((v.clone(), Vector::filled(v.dim(), 1.0)));
    }
    let keep = 1.0 / (1.0 - p);
    let mask = Vector::from_vec(
        (0..v.dim())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect(),
    );
    Ok((v.zip_map(&mask, |x, m| x * m), mask))
}

/// `coeff * Σ ‖W‖²_F` over weight matrices (biases and embeddings
/// excluded), and the matching gradient `2 * coeff * W`.
pub fn l2_penalty<P: Parameters + Clone>(params: &P, coeff: f64) -> (f64, P) {
    let mut grad = params.zeros_like();
    add_l2_gradient(params, coeff, &mut grad);
    (l2_value(params, coeff), grad)
}

pub fn l2_value<P: Parameters>(params: &P, coeff: f64) -> f64 {
    if coeff == 0.0 {
        return 0.0;
    }
    let sum_sq: f64 = params
        .tensors()
        .iter()
        .filter(|t| t.kind == ParamKind::Weight)
        .map(|t| t.data.iter().map(|x| x * x).sum::<f64>())
        .sum();
    coeff * sum_sq
}

pub fn add_l2_gradient<P: Parameters>(params: &P, coeff: f64, grads: &mut P) {
    if coeff == 0.0 {
        return;
    }
    for (t, g) in params.tensors().into_iter().zip(grads.tensors_mut()) {
        if t.kind == ParamKind::Weight {
            crate::tensor::axpy(2.0 * coeff, t.data, g.data);
        }
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<P: Parameters>(params: &P) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.data.len()]).collect();
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

pub fn adam_step<P: Parameters>(params: &mut P, grads: &P, state: &mut AdamState, lr: f64) -> Result<()> {
    let gs = grads.tensors();
    let ps = params.tensors_mut();
    if ps.len() != gs.len() || ps.len() != state.m.len() {
        return Err(Error::arg(format!(
            "{} parameter tensors, {} gradient tensors, {} optimizer slots",
            ps.len(),
            gs.len(),
            state.m.len()
        )));
    }
    for ((p, g), m) in ps.iter().zip(&gs).zip(&state.m) {
        if p.data.len() != g.data.len() || p.data.len() != m.len() {
            return Err(Error::arg(format!(
                "{}: parameter has {} entries, gradient {}, optimizer slot {}",
                p.name,
                p.data.len(),
                g.data.len(),
                m.len()
            )));
        }
    }
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for ((p, g), (m, v)) in ps.into_iter().zip(&gs).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        for k in 0..p.data.len() {
            let gk = g.data[k];
            m[k] = b1 * m[k] + (1.0 - b1) * gk;
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            p.data[k] -= lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name, flat index, analytic and numeric value at the worst
    /// coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
    pub checked: usize,
    pub skipped: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "max relative error {:.3e} over {} coordinates ({} below magnitude floor)",
            self.max_rel_error, self.checked, self.skipped
        )?;
        if let Some((name, idx, a, n)) = &self.worst {
            write!(f, "; worst at {name}[{idx}]: analytic {a:.6e}, numeric {n:.6e}")?;
        }
        Ok(())
    }
}

/// Coordinates where both the analytic and the numeric gradient are below
/// this magnitude are not scored.
pub const GRAD_CHECK_FLOOR: f64 = 1e-8;

/// Compares `analytic` with central differences `(L(θ+ε) - L(θ-ε)) / 2ε`
/// for every coordinate of `params`. Relative error is
/// `|a - n| / max(|a|, |n|)`.
pub fn grad_check<P, F>(params: &mut P, analytic: &P, eps: f64, mut loss: F) -> Result<GradCheckReport>
where
    P: Parameters,
    F: FnMut(&P) -> Result<f64>,
{
    if !(eps > 0.0) {
        return Err(Error::arg("finite-difference step must be positive"));
    }
    let layout: Vec<(String, usize)> = params.tensors().iter().map(|t| (t.name.clone(), t.data.len())).collect();
    let analytic: Vec<Vec<f64>> = analytic.tensors().iter().map(|t| t.data.to_vec()).collect();
    if analytic.len() != layout.len() || analytic.iter().zip(&layout).any(|(a, (_, n))| a.len() != *n) {
        return Err(Error::arg("analytic gradient layout differs from the parameters"));
    }

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        skipped: 0,
    };
    for (ti, (name, len)) in layout.iter().enumerate() {
        for k in 0..*len {
            let orig = set_coord(params, ti, k, None);
            set_coord(params, ti, k, Some(orig + eps));
            let plus = loss(params)?;
            set_coord(params, ti, k, Some(orig - eps));
            let minus = loss(params)?;
            set_coord(params, ti, k, Some(orig));

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[ti][k];
            let scale = a.abs().max(numeric.abs());
            if scale <= GRAD_CHECK_FLOOR {
                report.skipped += 1;
                continue;
            }
            report.checked += 1;
            let rel = (a - numeric).abs() / scale;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some((name.clone(), k, a, numeric));
            }
        }
    }
    Ok(report)
}

fn set_coord<P: Parameters>(params: &mut P, tensor: usize, index: usize, value: Option<f64>) -> f64 {
    let mut ts = params.tensors_mut();
    let slot = &mut ts[tensor].data[index];
    let old = *slot;
    if let Some(v) = value {
        *slot = v;
    }
    old
}

/// Gradient check of the full pipeline loss (mean cross-entropy plus L2)
/// on `batch`, with dropout off. The differenced objective is the loss
/// minus the constant `ln K` (see [`model::batch_excess_loss`]): an O(1)
/// loss carries about 1e-16 absolute roundoff, which at a step of 1e-5 is
/// 1e-11 of noise in every numeric derivative, enough to swamp gradients
/// near 1e-8.
pub fn grad_check_model(model: &mut Model, batch: &[Encoded], l2: f64, eps: f64) -> Result<GradCheckReport> {
    grad_check_model_with(model, batch, l2, eps, |_| {})
}

/// Like [`grad_check_model`], letting the caller tamper with the analytic
/// gradient before comparison.
pub fn grad_check_model_with(
    model: &mut Model,
    batch: &[Encoded],
    l2: f64,
    eps: f64,
    tamper: impl FnOnce(&mut ModelParams),
) -> Result<GradCheckReport> {
    if batch.is_empty() {
        return Err(Error::arg("gradient check needs at least one instance"));
    }
    let spec = model.spec;
    let mut analytic = model::batch_gradient(&spec, &model.params, batch, l2)?;
    tamper(&mut analytic);
    grad_check(&mut model.params, &analytic, eps, |p| model::batch_excess_loss(&spec, p, batch, l2))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_acc: f64,
    pub dev_macro_f1: f64,
}

impl EpochLog {
    /// `epoch \t train_loss \t dev_acc \t dev_macro_f1`
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.6}\t{:.6}",
            self.epoch, self.train_loss, self.dev_acc, self.dev_macro_f1
        )
    }
}

pub fn format_log(log: &[EpochLog]) -> String {
    log.iter().map(|e| e.to_line() + "\n").collect()
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// The checkpoint with the best dev macro-F1.
    pub model: Model,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub dev_report: EvalReport,
}

pub fn evaluate(model: &Model, data: &[Encoded]) -> Result<EvalReport> {
    let preds = data.iter().map(|x| model.predict(x)).collect::<Result<Vec<_>>>()?;
    let golds: Vec<usize> = data.iter().map(|x| x.label).collect();
    EvalReport::new(&preds, &golds)
}

/// Minibatch Adam on mean cross-entropy plus L2, one seeded shuffle per
/// epoch, model selection on dev macro-F1, early stopping after
/// `early_stop_patience` epochs without improvement.
pub fn train(config: &TrainConfig, mut model: Model, train_set: &[Encoded], dev_set: &[Encoded]) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() || dev_set.is_empty() {
        return Err(Error::arg("training and dev sets must be nonempty"));
    }
    let spec = model.spec;
    let dspec = config.dropout_spec();
    let update = config.embedding_update();
    let mut shuffle_rng = seeded_rng(config.seed);
    let mut dropout_rng = seeded_rng(config.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut adam = AdamState::new(&model.params);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut log = Vec::new();
    let mut best: Option<(usize, Model, EvalReport)> = None;
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut n_batches = 0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut grads = model.params.zeros_like();
            let scale = 1.0 / chunk.len() as f64;
            let mut ce = 0.0;
            for &i in chunk {
                let x = &train_set[i];
                let cache = model::forward(&spec, &model.params, x, Some((&dspec, &mut dropout_rng)))?;
                ce += model::cross_entropy(&cache.probs, x.label)?;
                model::backward(&spec, &model.params, x, &cache, scale, update, &mut grads)?;
            }
            let penalty = l2_value(&model.params, config.l2_coeff);
            let loss = ce * scale + penalty;
            if !loss.is_finite() || !grads.max_abs().is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: b,
                    detail: format!("loss {loss} (cross-entropy {}, L2 {penalty})", ce * scale),
                });
            }
            add_l2_gradient(&model.params, config.l2_coeff, &mut grads);
            adam_step(&mut model.params, &grads, &mut adam, config.learning_rate)?;
            epoch_loss += loss;
            n_batches += 1;
        }

        let report = evaluate(&model, dev_set)?;
        log.push(EpochLog {
            epoch,
            train_loss: epoch_loss / n_batches as f64,
            dev_acc: report.accuracy,
            dev_macro_f1: report.macro_f1,
        });
        let improved = best.as_ref().is_none_or(|(_, _, r)| report.macro_f1 > r.macro_f1);
        if improved {
            best = Some((epoch, model.clone(), report));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.early_stop_patience {
                break;
            }
        }
    }

    let (best_epoch, model, dev_report) = best.ok_or_else(|| Error::config("max_epochs must be at least 1"))?;
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
        dev_report,
    })
}

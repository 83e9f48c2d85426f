//! The full classifier: word embeddings, aspect vector, recurrent cell,
//! head and softmax layer, with forward and backward passes over a single
//! instance.

use rand::Rng;

use crate::cell::{CellKind, CellParams, Unrolled};
use crate::data::{aspect_vector_from_rows, Aspect, EmbeddingTable, LabeledInstance, Task, Vocabulary};
use crate::error::{Error, Result};
use crate::head::{ClassifierParams, HeadCache, HeadKind, HeadParams, NUM_CLASSES};
use crate::params::{AsTensor, ParamKind, Parameters, Tensor, TensorMut};
use crate::tensor::{seeded_rng, softmax, Matrix, SeededRng, Vector};
use crate::train::{dropout, DropoutMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelSpec {
    pub task: Task,
    pub cell: CellKind,
    pub head: HeadKind,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
}

impl ModelSpec {
    /// Whether the forward pass consumes the aspect vector at all.
    pub fn uses_aspect(&self) -> bool {
        self.cell == CellKind::AspectAware || self.head == HeadKind::Attention
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::config("embedding and hidden dimensions must be positive"));
        }
        // A term aspect is a mean of word embeddings, so it lives in the
        // embedding space; the cell and head need it in the hidden space.
        if self.task == Task::Atsa && self.uses_aspect() && self.embedding_dim != self.hidden_dim {
            return Err(Error::config(format!(
                "term aspects have the embedding dimension ({}) but the model needs the hidden dimension ({})",
                self.embedding_dim, self.hidden_dim
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// `|V| x dx`
    pub words: Matrix,
    /// `categories x da`, category tasks only.
    pub aspects: Option<Matrix>,
    pub cell: CellParams,
    pub head: HeadParams,
    pub classifier: ClassifierParams,
}

impl Parameters for ModelParams {
    fn tensors(&self) -> Vec<Tensor<'_>> {
        let mut out = vec![self.words.tensor("embedding.words", ParamKind::Embedding)];
        if let Some(a) = &self.aspects {
            out.push(a.tensor("embedding.aspects", ParamKind::Embedding));
        }
        out.extend(self.cell.tensors());
        out.extend(self.head.tensors());
        out.extend(crate::params::prefixed("classifier", self.classifier.tensors()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = vec![self.words.tensor_mut("embedding.words", ParamKind::Embedding)];
        if let Some(a) = &mut self.aspects {
            out.push(a.tensor_mut("embedding.aspects", ParamKind::Embedding));
        }
        out.extend(self.cell.tensors_mut());
        out.extend(self.head.tensors_mut());
        out.extend(crate::params::prefixed_mut("classifier", self.classifier.tensors_mut()));
        out
    }
}

/// An instance with tokens mapped to vocabulary rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoded {
    pub ids: Vec<usize>,
    pub aspect: Aspect,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub vocab: Vocabulary,
    pub params: ModelParams,
}

/// Where dropout is applied during training.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropoutSpec {
    pub p: f64,
    pub embeddings: bool,
    pub representation: bool,
}

impl DropoutSpec {
    pub const OFF: DropoutSpec = DropoutSpec {
        p: 0.0,
        embeddings: false,
        representation: false,
    };
}

/// What to do about gradients flowing into the word embedding table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingUpdate {
    FineTune,
    Frozen,
}

impl Model {
    /// Builds a model around pretrained (or random) word embeddings.
    /// Weights are drawn from `U[lo, hi)`, biases start at zero, and
    /// category embeddings (category tasks) are drawn from `U[lo, hi)`.
    pub fn new(spec: ModelSpec, embeddings: EmbeddingTable, lo: f64, hi: f64, seed: u64) -> Result<Self> {
        spec.validate()?;
        if embeddings.dim() != spec.embedding_dim {
            return Err(Error::config(format!(
                "embedding table has dimension {} but the model expects {}",
                embeddings.dim(),
                spec.embedding_dim
            )));
        }
        let mut rng = seeded_rng(seed);
        let params = init_params(&spec, embeddings.matrix, lo, hi, &mut rng)?;
        Ok(Model {
            spec,
            vocab: embeddings.vocab,
            params,
        })
    }

    pub fn encode(&self, inst: &LabeledInstance) -> Result<Encoded> {
        if inst.aspect.task() != self.spec.task {
            return Err(Error::config(format!(
                "instance is a {} instance but the model was built for {}",
                inst.aspect.task().as_str(),
                self.spec.task.as_str()
            )));
        }
        inst.validate()?;
        Ok(Encoded {
            ids: inst.tokens.iter().map(|t| self.vocab.id(t)).collect(),
            aspect: inst.aspect,
            label: inst.polarity.index(),
        })
    }

    pub fn encode_all(&self, insts: &[LabeledInstance]) -> Result<Vec<Encoded>> {
        insts.iter().map(|i| self.encode(i)).collect()
    }

    pub fn predict_proba(&self, x: &Encoded) -> Result<Vector> {
        Ok(forward::<SeededRng>(&self.spec, &self.params, x, None)?.probs)
    }

    pub fn predict(&self, x: &Encoded) -> Result<usize> {
        Ok(self.predict_proba(x)?.argmax())
    }
}

pub(crate) fn init_params<R: Rng + ?Sized>(
    spec: &ModelSpec,
    words: Matrix,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<ModelParams> {
    let (dx, dc) = (spec.embedding_dim, spec.hidden_dim);
    let cell = CellParams::init(spec.cell, dx, dc, lo, hi, rng)?;
    let head = HeadParams::init(spec.head, dc, dc, lo, hi, rng)?;
    let classifier = ClassifierParams::init(dc, lo, hi, rng)?;
    let aspects = match spec.task {
        Task::Acsa => Some(Matrix::uniform(crate::data::CATEGORIES.len(), dc, lo, hi, rng)?),
        Task::Atsa => None,
    };
    Ok(ModelParams {
        words,
        aspects,
        cell,
        head,
        classifier,
    })
}

pub struct ForwardCache {
    pub aspect: Option<Vector>,
    pub embedding_masks: Option<Vec<Vector>>,
    pub unrolled: Unrolled,
    pub head: HeadCache,
    pub repr: Vector,
    pub repr_mask: Option<Vector>,
    pub probs: Vector,
}

/// Forward pass. `dropout` carries the placement and the generator in
/// training mode; `None` is evaluation mode.
pub fn forward<R: Rng + ?Sized>(
    spec: &ModelSpec,
    params: &ModelParams,
    x: &Encoded,
    dropout_cfg: Option<(&DropoutSpec, &mut R)>,
) -> Result<ForwardCache> {
    if x.ids.is_empty() {
        return Err(Error::arg("empty token sequence"));
    }
    if let Some(&bad) = x.ids.iter().find(|&&id| id >= params.words.rows()) {
        return Err(Error::arg(format!("token id {bad} outside the embedding table")));
    }
    let aspect = if spec.uses_aspect() {
        Some(aspect_vector_from_rows(
            &params.words,
            &x.ids,
            x.aspect,
            params.aspects.as_ref(),
        )?)
    } else {
        None
    };

    let mut xs: Vec<Vector> = x.ids.iter().map(|&id| params.words.row_vector(id)).collect();
    let (train_mode, dspec, mut rng) = match dropout_cfg {
        Some((d, rng)) => (true, *d, Some(rng)),
        None => (false, DropoutSpec::OFF, None),
    };
    let mode = if train_mode { DropoutMode::Train } else { DropoutMode::Eval };

    let mut embedding_masks = None;
    if train_mode && dspec.embeddings && dspec.p > 0.0 {
        let rng = rng.as_deref_mut().expect("train mode has a generator");
        let mut masks = Vec::with_capacity(xs.len());
        for v in xs.iter_mut() {
            let (out, mask) = dropout(v, dspec.p, mode, rng)?;
            *v = out;
            masks.push(mask);
        }
        embedding_masks = Some(masks);
    }

    let cell_aspect = match spec.cell {
        CellKind::AspectAware => aspect.as_ref(),
        CellKind::Classic => None,
    };
    let unrolled = params.cell.unroll(&xs, cell_aspect, None)?;
    let (repr, head) = params.head.forward(&unrolled.hs, aspect.as_ref())?;

    let (repr, repr_mask) = if train_mode && dspec.representation && dspec.p > 0.0 {
        let rng = rng.expect("train mode has a generator");
        let (out, mask) = dropout(&repr, dspec.p, mode, rng)?;
        (out, Some(mask))
    } else {
        (repr, None)
    };
    let probs = softmax(&params.classifier.logits(&repr)?);

    Ok(ForwardCache {
        aspect,
        embedding_masks,
        unrolled,
        head,
        repr,
        repr_mask,
        probs,
    })
}

/// Backward pass for `scale * cross_entropy(probs, label)`, accumulated
/// into `grads`.
pub fn backward(
    spec: &ModelSpec,
    params: &ModelParams,
    x: &Encoded,
    cache: &ForwardCache,
    scale: f64,
    embeddings: EmbeddingUpdate,
    grads: &mut ModelParams,
) -> Result<()> {
    if x.label >= NUM_CLASSES {
        return Err(Error::arg(format!("label {} out of range", x.label)));
    }
    let mut d_logits = cache.probs.scale(scale);
    d_logits[x.label] -= scale;

    let (g_cls, mut d_repr) = params.classifier.backward(&cache.repr, &d_logits)?;
    grads.classifier.add_scaled(1.0, &g_cls);
    if let Some(mask) = &cache.repr_mask {
        d_repr = d_repr.zip_map(mask, |d, m| d * m);
    }

    let g_head = params.head.backward(&cache.head, &d_repr)?;
    grads.head.add_scaled(1.0, &g_head.params);
    let g_cell = params.cell.backward(&cache.unrolled.caches, &g_head.dhs)?;
    grads.cell.add_scaled(1.0, &g_cell.params);

    let mut d_aspect: Option<Vector> = None;
    for d in [g_head.d_aspect, g_cell.d_aspect].into_iter().flatten() {
        match &mut d_aspect {
            Some(acc) => acc.axpy(1.0, &d)?,
            None => d_aspect = Some(d),
        }
    }

    let fine_tune = embeddings == EmbeddingUpdate::FineTune;
    if fine_tune {
        for (t, (&id, dx)) in x.ids.iter().zip(&g_cell.dxs).enumerate() {
            let row = grads.words.row_mut(id);
            match &cache.embedding_masks {
                Some(masks) => {
                    for ((r, d), m) in row.iter_mut().zip(dx.iter()).zip(masks[t].iter()) {
                        *r += d * m;
                    }
                }
                None => crate::tensor::axpy(1.0, dx.as_slice(), row),
            }
        }
    }

    if let Some(da) = d_aspect {
        debug_assert!(spec.uses_aspect());
        match x.aspect {
            Aspect::Term { start, end } => {
                if fine_tune {
                    let w = 1.0 / (end - start + 1) as f64;
                    for &id in &x.ids[start..=end] {
                        crate::tensor::axpy(w, da.as_slice(), grads.words.row_mut(id));
                    }
                }
            }
            Aspect::Category(c) => {
                let table = grads
                    .aspects
                    .as_mut()
                    .ok_or_else(|| Error::arg("category aspect without an aspect table"))?;
                crate::tensor::axpy(1.0, da.as_slice(), table.row_mut(c));
            }
        }
    }
    Ok(())
}

/// `-ln p[label]` with `p` floored at 1e-12.
pub fn cross_entropy(probs: &Vector, gold: usize) -> Result<f64> {
    if gold >= probs.dim() || probs.dim() != NUM_CLASSES {
        return Err(Error::arg(format!(
            "gold class {gold} invalid for {} probabilities",
            probs.dim()
        )));
    }
    let p = probs[gold];
    // Written so that a NaN probability stays NaN.
    Ok(-(if p < 1e-12 { 1e-12 } else { p }).ln())
}

/// Mean cross-entropy over `batch` plus the L2 penalty, in evaluation mode.
pub fn batch_loss(spec: &ModelSpec, params: &ModelParams, batch: &[Encoded], l2: f64) -> Result<f64> {
    let mut total = 0.0;
    for x in batch {
        let cache = forward::<SeededRng>(spec, params, x, None)?;
        total += cross_entropy(&cache.probs, x.label)?;
    }
    Ok(total / batch.len() as f64 + crate::train::l2_value(params, l2))
}

/// Cross-entropy minus its value under a uniform prediction, `ln K`:
/// `ln(1 + mean_j expm1(z_j - z_gold))`. The result is small near a uniform
/// prediction and is computed without cancellation, which keeps finite
/// differences of it well above roundoff.
pub fn excess_cross_entropy(logits: &Vector, gold: usize) -> Result<f64> {
    if gold >= logits.dim() || logits.dim() != NUM_CLASSES {
        return Err(Error::arg(format!(
            "gold class {gold} invalid for {} logits",
            logits.dim()
        )));
    }
    let zg = logits[gold];
    let m = logits.iter().map(|&z| (z - zg).exp_m1()).sum::<f64>() / NUM_CLASSES as f64;
    Ok(m.ln_1p())
}

/// [`batch_loss`] minus the constant `ln K`, built from
/// [`excess_cross_entropy`]. Same gradient, better conditioned values.
pub fn batch_excess_loss(spec: &ModelSpec, params: &ModelParams, batch: &[Encoded], l2: f64) -> Result<f64> {
    let mut total = 0.0;
    for x in batch {
        let cache = forward::<SeededRng>(spec, params, x, None)?;
        let logits = params.classifier.logits(&cache.repr)?;
        total += excess_cross_entropy(&logits, x.label)?;
    }
    Ok(total / batch.len() as f64 + crate::train::l2_value(params, l2))
}

/// Analytic gradient of [`batch_loss`].
pub fn batch_gradient(spec: &ModelSpec, params: &ModelParams, batch: &[Encoded], l2: f64) -> Result<ModelParams> {
    let mut grads = params.zeros_like();
    let scale = 1.0 / batch.len() as f64;
    for x in batch {
        let cache = forward::<SeededRng>(spec, params, x, None)?;
        backward(spec, params, x, &cache, scale, EmbeddingUpdate::FineTune, &mut grads)?;
    }
    crate::train::add_l2_gradient(params, l2, &mut grads);
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Polarity, Vocabulary};

    fn spec(task: Task, cell: CellKind, head: HeadKind, dx: usize, dc: usize) -> ModelSpec {
        ModelSpec {
            task,
            cell,
            head,
            embedding_dim: dx,
            hidden_dim: dc,
        }
    }

    fn table(dim: usize) -> EmbeddingTable {
        EmbeddingTable::random(Vocabulary::from_tokens(["a", "b", "c"]), dim, -0.5, 0.5, 1).unwrap()
    }

    #[test]
    fn term_task_needs_matching_dims() {
        let s = spec(Task::Atsa, CellKind::AspectAware, HeadKind::Last, 4, 6);
        assert!(matches!(Model::new(s, table(4), -0.1, 0.1, 0), Err(Error::Config(_))));
        let s = spec(Task::Atsa, CellKind::Classic, HeadKind::Last, 4, 6);
        assert!(Model::new(s, table(4), -0.1, 0.1, 0).is_ok());
        let s = spec(Task::Acsa, CellKind::AspectAware, HeadKind::Attention, 4, 6);
        assert!(Model::new(s, table(4), -0.1, 0.1, 0).is_ok());
    }

    #[test]
    fn encode_checks_task() {
        let s = spec(Task::Acsa, CellKind::AspectAware, HeadKind::Last, 4, 4);
        let m = Model::new(s, table(4), -0.1, 0.1, 0).unwrap();
        let inst = LabeledInstance::new(
            vec!["a".into(), "zzz".into()],
            Aspect::Term { start: 0, end: 0 },
            Polarity::Neutral,
        )
        .unwrap();
        assert!(matches!(m.encode(&inst), Err(Error::Config(_))));
        let inst = LabeledInstance { aspect: Aspect::Category(2), ..inst };
        let e = m.encode(&inst).unwrap();
        assert_eq!(e.ids, vec![1, 0]);
        assert_eq!(e.label, 2);
        let p = m.predict_proba(&e).unwrap();
        assert!((p.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_values() {
        let p = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        assert!(cross_entropy(&p, 0).unwrap() <= 1e-12);
        assert!((cross_entropy(&p, 1).unwrap() - 1e-12f64.ln().abs()).abs() < 1e-9);
        let u = Vector::filled(3, 1.0 / 3.0);
        assert!((cross_entropy(&u, 2).unwrap() - 3f64.ln()).abs() < 1e-12);
        let q = Vector::from_vec(vec![0.5, 0.25, 0.25]);
        assert!((cross_entropy(&q, 1).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!(cross_entropy(&q, 3).is_err());
    }

    #[test]
    fn last_head_classic_ignores_aspect() {
        let s = spec(Task::Atsa, CellKind::Classic, HeadKind::Last, 4, 4);
        let m = Model::new(s, table(4), -0.1, 0.1, 0).unwrap();
        let x1 = Encoded { ids: vec![1, 2, 3], aspect: Aspect::Term { start: 0, end: 0 }, label: 0 };
        let x2 = Encoded { aspect: Aspect::Term { start: 2, end: 2 }, ..x1.clone() };
        assert_eq!(m.predict_proba(&x1).unwrap(), m.predict_proba(&x2).unwrap());

        let s = spec(Task::Atsa, CellKind::AspectAware, HeadKind::Last, 4, 4);
        let m = Model::new(s, table(4), -0.1, 0.1, 0).unwrap();
        assert_ne!(m.predict_proba(&x1).unwrap(), m.predict_proba(&x2).unwrap());
    }

    #[test]
    fn excess_cross_entropy_is_shifted_cross_entropy() {
        for z in [[0.0, 0.0, 0.0], [0.3, -1.2, 2.0], [12.0, -4.0, 0.5]] {
            let logits = Vector::from_vec(z.to_vec());
            let probs = softmax(&logits);
            for gold in 0..3 {
                let plain = cross_entropy(&probs, gold).unwrap();
                let excess = excess_cross_entropy(&logits, gold).unwrap();
                assert!((excess + 3f64.ln() - plain).abs() < 1e-12, "{z:?} {gold}");
            }
        }
        assert_eq!(excess_cross_entropy(&Vector::zeros(3), 1).unwrap(), 0.0);
        assert!(excess_cross_entropy(&Vector::zeros(3), 3).is_err());
    }

    #[test]
    fn nan_probability_is_not_masked() {
        let probs = Vector::from_vec(vec![f64::NAN, 0.5, 0.5]);
        assert!(cross_entropy(&probs, 0).unwrap().is_nan());
        let tiny = Vector::from_vec(vec![0.0, 0.5, 0.5]);
        assert!((cross_entropy(&tiny, 0).unwrap() - 1e12f64.ln()).abs() < 1e-12);
        assert!(Vector::from_vec(vec![1.0, f64::NAN, 3.0]).max_abs().is_nan());
    }
}

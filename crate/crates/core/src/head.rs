//! Sentence representation heads and the softmax classifier.
//!
//! The attention head follows the cited ATAE-LSTM architecture:
//!
//! ```text
//! score_t = wᵀ · tanh([W_h·h_t, W_v·A])
//! α       = softmax(score)
//! r       = Σ_t α_t · h_t
//! repr    = tanh(W_p·r + W_x·h_T)
//! ```

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{impl_parameters, prefixed, prefixed_mut, Parameters, Tensor, TensorMut};
use crate::tensor::{self, softmax, tanh_scalar, Matrix, Vector};

pub const NUM_CLASSES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadKind {
    Last,
    Attention,
}

impl HeadKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::Last => "last",
            HeadKind::Attention => "attention",
        }
    }
}

impl std::str::FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last" => Ok(HeadKind::Last),
            "attention" | "atae" => Ok(HeadKind::Attention),
            other => Err(Error::arg(format!("unknown head kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams {
    /// `dc x dc`
    pub w_h: Matrix,
    /// `da x da`
    pub w_v: Matrix,
    /// `dc + da`
    pub w: Vector,
    /// `dr x dc`
    pub w_p: Matrix,
    /// `dr x dc`
    pub w_x: Matrix,
}

impl_parameters!(AttentionParams {
    w_h: Weight,
    w_v: Weight,
    w: Weight,
    w_p: Weight,
    w_x: Weight,
});

impl AttentionParams {
    pub fn zeros(dc: usize, da: usize, dr: usize) -> Self {
        AttentionParams {
            w_h: Matrix::zeros(dc, dc),
            w_v: Matrix::zeros(da, da),
            w: Vector::zeros(dc + da),
            w_p: Matrix::zeros(dr, dc),
            w_x: Matrix::zeros(dr, dc),
        }
    }

    pub fn init<R: Rng + ?Sized>(
        dc: usize,
        da: usize,
        dr: usize,
        lo: f64,
        hi: f64,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(AttentionParams {
            w_h: Matrix::uniform(dc, dc, lo, hi, rng)?,
            w_v: Matrix::uniform(da, da, lo, hi, rng)?,
            w: Vector::uniform(dc + da, lo, hi, rng)?,
            w_p: Matrix::uniform(dr, dc, lo, hi, rng)?,
            w_x: Matrix::uniform(dr, dc, lo, hi, rng)?,
        })
    }

    fn check(&self, hs: &[Vector], aspect: &Vector) -> Result<()> {
        let dc = self.w_h.rows();
        let da = self.w_v.rows();
        if self.w_h.cols() != dc
            || self.w_v.cols() != da
            || self.w.dim() != dc + da
            || self.w_p.cols() != dc
            || self.w_x.shape() != self.w_p.shape()
        {
            return Err(Error::shape(
                "attention params",
                format!("dc={dc}, da={da}"),
                format!(
                    "W_h {}, W_v {}, w dim {}, W_p {}, W_x {}",
                    self.w_h,
                    self.w_v,
                    self.w.dim(),
                    self.w_p,
                    self.w_x
                ),
            ));
        }
        if aspect.dim() != da {
            return Err(Error::shape(
                "attention aspect",
                format!("dim {da}"),
                format!("dim {}", aspect.dim()),
            ));
        }
        if let Some(h) = hs.iter().find(|h| h.dim() != dc) {
            return Err(Error::shape(
                "attention hidden state",
                format!("dim {dc}"),
                format!("dim {}", h.dim()),
            ));
        }
        Ok(())
    }

    /// Unnormalized attention scores; each depends only on its own `h_t`.
    pub fn scores(&self, hs: &[Vector], aspect: &Vector) -> Result<Vector> {
        self.check(hs, aspect)?;
        let va = self.w_v.matvec(aspect)?;
        Ok(Vector::from_vec(
            hs.iter()
                .map(|h| self.score_terms(h, &va).1)
                .collect(),
        ))
    }

    /// Returns `tanh([W_h·h, va])` and its dot product with `w`.
    fn score_terms(&self, h: &Vector, va: &Vector) -> (Vector, f64) {
        let mut u = vec![0.0; self.w_h.rows()];
        self.w_h.matvec_into(h.as_slice(), &mut u);
        u.extend_from_slice(va.as_slice());
        let z = Vector::from_vec(u.into_iter().map(tanh_scalar).collect());
        let s = tensor::dot(z.as_slice(), self.w.as_slice());
        (z, s)
    }
}

#[derive(Clone, Debug)]
pub struct AttentionCache {
    pub hs: Vec<Vector>,
    pub aspect: Vector,
    /// `tanh([W_h·h_t, W_v·A])` per step.
    pub z: Vec<Vector>,
    pub weights: Vector,
    pub r: Vector,
    pub repr: Vector,
}

/// Attention head forward pass. Returns the representation and the
/// attention weights.
pub fn atae_attention_head(
    hs: &[Vector],
    aspect: &Vector,
    p: &AttentionParams,
) -> Result<(Vector, Vector, AttentionCache)> {
    if hs.is_empty() {
        return Err(Error::arg("attention over an empty sequence"));
    }
    p.check(hs, aspect)?;
    let va = p.w_v.matvec(aspect)?;
    let (z, scores): (Vec<_>, Vec<_>) = hs.iter().map(|h| p.score_terms(h, &va)).unzip();
    let weights = softmax(&Vector::from_vec(scores));

    let dc = p.w_h.rows();
    let mut r = Vector::zeros(dc);
    for (h, &a) in hs.iter().zip(weights.iter()) {
        tensor::axpy(a, h.as_slice(), r.as_mut_slice());
    }
    let last = hs.last().expect("nonempty");
    let mut pre = p.w_p.matvec(&r)?;
    pre.axpy(1.0, &p.w_x.matvec(last)?)?;
    let repr = pre.map(tanh_scalar);

    let cache = AttentionCache {
        hs: hs.to_vec(),
        aspect: aspect.clone(),
        z,
        weights: weights.clone(),
        r,
        repr: repr.clone(),
    };
    Ok((repr, weights, cache))
}

#[derive(Clone, Debug)]
pub struct AttentionGradients {
    pub params: AttentionParams,
    pub dhs: Vec<Vector>,
    pub d_aspect: Vector,
}

pub fn atae_attention_backward(
    p: &AttentionParams,
    cache: &AttentionCache,
    d_repr: &Vector,
) -> Result<AttentionGradients> {
    if d_repr.dim() != cache.repr.dim() {
        return Err(Error::arg(format!(
            "upstream gradient has dim {} but the head produced dim {}",
            d_repr.dim(),
            cache.repr.dim()
        )));
    }
    if cache.z.len() != cache.hs.len() || cache.weights.dim() != cache.hs.len() {
        return Err(Error::arg("attention cache is inconsistent"));
    }
    let dc = p.w_h.rows();
    let mut g = p.zeros_like();
    let mut dhs = vec![Vector::zeros(dc); cache.hs.len()];
    let mut d_aspect = Vector::zeros(cache.aspect.dim());

    // repr = tanh(W_p·r + W_x·h_T)
    let d_pre: Vec<f64> = d_repr
        .iter()
        .zip(cache.repr.iter())
        .map(|(d, y)| d * (1.0 - y * y))
        .collect();
    g.w_p.outer_acc(&d_pre, cache.r.as_slice());
    let last = cache.hs.len() - 1;
    g.w_x.outer_acc(&d_pre, cache.hs[last].as_slice());
    p.w_x.matvec_transposed_acc(&d_pre, dhs[last].as_mut_slice());
    let mut dr = vec![0.0; dc];
    p.w_p.matvec_transposed_acc(&d_pre, &mut dr);

    // r = Σ α_t h_t
    let d_alpha: Vec<f64> = cache.hs.iter().map(|h| tensor::dot(h.as_slice(), &dr)).collect();
    for (dh, &a) in dhs.iter_mut().zip(cache.weights.iter()) {
        tensor::axpy(a, &dr, dh.as_mut_slice());
    }

    // α = softmax(score)
    let mean: f64 = d_alpha
        .iter()
        .zip(cache.weights.iter())
        .map(|(d, a)| d * a)
        .sum();
    let mut d_va = vec![0.0; d_aspect.dim()];
    for t in 0..cache.hs.len() {
        let d_score = cache.weights[t] * (d_alpha[t] - mean);
        if d_score == 0.0 {
            continue;
        }
        let z = &cache.z[t];
        tensor::axpy(d_score, z.as_slice(), g.w.as_mut_slice());
        let du: Vec<f64> = z
            .iter()
            .zip(p.w.iter())
            .map(|(zi, wi)| d_score * wi * (1.0 - zi * zi))
            .collect();
        let (du_h, du_a) = du.split_at(dc);
        g.w_h.outer_acc(du_h, cache.hs[t].as_slice());
        p.w_h.matvec_transposed_acc(du_h, dhs[t].as_mut_slice());
        tensor::axpy(1.0, du_a, &mut d_va);
    }
    g.w_v.outer_acc(&d_va, cache.aspect.as_slice());
    p.w_v.matvec_transposed_acc(&d_va, d_aspect.as_mut_slice());

    Ok(AttentionGradients {
        params: g,
        dhs,
        d_aspect,
    })
}

/// The final hidden state, unchanged.
pub fn last_hidden_head(hs: &[Vector]) -> Result<Vector> {
    hs.last()
        .cloned()
        .ok_or_else(|| Error::arg("last-hidden head over an empty sequence"))
}

/// Routes the upstream gradient entirely to `h_T`.
pub fn last_hidden_backward(len: usize, d_repr: &Vector) -> Result<Vec<Vector>> {
    if len == 0 {
        return Err(Error::arg("last-hidden backward over an empty sequence"));
    }
    let mut dhs = vec![Vector::zeros(d_repr.dim()); len];
    dhs[len - 1] = d_repr.clone();
    Ok(dhs)
}

#[derive(Clone, Debug, PartialEq)]
pub enum HeadParams {
    Last,
    Attention(AttentionParams),
}

#[derive(Clone, Debug)]
pub enum HeadCache {
    Last { len: usize },
    Attention(AttentionCache),
}

#[derive(Clone, Debug)]
pub struct HeadGradients {
    pub params: HeadParams,
    pub dhs: Vec<Vector>,
    pub d_aspect: Option<Vector>,
}

impl HeadParams {
    pub fn init<R: Rng + ?Sized>(
        kind: HeadKind,
        dc: usize,
        da: usize,
        lo: f64,
        hi: f64,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(match kind {
            HeadKind::Last => HeadParams::Last,
            HeadKind::Attention => HeadParams::Attention(AttentionParams::init(dc, da, dc, lo, hi, rng)?),
        })
    }

    pub fn kind(&self) -> HeadKind {
        match self {
            HeadParams::Last => HeadKind::Last,
            HeadParams::Attention(_) => HeadKind::Attention,
        }
    }

    pub fn forward(&self, hs: &[Vector], aspect: Option<&Vector>) -> Result<(Vector, HeadCache)> {
        match self {
            HeadParams::Last => Ok((last_hidden_head(hs)?, HeadCache::Last { len: hs.len() })),
            HeadParams::Attention(p) => {
                let aspect = aspect.ok_or_else(|| Error::arg("attention head requires an aspect vector"))?;
                let (repr, _, cache) = atae_attention_head(hs, aspect, p)?;
                Ok((repr, HeadCache::Attention(cache)))
            }
        }
    }

    pub fn backward(&self, cache: &HeadCache, d_repr: &Vector) -> Result<HeadGradients> {
        match (self, cache) {
            (HeadParams::Last, HeadCache::Last { len }) => Ok(HeadGradients {
                params: HeadParams::Last,
                dhs: last_hidden_backward(*len, d_repr)?,
                d_aspect: None,
            }),
            (HeadParams::Attention(p), HeadCache::Attention(c)) => {
                let g = atae_attention_backward(p, c, d_repr)?;
                Ok(HeadGradients {
                    params: HeadParams::Attention(g.params),
                    dhs: g.dhs,
                    d_aspect: Some(g.d_aspect),
                })
            }
            _ => Err(Error::arg("head cache does not match head kind")),
        }
    }
}

impl Parameters for HeadParams {
    fn tensors(&self) -> Vec<Tensor<'_>> {
        match self {
            HeadParams::Last => Vec::new(),
            HeadParams::Attention(p) => prefixed("head", p.tensors()).collect(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        match self {
            HeadParams::Last => Vec::new(),
            HeadParams::Attention(p) => prefixed_mut("head", p.tensors_mut()).collect(),
        }
    }
}

/// Affine map to three polarity logits.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierParams {
    pub w_s: Matrix,
    pub b_s: Vector,
}

impl_parameters!(ClassifierParams {
    w_s: Weight,
    b_s: Bias,
});

impl ClassifierParams {
    pub fn zeros(dr: usize) -> Self {
        ClassifierParams {
            w_s: Matrix::zeros(NUM_CLASSES, dr),
            b_s: Vector::zeros(NUM_CLASSES),
        }
    }

    pub fn init<R: Rng + ?Sized>(dr: usize, lo: f64, hi: f64, rng: &mut R) -> Result<Self> {
        Ok(ClassifierParams {
            w_s: Matrix::uniform(NUM_CLASSES, dr, lo, hi, rng)?,
            b_s: Vector::zeros(NUM_CLASSES),
        })
    }

    pub fn logits(&self, repr: &Vector) -> Result<Vector> {
        if self.w_s.rows() != NUM_CLASSES || self.b_s.dim() != NUM_CLASSES {
            return Err(Error::shape(
                "classifier",
                format!("{NUM_CLASSES} classes"),
                format!("W_s {}, b_s dim {}", self.w_s, self.b_s.dim()),
            ));
        }
        self.w_s.matvec(repr)?.add(&self.b_s)
    }

    /// Gradients of the classifier parameters and of `repr` given the
    /// gradient at the logits.
    pub fn backward(&self, repr: &Vector, d_logits: &Vector) -> Result<(ClassifierParams, Vector)> {
        if d_logits.dim() != NUM_CLASSES || repr.dim() != self.w_s.cols() {
            return Err(Error::shape(
                "classifier backward",
                format!("W_s {}", self.w_s),
                format!("repr dim {}, logits grad dim {}", repr.dim(), d_logits.dim()),
            ));
        }
        let mut g = self.zeros_like();
        g.w_s.outer_acc(d_logits.as_slice(), repr.as_slice());
        g.b_s = d_logits.clone();
        let d_repr = self.w_s.matvec_transposed(d_logits)?;
        Ok((g, d_repr))
    }
}

/// Class probabilities for a representation.
pub fn softmax_classify(repr: &Vector, p: &ClassifierParams) -> Result<Vector> {
    Ok(softmax(&p.logits(repr)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::seeded_rng;

    fn rv(n: usize, rng: &mut crate::tensor::SeededRng) -> Vector {
        Vector::uniform(n, -1.0, 1.0, rng).unwrap()
    }

    #[test]
    fn last_hidden_picks_final() {
        let v1 = Vector::from_vec(vec![1.0]);
        let v2 = Vector::from_vec(vec![2.0]);
        let v3 = Vector::from_vec(vec![3.0]);
        assert_eq!(last_hidden_head(std::slice::from_ref(&v1)).unwrap(), v1);
        assert_eq!(last_hidden_head(&[v1, v2, v3.clone()]).unwrap(), v3);
        assert!(matches!(last_hidden_head(&[]), Err(Error::Argument(_))));
    }

    #[test]
    fn last_hidden_backward_routes_to_final() {
        let d = Vector::from_vec(vec![0.5, -1.0]);
        let dhs = last_hidden_backward(3, &d).unwrap();
        assert_eq!(dhs[0], Vector::zeros(2));
        assert_eq!(dhs[1], Vector::zeros(2));
        assert_eq!(dhs[2], d);
    }

    #[test]
    fn attention_singleton() {
        let mut rng = seeded_rng(1);
        let p = AttentionParams::init(2, 2, 2, -0.5, 0.5, &mut rng).unwrap();
        let h = rv(2, &mut rng);
        let (_, w, cache) = atae_attention_head(std::slice::from_ref(&h), &rv(2, &mut rng), &p).unwrap();
        assert_eq!(w.as_slice(), &[1.0]);
        assert_eq!(cache.r, h);
    }

    #[test]
    fn attention_uniform_when_scores_equal() {
        let mut rng = seeded_rng(2);
        let mut p = AttentionParams::init(3, 3, 3, -0.5, 0.5, &mut rng).unwrap();
        p.w = Vector::zeros(6);
        let hs: Vec<_> = (0..4).map(|_| rv(3, &mut rng)).collect();
        let (_, w, _) = atae_attention_head(&hs, &rv(3, &mut rng), &p).unwrap();
        for &x in w.iter() {
            assert!((x - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn attention_shape_errors() {
        let p = AttentionParams::zeros(3, 3, 3);
        let hs = vec![Vector::zeros(3)];
        assert!(matches!(
            atae_attention_head(&hs, &Vector::zeros(2), &p),
            Err(Error::Shape { .. })
        ));
        assert!(matches!(
            atae_attention_head(&[Vector::zeros(2)], &Vector::zeros(3), &p),
            Err(Error::Shape { .. })
        ));
        assert!(matches!(
            atae_attention_head(&[], &Vector::zeros(3), &p),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn zero_upstream_zero_head_gradients() {
        let mut rng = seeded_rng(3);
        let p = AttentionParams::init(3, 3, 3, -0.5, 0.5, &mut rng).unwrap();
        let hs: Vec<_> = (0..3).map(|_| rv(3, &mut rng)).collect();
        let (_, _, cache) = atae_attention_head(&hs, &rv(3, &mut rng), &p).unwrap();
        let g = atae_attention_backward(&p, &cache, &Vector::zeros(3)).unwrap();
        assert_eq!(g.params.max_abs(), 0.0);
        assert!(g.dhs.iter().all(|d| d.max_abs() == 0.0));
        assert_eq!(g.d_aspect.max_abs(), 0.0);
    }

    #[test]
    fn head_cache_mismatch_is_error() {
        let head = HeadParams::Attention(AttentionParams::zeros(2, 2, 2));
        assert!(matches!(
            head.backward(&HeadCache::Last { len: 2 }, &Vector::zeros(2)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn classify_zero_and_constant_logits() {
        let p = ClassifierParams::zeros(4);
        let probs = softmax_classify(&Vector::filled(4, 0.3), &p).unwrap();
        for &x in probs.iter() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let mut p = ClassifierParams::zeros(1);
        p.b_s = Vector::filled(3, 123.0);
        let probs = softmax_classify(&Vector::zeros(1), &p).unwrap();
        assert!(probs.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn classify_large_logit() {
        let mut p = ClassifierParams::zeros(1);
        p.b_s = Vector::from_vec(vec![1000.0, 0.0, 0.0]);
        let probs = softmax_classify(&Vector::zeros(1), &p).unwrap();
        assert!((probs[0] - 1.0).abs() < 1e-12);
        assert!(probs.is_finite());
        assert!((probs.sum() - 1.0).abs() < 1e-12);
    }
}

//! Recurrent cells: the aspect-aware LSTM and the classic (no-peephole)
//! LSTM it extends, with cached forward steps and backpropagation through
//! time.
//!
//! Both cells share one step routine. The aspect-aware cell adds three
//! aspect gates, each computed from `[A, h_{t-1}]`, whose outputs scale the
//! aspect vector before it is added into the input, forget and output gate
//! pre-activations:
//!
//! ```text
//! a_i = σ(W_ai·[A, h_{t-1}] + b_ai)
//! I_t = σ(W_I·[x_t, h_{t-1}] + a_i ⊙ A + b_I)
//! a_f = σ(W_af·[A, h_{t-1}] + b_af)
//! f_t = σ(W_f·[x_t, h_{t-1}] + a_f ⊙ A + b_f)
//! C̃_t = tanh(W_C·[x_t, h_{t-1}] + b_C)
//! C_t = f_t ⊙ C_{t-1} + I_t ⊙ C̃_t
//! a_o = σ(W_ao·[A, h_{t-1}] + b_ao)
//! o_t = σ(W_o·[x_t, h_{t-1}] + a_o ⊙ A + b_o)
//! h_t = o_t ⊙ tanh(C_t)
//! ```
//!
//! The candidate content `C̃_t` never sees the aspect. Setting `A = 0`
//! removes every aspect term and leaves the classic cell.

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{impl_parameters, prefixed, prefixed_mut, Parameters, Tensor, TensorMut};
use crate::tensor::{sigmoid_scalar, tanh_scalar, Matrix, Vector};

/// Core LSTM weights. Each matrix is `dc x (dx + dc)` and acts on
/// `[x_t, h_{t-1}]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub w_i: Matrix,
    pub w_f: Matrix,
    pub w_c: Matrix,
    pub w_o: Matrix,
    pub b_i: Vector,
    pub b_f: Vector,
    pub b_c: Vector,
    pub b_o: Vector,
}

impl_parameters!(LstmParams {
    w_i: Weight,
    w_f: Weight,
    w_c: Weight,
    w_o: Weight,
    b_i: Bias,
    b_f: Bias,
    b_c: Bias,
    b_o: Bias,
});

impl LstmParams {
    pub fn zeros(dx: usize, dc: usize) -> Self {
        let w = Matrix::zeros(dc, dx + dc);
        let b = Vector::zeros(dc);
        LstmParams {
            w_i: w.clone(),
            w_f: w.clone(),
            w_c: w.clone(),
            w_o: w,
            b_i: b.clone(),
            b_f: b.clone(),
            b_c: b.clone(),
            b_o: b,
        }
    }

    /// Weights from `U[lo, hi)`, biases zero.
    pub fn init<R: Rng + ?Sized>(dx: usize, dc: usize, lo: f64, hi: f64, rng: &mut R) -> Result<Self> {
        let mut p = LstmParams::zeros(dx, dc);
        p.w_i = Matrix::uniform(dc, dx + dc, lo, hi, rng)?;
        p.w_f = Matrix::uniform(dc, dx + dc, lo, hi, rng)?;
        p.w_c = Matrix::uniform(dc, dx + dc, lo, hi, rng)?;
        p.w_o = Matrix::uniform(dc, dx + dc, lo, hi, rng)?;
        Ok(p)
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_i.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_i.cols() - self.w_i.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let dc = self.w_i.rows();
        if self.w_i.cols() < dc {
            return Err(Error::config(format!(
                "LSTM weight {} cannot hold a hidden state of size {dc}",
                self.w_i
            )));
        }
        let shape = self.w_i.shape();
        for (name, w) in [("w_f", &self.w_f), ("w_c", &self.w_c), ("w_o", &self.w_o)] {
            if w.shape() != shape {
                return Err(Error::shape(name, format!("{}x{}", shape.0, shape.1), w));
            }
        }
        for (name, b) in [
            ("b_i", &self.b_i),
            ("b_f", &self.b_f),
            ("b_c", &self.b_c),
            ("b_o", &self.b_o),
        ] {
            if b.dim() != dc {
                return Err(Error::shape(name, format!("dim {dc}"), format!("dim {}", b.dim())));
            }
        }
        Ok(())
    }
}

/// Aspect gate weights. Each matrix is `da x (da + dc)` and acts on
/// `[A, h_{t-1}]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AspectGateParams {
    pub w_ai: Matrix,
    pub w_af: Matrix,
    pub w_ao: Matrix,
    pub b_ai: Vector,
    pub b_af: Vector,
    pub b_ao: Vector,
}

impl_parameters!(AspectGateParams {
    w_ai: Weight,
    w_af: Weight,
    w_ao: Weight,
    b_ai: Bias,
    b_af: Bias,
    b_ao: Bias,
});

impl AspectGateParams {
    pub fn zeros(da: usize, dc: usize) -> Self {
        let w = Matrix::zeros(da, da + dc);
        let b = Vector::zeros(da);
        AspectGateParams {
            w_ai: w.clone(),
            w_af: w.clone(),
            w_ao: w,
            b_ai: b.clone(),
            b_af: b.clone(),
            b_ao: b,
        }
    }

    pub fn init<R: Rng + ?Sized>(da: usize, dc: usize, lo: f64, hi: f64, rng: &mut R) -> Result<Self> {
        let mut p = AspectGateParams::zeros(da, dc);
        p.w_ai = Matrix::uniform(da, da + dc, lo, hi, rng)?;
        p.w_af = Matrix::uniform(da, da + dc, lo, hi, rng)?;
        p.w_ao = Matrix::uniform(da, da + dc, lo, hi, rng)?;
        Ok(p)
    }

    pub fn aspect_dim(&self) -> usize {
        self.w_ai.rows()
    }
}

/// Aspect-aware LSTM parameters. The aspect dimension must equal the hidden
/// dimension: `a ⊙ A` is added directly to `dc`-sized pre-activations.
#[derive(Clone, Debug, PartialEq)]
pub struct AaLstmParams {
    pub core: LstmParams,
    pub aspect: AspectGateParams,
}

impl AaLstmParams {
    pub fn new(core: LstmParams, aspect: AspectGateParams) -> Result<Self> {
        let p = AaLstmParams { core, aspect };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(dx: usize, dc: usize, da: usize) -> Result<Self> {
        check_aspect_dim(dc, da)?;
        Ok(AaLstmParams {
            core: LstmParams::zeros(dx, dc),
            aspect: AspectGateParams::zeros(da, dc),
        })
    }

    pub fn init<R: Rng + ?Sized>(
        dx: usize,
        dc: usize,
        da: usize,
        lo: f64,
        hi: f64,
        rng: &mut R,
    ) -> Result<Self> {
        check_aspect_dim(dc, da)?;
        let core = LstmParams::init(dx, dc, lo, hi, rng)?;
        let aspect = AspectGateParams::init(da, dc, lo, hi, rng)?;
        Ok(AaLstmParams { core, aspect })
    }

    pub fn validate(&self) -> Result<()> {
        self.core.validate()?;
        let dc = self.core.hidden_dim();
        let da = self.aspect.aspect_dim();
        check_aspect_dim(dc, da)?;
        for (name, w) in [
            ("w_ai", &self.aspect.w_ai),
            ("w_af", &self.aspect.w_af),
            ("w_ao", &self.aspect.w_ao),
        ] {
            if w.shape() != (da, da + dc) {
                return Err(Error::shape(name, format!("{da}x{}", da + dc), w));
            }
        }
        for (name, b) in [
            ("b_ai", &self.aspect.b_ai),
            ("b_af", &self.aspect.b_af),
            ("b_ao", &self.aspect.b_ao),
        ] {
            if b.dim() != da {
                return Err(Error::shape(name, format!("dim {da}"), format!("dim {}", b.dim())));
            }
        }
        Ok(())
    }
}

impl Parameters for AaLstmParams {
    fn tensors(&self) -> Vec<Tensor<'_>> {
        let mut out: Vec<_> = self.core.tensors();
        out.extend(self.aspect.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out: Vec<_> = self.core.tensors_mut();
        out.extend(self.aspect.tensors_mut());
        out
    }
}

fn check_aspect_dim(dc: usize, da: usize) -> Result<()> {
    if dc != da {
        return Err(Error::config(format!(
            "aspect dimension ({da}) must equal hidden dimension ({dc})"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellState {
    pub h: Vector,
    pub c: Vector,
}

impl CellState {
    pub fn zeros(dc: usize) -> Self {
        CellState {
            h: Vector::zeros(dc),
            c: Vector::zeros(dc),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AspectGates {
    pub a_i: Vector,
    pub a_f: Vector,
    pub a_o: Vector,
}

/// Everything one step computed, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct StepCache {
    pub x: Vector,
    pub h_prev: Vector,
    pub c_prev: Vector,
    /// The aspect vector and the aspect gates, for aspect-aware steps only.
    pub aspect: Option<(Vector, AspectGates)>,
    pub i: Vector,
    pub f: Vector,
    pub o: Vector,
    pub c_tilde: Vector,
    pub c: Vector,
    pub tanh_c: Vector,
    pub h: Vector,
}

/// One aspect-aware step.
pub fn aa_lstm_step(
    p: &AaLstmParams,
    x: &Vector,
    aspect: &Vector,
    prev: &CellState,
) -> Result<(CellState, StepCache)> {
    check_step_shapes(&p.core, x, prev)?;
    if aspect.dim() != p.aspect.aspect_dim() {
        return Err(Error::shape(
            "aa_lstm_step",
            format!("aspect dim {}", p.aspect.aspect_dim()),
            format!("dim {}", aspect.dim()),
        ));
    }
    Ok(step(&p.core, Some((&p.aspect, aspect)), x, prev))
}

/// One classic LSTM step.
pub fn classic_lstm_step(
    p: &LstmParams,
    x: &Vector,
    prev: &CellState,
) -> Result<(CellState, StepCache)> {
    check_step_shapes(p, x, prev)?;
    Ok(step(p, None, x, prev))
}

fn check_step_shapes(p: &LstmParams, x: &Vector, prev: &CellState) -> Result<()> {
    let (dx, dc) = (p.input_dim(), p.hidden_dim());
    if x.dim() != dx {
        return Err(Error::shape(
            "lstm step input",
            format!("dim {dx}"),
            format!("dim {}", x.dim()),
        ));
    }
    if prev.h.dim() != dc || prev.c.dim() != dc {
        return Err(Error::shape(
            "lstm step state",
            format!("dim {dc}"),
            format!("h dim {}, c dim {}", prev.h.dim(), prev.c.dim()),
        ));
    }
    Ok(())
}

fn gate(w: &Matrix, input: &[f64], b: &Vector, act: fn(f64) -> f64) -> Vector {
    let mut z = vec![0.0; w.rows()];
    w.matvec_into(input, &mut z);
    for (zi, bi) in z.iter_mut().zip(b.iter()) {
        *zi = act(*zi + bi);
    }
    Vector::from_vec(z)
}

/// Gate with the aspect term `scale ⊙ A` added to its pre-activation.
fn gate_with_aspect(
    w: &Matrix,
    input: &[f64],
    b: &Vector,
    scale: &Vector,
    aspect: &Vector,
) -> Vector {
    let mut z = vec![0.0; w.rows()];
    w.matvec_into(input, &mut z);
    for (k, zi) in z.iter_mut().enumerate() {
        *zi = sigmoid_scalar(*zi + scale[k] * aspect[k] + b[k]);
    }
    Vector::from_vec(z)
}

fn step(
    core: &LstmParams,
    aspect: Option<(&AspectGateParams, &Vector)>,
    x: &Vector,
    prev: &CellState,
) -> (CellState, StepCache) {
    let xh = [x.as_slice(), prev.h.as_slice()].concat();

    let (i, f, o, gates) = match aspect {
        Some((ap, a)) => {
            let ah = [a.as_slice(), prev.h.as_slice()].concat();
            let a_i = gate(&ap.w_ai, &ah, &ap.b_ai, sigmoid_scalar);
            let i = gate_with_aspect(&core.w_i, &xh, &core.b_i, &a_i, a);
            let a_f = gate(&ap.w_af, &ah, &ap.b_af, sigmoid_scalar);
            let f = gate_with_aspect(&core.w_f, &xh, &core.b_f, &a_f, a);
            let a_o = gate(&ap.w_ao, &ah, &ap.b_ao, sigmoid_scalar);
            let o = gate_with_aspect(&core.w_o, &xh, &core.b_o, &a_o, a);
            (i, f, o, Some((a.clone(), AspectGates { a_i, a_f, a_o })))
        }
        None => (
            gate(&core.w_i, &xh, &core.b_i, sigmoid_scalar),
            gate(&core.w_f, &xh, &core.b_f, sigmoid_scalar),
            gate(&core.w_o, &xh, &core.b_o, sigmoid_scalar),
            None,
        ),
    };
    let c_tilde = gate(&core.w_c, &xh, &core.b_c, tanh_scalar);

    let dc = c_tilde.dim();
    let mut c = Vector::zeros(dc);
    let mut tanh_c = Vector::zeros(dc);
    let mut h = Vector::zeros(dc);
    for k in 0..dc {
        c[k] = f[k] * prev.c[k] + i[k] * c_tilde[k];
        tanh_c[k] = tanh_scalar(c[k]);
        h[k] = o[k] * tanh_c[k];
    }

    let state = CellState {
        h: h.clone(),
        c: c.clone(),
    };
    let cache = StepCache {
        x: x.clone(),
        h_prev: prev.h.clone(),
        c_prev: prev.c.clone(),
        aspect: gates,
        i,
        f,
        o,
        c_tilde,
        c,
        tanh_c,
        h,
    };
    (state, cache)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    Classic,
    AspectAware,
}

impl CellKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::Classic => "classic",
            CellKind::AspectAware => "aa",
        }
    }
}

impl std::str::FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classic" | "lstm" => Ok(CellKind::Classic),
            "aa" | "aa-lstm" => Ok(CellKind::AspectAware),
            other => Err(Error::arg(format!("unknown cell kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellParams {
    Classic(LstmParams),
    AspectAware(AaLstmParams),
}

/// Outputs of running a cell over a whole sequence.
#[derive(Clone, Debug)]
pub struct Unrolled {
    pub hs: Vec<Vector>,
    pub caches: Vec<StepCache>,
}

impl Unrolled {
    pub fn final_state(&self) -> CellState {
        let last = self.caches.last().expect("unroll never returns an empty sequence");
        CellState {
            h: last.h.clone(),
            c: last.c.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CellGradients {
    pub params: CellParams,
    pub dxs: Vec<Vector>,
    /// Gradient with respect to the aspect vector, summed over all steps.
    pub d_aspect: Option<Vector>,
    /// Gradient with respect to the initial state.
    pub d_init: CellState,
}

impl CellParams {
    pub fn init<R: Rng + ?Sized>(
        kind: CellKind,
        dx: usize,
        dc: usize,
        lo: f64,
        hi: f64,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(match kind {
            CellKind::Classic => CellParams::Classic(LstmParams::init(dx, dc, lo, hi, rng)?),
            CellKind::AspectAware => {
                CellParams::AspectAware(AaLstmParams::init(dx, dc, dc, lo, hi, rng)?)
            }
        })
    }

    pub fn kind(&self) -> CellKind {
        match self {
            CellParams::Classic(_) => CellKind::Classic,
            CellParams::AspectAware(_) => CellKind::AspectAware,
        }
    }

    pub fn core(&self) -> &LstmParams {
        match self {
            CellParams::Classic(p) => p,
            CellParams::AspectAware(p) => &p.core,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.core().input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.core().hidden_dim()
    }

    /// Runs the cell over `xs`. The aspect vector is required by, and only
    /// accepted by, the aspect-aware cell. `init` defaults to the zero state.
    pub fn unroll(
        &self,
        xs: &[Vector],
        aspect: Option<&Vector>,
        init: Option<&CellState>,
    ) -> Result<Unrolled> {
        if xs.is_empty() {
            return Err(Error::arg("cannot unroll an empty sequence"));
        }
        let aspect = match (self, aspect) {
            (CellParams::AspectAware(p), Some(a)) => Some((&p.aspect, a)),
            (CellParams::AspectAware(_), None) => {
                return Err(Error::arg("aspect-aware cell requires an aspect vector"))
            }
            (CellParams::Classic(_), Some(_)) => {
                return Err(Error::arg("classic cell does not take an aspect vector"))
            }
            (CellParams::Classic(_), None) => None,
        };
        let core = self.core();
        if let Some((ap, a)) = aspect {
            if a.dim() != ap.aspect_dim() {
                return Err(Error::shape(
                    "unroll aspect",
                    format!("dim {}", ap.aspect_dim()),
                    format!("dim {}", a.dim()),
                ));
            }
        }

        let mut state = init
            .cloned()
            .unwrap_or_else(|| CellState::zeros(core.hidden_dim()));
        let mut hs = Vec::with_capacity(xs.len());
        let mut caches = Vec::with_capacity(xs.len());
        for x in xs {
            check_step_shapes(core, x, &state)?;
            let (next, cache) = step(core, aspect, x, &state);
            hs.push(next.h.clone());
            caches.push(cache);
            state = next;
        }
        Ok(Unrolled { hs, caches })
    }

    /// Backpropagation through time. `dhs[t]` is the loss gradient arriving
    /// at `h_t` from outside the recurrence; parameter gradients are summed
    /// over steps.
    pub fn backward(&self, caches: &[StepCache], dhs: &[Vector]) -> Result<CellGradients> {
        if caches.len() != dhs.len() {
            return Err(Error::arg(format!(
                "{} step caches but {} hidden-state gradients",
                caches.len(),
                dhs.len()
            )));
        }
        if caches.is_empty() {
            return Err(Error::arg("backward over an empty sequence"));
        }
        let dc = self.hidden_dim();
        let dx = self.input_dim();
        if let Some(bad) = dhs.iter().find(|d| d.dim() != dc) {
            return Err(Error::shape(
                "cell backward",
                format!("dim {dc}"),
                format!("dim {}", bad.dim()),
            ));
        }
        let aspect_aware = matches!(self, CellParams::AspectAware(_));
        if caches.iter().any(|c| c.aspect.is_some() != aspect_aware) {
            return Err(Error::arg("step caches were produced by a different cell kind"));
        }

        let mut grads = match self {
            CellParams::Classic(p) => CellParams::Classic(p.zeros_like()),
            CellParams::AspectAware(p) => CellParams::AspectAware(p.zeros_like()),
        };
        let mut dxs = vec![Vector::zeros(dx); caches.len()];
        let mut d_aspect = aspect_aware.then(|| Vector::zeros(dc));

        let mut dh_next = vec![0.0; dc];
        let mut dc_next = vec![0.0; dc];
        for t in (0..caches.len()).rev() {
            let dh: Vec<f64> = dh_next
                .iter()
                .zip(dhs[t].iter())
                .map(|(a, b)| a + b)
                .collect();
            let (dh_prev, dc_prev) = match (self, &mut grads) {
                (CellParams::Classic(p), CellParams::Classic(g)) => step_backward(
                    p,
                    None,
                    &caches[t],
                    &dh,
                    &dc_next,
                    g,
                    None,
                    dxs[t].as_mut_slice(),
                    None,
                ),
                (CellParams::AspectAware(p), CellParams::AspectAware(g)) => step_backward(
                    &p.core,
                    Some(&p.aspect),
                    &caches[t],
                    &dh,
                    &dc_next,
                    &mut g.core,
                    Some(&mut g.aspect),
                    dxs[t].as_mut_slice(),
                    d_aspect.as_mut().map(|v| v.as_mut_slice()),
                ),
                _ => unreachable!("gradient layout mirrors parameters"),
            };
            dh_next = dh_prev;
            dc_next = dc_prev;
        }

        Ok(CellGradients {
            params: grads,
            dxs,
            d_aspect,
            d_init: CellState {
                h: Vector::from_vec(dh_next),
                c: Vector::from_vec(dc_next),
            },
        })
    }
}

/// Backward through one step. Accumulates parameter gradients into `g` and
/// `g_aspect`, input gradients into `dx`, aspect gradients into `d_aspect`,
/// and returns `(dL/dh_{t-1}, dL/dC_{t-1})`.
#[allow(clippy::too_many_arguments)]
fn step_backward(
    core: &LstmParams,
    aspect: Option<&AspectGateParams>,
    cache: &StepCache,
    dh: &[f64],
    dc_next: &[f64],
    g: &mut LstmParams,
    g_aspect: Option<&mut AspectGateParams>,
    dx: &mut [f64],
    d_aspect: Option<&mut [f64]>,
) -> (Vec<f64>, Vec<f64>) {
    let n = dh.len();
    let nx = dx.len();
    let mut dz_i = vec![0.0; n];
    let mut dz_f = vec![0.0; n];
    let mut dz_o = vec![0.0; n];
    let mut dz_c = vec![0.0; n];
    let mut dc_prev = vec![0.0; n];
    for k in 0..n {
        let (i, f, o, ct, tc) = (
            cache.i[k],
            cache.f[k],
            cache.o[k],
            cache.c_tilde[k],
            cache.tanh_c[k],
        );
        let d_o = dh[k] * tc;
        let d_c = dc_next[k] + dh[k] * o * (1.0 - tc * tc);
        dc_prev[k] = d_c * f;
        dz_f[k] = d_c * cache.c_prev[k] * f * (1.0 - f);
        dz_i[k] = d_c * ct * i * (1.0 - i);
        dz_c[k] = d_c * i * (1.0 - ct * ct);
        dz_o[k] = d_o * o * (1.0 - o);
    }

    let xh = [cache.x.as_slice(), cache.h_prev.as_slice()].concat();
    let mut d_xh = vec![0.0; xh.len()];
    for (w, gw, gb, dz) in [
        (&core.w_i, &mut g.w_i, &mut g.b_i, &dz_i),
        (&core.w_f, &mut g.w_f, &mut g.b_f, &dz_f),
        (&core.w_c, &mut g.w_c, &mut g.b_c, &dz_c),
        (&core.w_o, &mut g.w_o, &mut g.b_o, &dz_o),
    ] {
        gw.outer_acc(dz, &xh);
        crate::tensor::axpy(1.0, dz, gb.as_mut_slice());
        w.matvec_transposed_acc(dz, &mut d_xh);
    }
    crate::tensor::axpy(1.0, &d_xh[..nx], dx);
    let mut dh_prev = d_xh[nx..].to_vec();

    if let (Some(ap), Some(ga), Some((a, gates))) =
        (aspect, g_aspect, cache.aspect.as_ref())
    {
        let da = a.dim();
        let ah = [a.as_slice(), cache.h_prev.as_slice()].concat();
        let mut d_ah = vec![0.0; ah.len()];
        let d_a = d_aspect.expect("aspect gradient buffer");
        for (w, gw, gb, gate, dz) in [
            (&ap.w_ai, &mut ga.w_ai, &mut ga.b_ai, &gates.a_i, &dz_i),
            (&ap.w_af, &mut ga.w_af, &mut ga.b_af, &gates.a_f, &dz_f),
            (&ap.w_ao, &mut ga.w_ao, &mut ga.b_ao, &gates.a_o, &dz_o),
        ] {
            // z_gate += a_gate ⊙ A
            let mut dz_a = vec![0.0; da];
            for k in 0..da {
                d_a[k] += dz[k] * gate[k];
                dz_a[k] = dz[k] * a[k] * gate[k] * (1.0 - gate[k]);
            }
            gw.outer_acc(&dz_a, &ah);
            crate::tensor::axpy(1.0, &dz_a, gb.as_mut_slice());
            w.matvec_transposed_acc(&dz_a, &mut d_ah);
        }
        crate::tensor::axpy(1.0, &d_ah[..da], d_a);
        crate::tensor::axpy(1.0, &d_ah[da..], &mut dh_prev);
    }

    (dh_prev, dc_prev)
}

impl Parameters for CellParams {
    fn tensors(&self) -> Vec<Tensor<'_>> {
        let inner = match self {
            CellParams::Classic(p) => p.tensors(),
            CellParams::AspectAware(p) => p.tensors(),
        };
        prefixed("cell", inner).collect()
    }

    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let inner = match self {
            CellParams::Classic(p) => p.tensors_mut(),
            CellParams::AspectAware(p) => p.tensors_mut(),
        };
        prefixed_mut("cell", inner).collect()
    }
}

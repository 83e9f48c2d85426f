//! Dense row-major matrices and vectors in double precision, plus the
//! elementwise kernels the recurrent cells and heads are built from.
//!
//! Shape-checked operations return [`Error::Shape`]. The `*_into` and
//! `*_acc` kernels are crate-internal and assume shapes were validated by
//! the caller.

use std::fmt;

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// The generator behind every seeded draw in the crate: ChaCha with 8
/// rounds, a counter-based stream cipher whose output is identical across
/// platforms for a given 64-bit seed.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest double strictly below 1.
const ONE_MINUS_ULP: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Vector {
            data: vec![0.0; dim],
        }
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Vector {
            data: vec![value; dim],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Vector { data }
    }

    pub fn uniform<R: Rng + ?Sized>(dim: usize, lo: f64, hi: f64, rng: &mut R) -> Result<Self> {
        let dist = uniform_dist(lo, hi)?;
        Ok(Vector {
            data: (0..dim).map(|_| dist.sample(rng)).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        same_dim("dot", self, other)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        same_dim("add", self, other)?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        same_dim("sub", self, other)?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    pub fn scale(&self, alpha: f64) -> Vector {
        self.map(|x| alpha * x)
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Vector) -> Result<()> {
        same_dim("axpy", self, other)?;
        axpy(alpha, &other.data, &mut self.data);
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Vector {
        Vector {
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub(crate) fn zip_map(&self, other: &Vector, f: impl Fn(f64, f64) -> f64) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, nan_max_abs)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &x) in self.data.iter().enumerate() {
            if x > self.data[best] {
                best = i;
            }
        }
        best
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Splits into the first `at` entries and the rest.
    pub fn split_at(&self, at: usize) -> (Vector, Vector) {
        let (a, b) = self.data.split_at(at);
        (Vector::from_vec(a.to_vec()), Vector::from_vec(b.to_vec()))
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Vector { data }
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::from_vec",
                format!("{rows}x{cols}"),
                format!("{} values", data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::shape(
                    "Matrix::from_rows",
                    format!("row 0 has {cols} columns"),
                    format!("row {i} has {}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn uniform<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        lo: f64,
        hi: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let dist = uniform_dist(lo, hi)?;
        Ok(Matrix {
            rows,
            cols,
            data: (0..rows * cols).map(|_| dist.sample(rng)).collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_vector(&self, r: usize) -> Vector {
        Vector::from_vec(self.row(r).to_vec())
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    /// `M · v`
    pub fn matvec(&self, v: &Vector) -> Result<Vector> {
        if self.cols != v.dim() {
            return Err(Error::shape(
                "matvec",
                format!("matrix {}x{}", self.rows, self.cols),
                format!("vector of dim {}", v.dim()),
            ));
        }
        let mut out = vec![0.0; self.rows];
        self.matvec_into(v.as_slice(), &mut out);
        Ok(Vector::from_vec(out))
    }

    /// `Mᵀ · v`
    pub fn matvec_transposed(&self, v: &Vector) -> Result<Vector> {
        if self.rows != v.dim() {
            return Err(Error::shape(
                "matvec_transposed",
                format!("matrix {}x{} (transposed)", self.rows, self.cols),
                format!("vector of dim {}", v.dim()),
            ));
        }
        let mut out = vec![0.0; self.cols];
        self.matvec_transposed_acc(v.as_slice(), &mut out);
        Ok(Vector::from_vec(out))
    }

    pub(crate) fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols.max(1))) {
            *o = dot(row, v);
        }
    }

    /// `out += Mᵀ · v`
    pub(crate) fn matvec_transposed_acc(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        if self.cols == 0 {
            return;
        }
        for (&vi, row) in v.iter().zip(self.data.chunks_exact(self.cols)) {
            if vi != 0.0 {
                axpy(vi, row, out);
            }
        }
    }

    /// `self += u · vᵀ`
    pub(crate) fn outer_acc(&mut self, u: &[f64], v: &[f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        if self.cols == 0 {
            return;
        }
        for (&ui, row) in u.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            if ui != 0.0 {
                axpy(ui, v, row);
            }
        }
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

pub fn matvec(m: &Matrix, v: &Vector) -> Result<Vector> {
    m.matvec(v)
}

/// `a` followed by `b`.
pub fn concat(a: &Vector, b: &Vector) -> Vector {
    let mut data = Vec::with_capacity(a.dim() + b.dim());
    data.extend_from_slice(a.as_slice());
    data.extend_from_slice(b.as_slice());
    Vector::from_vec(data)
}

pub fn hadamard(a: &Vector, b: &Vector) -> Result<Vector> {
    same_dim("hadamard", a, b)?;
    Ok(a.zip_map(b, |x, y| x * y))
}

/// Running maximum of `|x|` that turns NaN once any NaN is seen.
pub(crate) fn nan_max_abs(m: f64, x: &f64) -> f64 {
    if m.is_nan() || x.is_nan() {
        f64::NAN
    } else {
        m.max(x.abs())
    }
}

/// Logistic function, branching on sign so `exp` never overflows. The
/// result is clamped into the open interval (0, 1): large |x| would
/// otherwise round to exactly 0 or 1 in double precision.
pub fn sigmoid_scalar(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, ONE_MINUS_ULP)
}

/// `tanh` clamped into the open interval (-1, 1).
pub fn tanh_scalar(x: f64) -> f64 {
    x.tanh().clamp(-ONE_MINUS_ULP, ONE_MINUS_ULP)
}

pub fn sigmoid(v: &Vector) -> Vector {
    v.map(sigmoid_scalar)
}

pub fn tanh_v(v: &Vector) -> Vector {
    v.map(tanh_scalar)
}

/// Max-subtracted softmax.
pub fn softmax(v: &Vector) -> Vector {
    let max = v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let exps: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Vector::from_vec(exps.into_iter().map(|e| e / total).collect())
}

/// A `rows x cols` matrix with entries drawn from `U[lo, hi)` by a
/// generator seeded with `seed`.
pub fn uniform_init(rows: usize, cols: usize, lo: f64, hi: f64, seed: u64) -> Result<Matrix> {
    Matrix::uniform(rows, cols, lo, hi, &mut seeded_rng(seed))
}

fn uniform_dist(lo: f64, hi: f64) -> Result<Uniform<f64>> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::arg(format!(
            "uniform bounds must satisfy lo < hi, got [{lo}, {hi})"
        )));
    }
    Ok(Uniform::new(lo, hi))
}

fn same_dim(op: &'static str, a: &Vector, b: &Vector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::shape(
            op,
            format!("dim {}", a.dim()),
            format!("dim {}", b.dim()),
        ));
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_vec(xs.to_vec())
    }

    #[test]
    fn matvec_identity_and_zero() {
        let x = v(&[1.0, 2.0, 3.0]);
        assert_eq!(Matrix::identity(3).matvec(&x).unwrap(), x);
        assert_eq!(Matrix::zeros(2, 3).matvec(&x).unwrap(), v(&[0.0, 0.0]));
    }

    #[test]
    fn matvec_by_hand() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.matvec(&v(&[1.0, 1.0])).unwrap(), v(&[3.0, 7.0]));
        assert_eq!(m.matvec_transposed(&v(&[1.0, 1.0])).unwrap(), v(&[4.0, 6.0]));
    }

    #[test]
    fn matvec_shape_error_names_both_shapes() {
        let err = Matrix::zeros(2, 3).matvec(&v(&[1.0, 2.0])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3") && msg.contains("dim 2"), "{msg}");
    }

    #[test]
    fn concat_cases() {
        assert_eq!(concat(&v(&[1.0, 2.0]), &v(&[3.0])), v(&[1.0, 2.0, 3.0]));
        assert_eq!(concat(&v(&[]), &v(&[5.0])), v(&[5.0]));
        assert_eq!(concat(&v(&[0.0, 0.0]), &v(&[0.0])), v(&[0.0, 0.0, 0.0]));
    }

    #[test]
    fn hadamard_cases() {
        let a = v(&[1.0, 2.0]);
        assert_eq!(hadamard(&a, &v(&[3.0, 4.0])).unwrap(), v(&[3.0, 8.0]));
        assert_eq!(hadamard(&a, &Vector::zeros(2)).unwrap(), Vector::zeros(2));
        assert_eq!(hadamard(&a, &Vector::filled(2, 1.0)).unwrap(), a);
        assert!(matches!(
            hadamard(&a, &Vector::zeros(3)),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn activations_at_zero() {
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        assert_eq!(tanh_scalar(0.0), 0.0);
    }

    #[test]
    fn sigmoid_is_stable_far_from_zero() {
        let s = sigmoid_scalar(-1000.0);
        assert!(s > 0.0 && s <= 1e-12, "{s}");
        let s = sigmoid_scalar(1000.0);
        assert!(s < 1.0 && s > 1.0 - 1e-12, "{s}");
        // ln σ(-x) = -x - ln(1 + e^-x) ≈ -x for large x
        let s = sigmoid_scalar(-700.0);
        assert!(((s.ln() + 700.0) / 700.0).abs() < 1e-12);
        for x in [-500.0, -50.0, 50.0, 500.0] {
            let t = tanh_scalar(x);
            assert!(t > -1.0 && t < 1.0);
        }
    }

    #[test]
    fn uniform_init_bounds_and_determinism() {
        let lo = 1.0;
        let hi = lo + 1e-9;
        let m = uniform_init(10, 10, lo, hi, 3).unwrap();
        assert!(m.as_slice().iter().all(|&x| x >= lo && x < hi));

        let a = uniform_init(4, 5, -0.1, 0.1, 42).unwrap();
        let b = uniform_init(4, 5, -0.1, 0.1, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, uniform_init(4, 5, -0.1, 0.1, 43).unwrap());

        assert!(matches!(
            uniform_init(2, 2, 0.1, 0.1, 0),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            uniform_init(2, 2, 0.2, 0.1, 0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn uniform_init_mean() {
        let m = uniform_init(100, 100, -0.1, 0.1, 7).unwrap();
        let mean = m.as_slice().iter().sum::<f64>() / 1e4;
        assert!(mean.abs() < 0.01, "{mean}");
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&v(&[1000.0, 0.0, 0.0]));
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(p.is_finite());
    }

    fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0..10.0f64, n)
    }

    proptest! {
        #[test]
        fn matvec_is_linear(
            m in vec_strategy(12),
            a in vec_strategy(4),
            b in vec_strategy(4),
            alpha in -5.0..5.0f64,
            beta in -5.0..5.0f64,
        ) {
            let m = Matrix::from_vec(3, 4, m).unwrap();
            let a = Vector::from_vec(a);
            let b = Vector::from_vec(b);
            let combo = a.scale(alpha).add(&b.scale(beta)).unwrap();
            let lhs = m.matvec(&combo).unwrap();
            let rhs = m.matvec(&a).unwrap().scale(alpha)
                .add(&m.matvec(&b).unwrap().scale(beta)).unwrap();
            let scale = 1.0 + m.as_slice().iter().map(|x| x.abs()).sum::<f64>()
                * (alpha.abs() * a.max_abs() + beta.abs() * b.max_abs());
            for i in 0..3 {
                prop_assert!((lhs[i] - rhs[i]).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn sigmoid_and_tanh_symmetry(x in -500.0..500.0f64) {
            prop_assert!((sigmoid_scalar(x) + sigmoid_scalar(-x) - 1.0).abs() <= 1e-12);
            prop_assert!((tanh_scalar(-x) + tanh_scalar(x)).abs() <= 1e-12);
            let s = sigmoid_scalar(x);
            prop_assert!(s > 0.0 && s < 1.0);
        }

        #[test]
        fn softmax_shift_invariance(xs in vec_strategy(3), c in -100.0..100.0f64) {
            let p = softmax(&Vector::from_vec(xs.clone()));
            let q = softmax(&Vector::from_vec(xs.iter().map(|x| x + c).collect()));
            for i in 0..3 {
                prop_assert!((p[i] - q[i]).abs() <= 1e-12);
            }
            prop_assert!((p.sum() - 1.0).abs() <= 1e-12);
        }
    }
}

//! Named views over parameter structs, shared by the optimizer, the L2
//! penalty, the gradient checker and checkpoint serialization.

use crate::tensor::{nan_max_abs, Matrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    /// Word or aspect embedding rows.
    Embedding,
}

pub struct Tensor<'a> {
    pub name: String,
    pub kind: ParamKind,
    pub shape: (usize, usize),
    pub data: &'a [f64],
}

pub struct TensorMut<'a> {
    pub name: String,
    pub kind: ParamKind,
    pub shape: (usize, usize),
    pub data: &'a mut [f64],
}

/// A struct of weight matrices and bias vectors. Gradients use the same
/// type as the parameters they belong to, so `tensors()` of a parameter set
/// and of its gradient line up index by index.
pub trait Parameters {
    fn tensors(&self) -> Vec<Tensor<'_>>;
    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>>;

    fn zeros_like(&self) -> Self
    where
        Self: Clone,
    {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x = value);
        }
    }

    fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// `self += alpha * other`; both must come from the same layout.
    fn add_scaled(&mut self, alpha: f64, other: &Self) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            debug_assert_eq!(dst.shape, src.shape);
            crate::tensor::axpy(alpha, src.data, dst.data);
        }
    }

    fn max_abs(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter())
            .fold(0.0, nan_max_abs)
    }
}

pub(crate) trait AsTensor {
    fn tensor(&self, name: &str, kind: ParamKind) -> Tensor<'_>;
    fn tensor_mut(&mut self, name: &str, kind: ParamKind) -> TensorMut<'_>;
}

impl AsTensor for Matrix {
    fn tensor(&self, name: &str, kind: ParamKind) -> Tensor<'_> {
        Tensor {
            name: name.to_string(),
            kind,
            shape: self.shape(),
            data: self.as_slice(),
        }
    }

    fn tensor_mut(&mut self, name: &str, kind: ParamKind) -> TensorMut<'_> {
        TensorMut {
            name: name.to_string(),
            kind,
            shape: self.shape(),
            data: self.as_mut_slice(),
        }
    }
}

impl AsTensor for Vector {
    fn tensor(&self, name: &str, kind: ParamKind) -> Tensor<'_> {
        Tensor {
            name: name.to_string(),
            kind,
            shape: (self.dim(), 1),
            data: self.as_slice(),
        }
    }

    fn tensor_mut(&mut self, name: &str, kind: ParamKind) -> TensorMut<'_> {
        TensorMut {
            name: name.to_string(),
            kind,
            shape: (self.dim(), 1),
            data: self.as_mut_slice(),
        }
    }
}

/// Implements [`Parameters`] for a struct whose fields are all matrices or
/// vectors, each tagged with its [`ParamKind`].
macro_rules! impl_parameters {
    ($ty:ty { $($field:ident : $kind:ident),* $(,)? }) => {
        impl $crate::params::Parameters for $ty {
            fn tensors(&self) -> Vec<$crate::params::Tensor<'_>> {
                use $crate::params::AsTensor;
                vec![$(self.$field.tensor(stringify!($field), $crate::params::ParamKind::$kind)),*]
            }

            fn tensors_mut(&mut self) -> Vec<$crate::params::TensorMut<'_>> {
                use $crate::params::AsTensor;
                vec![$(self.$field.tensor_mut(stringify!($field), $crate::params::ParamKind::$kind)),*]
            }
        }
    };
}

pub(crate) use impl_parameters;

pub(crate) fn prefixed<'a>(prefix: &str, ts: Vec<Tensor<'a>>) -> impl Iterator<Item = Tensor<'a>> {
    let prefix = prefix.to_string();
    ts.into_iter().map(move |mut t| {
        t.name = format!("{prefix}.{}", t.name);
        t
    })
}

pub(crate) fn prefixed_mut<'a>(
    prefix: &str,
    ts: Vec<TensorMut<'a>>,
) -> impl Iterator<Item = TensorMut<'a>> {
    let prefix = prefix.to_string();
    ts.into_iter().map(move |mut t| {
        t.name = format!("{prefix}.{}", t.name);
        t
    })
}

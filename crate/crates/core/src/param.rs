//! Named trainable tensors with gradient and Adam moment slots.

use rand::Rng;

use crate::error::{ensure, Result};
use crate::tensor::{Shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A trainable tensor. `value`, `grad`, `m` and `v` always share one shape.
#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    /// Logical dimensions as serialized (rank 4 for conv kernels, rank 1 for
    /// biases).
    pub dims: Vec<usize>,
    pub value: Tensor,
    pub grad: Tensor,
    pub m: Tensor,
    pub v: Tensor,
    pub step: u64,
}

impl Param {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, value: Tensor) -> Result<Self> {
        ensure!(
            (1..=4).contains(&dims.len()),
            "parameter rank must be 1..=4, got {}",
            dims.len()
        );
        let shape = storage_shape(&dims);
        ensure!(
            value.shape() == shape,
            "parameter value {} does not match dims {dims:?}",
            value.shape()
        );
        let zeros = Tensor::zeros(shape);
        Ok(Param {
            name: name.into(),
            dims,
            value,
            grad: zeros.clone(),
            m: zeros.clone(),
            v: zeros,
            step: 0,
        })
    }

    pub fn numel(&self) -> usize {
        self.value.numel()
    }
}

/// How a logical parameter shape maps onto a rank-4 tensor: vectors become
/// `(1, n, 1, 1)` so they broadcast over channels, other ranks are
/// right-aligned.
pub fn storage_shape(dims: &[usize]) -> Shape {
    match dims {
        [n] => Shape::new(1, *n, 1, 1),
        _ => {
            let mut s = [1; 4];
            s[4 - dims.len()..].copy_from_slice(dims);
            Shape(s)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Zeros,
    /// Uniform in `±sqrt(6 / fan_in)`.
    KaimingUniform { fan_in: usize },
    Constant(f32),
}

/// An ordered collection of parameters addressed by [`ParamId`].
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add<R: Rng + ?Sized>(&mut self, name: impl Into<String>, dims: &[usize], init: Init, rng: &mut R) -> ParamId {
        let name = name.into();
        debug_assert!(self.find(&name).is_none(), "duplicate parameter {name}");
        let shape = storage_shape(dims);
        let value = match init {
            Init::Zeros => Tensor::zeros(shape),
            Init::Constant(v) => Tensor::full(shape, v),
            Init::KaimingUniform { fan_in } => {
                let bound = (6.0 / fan_in.max(1) as f32).sqrt();
                Tensor::rand_uniform(shape, -bound, bound, rng)
            }
        };
        let id = ParamId(self.params.len());
        self.params
            .push(Param::new(name, dims.to_vec(), value).expect("storage shape matches dims"));
        id
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Total number of scalar weights.
    pub fn count(&self) -> usize {
        self.params.iter().map(Param::numel).sum()
    }

    /// Scalar count of every parameter whose name starts with `prefix`.
    pub fn count_prefix(&self, prefix: &str) -> usize {
        self.params
            .iter()
            .filter(|p| p.name.starts_with(prefix))
            .map(Param::numel)
            .sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Replace every value with uniform noise in `±scale`. Used to exercise
    /// paths that zero initialization would otherwise switch off.
    pub fn randomize<R: Rng + ?Sized>(&mut self, scale: f32, rng: &mut R) {
        for p in &mut self.params {
            p.value = Tensor::rand_uniform(p.value.shape(), -scale, scale, rng);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn storage_shapes() {
        assert_eq!(storage_shape(&[5]), Shape::new(1, 5, 1, 1));
        assert_eq!(storage_shape(&[4, 2, 3, 3]), Shape::new(4, 2, 3, 3));
        assert_eq!(storage_shape(&[3, 7]), Shape::new(1, 1, 3, 7));
    }

    #[test]
    fn slots_share_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let id = store.add("conv.weight", &[8, 4, 3, 3], Init::KaimingUniform { fan_in: 36 }, &mut rng);
        let p = store.get(id);
        assert_eq!(p.value.shape(), p.grad.shape());
        assert_eq!(p.m.shape(), p.v.shape());
        let bound = (6.0f32 / 36.0).sqrt();
        assert!(p.value.data().iter().all(|v| v.abs() <= bound));
        assert_eq!(store.count(), 288);
        assert_eq!(store.find("conv.weight"), Some(id));
    }
}

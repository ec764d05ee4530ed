//! Central-difference checks for every block and the full network, with
//! randomized weights so that zero-initialized layers carry gradient too.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mlcraist::blocks::{Afb, AfbMode, Cab, Esa, Lcb, ParamBuilder, Scatb};
use mlcraist::gradcheck::{all_entries, grad_check_params, grad_check_with, DEFAULT_EPS};
use mlcraist::{MlCraist, ModelConfig, ParamStore, Result, Tape, Tensor, Var};

/// Worst relative error over input and parameter gradients.
#[derive(Clone, Copy, Debug)]
pub struct GradReport {
    pub input: f64,
    pub params: f64,
    pub checked: usize,
}

impl GradReport {
    pub fn worst(&self) -> f64 {
        self.input.max(self.params)
    }
}

fn check<F>(store: &mut ParamStore, x: &Tensor, f: F) -> GradReport
where
    F: for<'a> Fn(&mut Tape<'a>, Var) -> Result<Var>,
{
    let input = grad_check_with(store, &f, x, DEFAULT_EPS).unwrap();
    let entries = all_entries(store);
    let params = grad_check_params(store, &entries, DEFAULT_EPS, |t| {
        let xv = t.input(x.clone());
        f(t, xv)
    })
    .unwrap();
    GradReport {
        input,
        params,
        checked: x.numel() + entries.len(),
    }
}

fn setup<T>(seed: u64, dims: [usize; 4], make: impl FnOnce(&mut ParamBuilder<'_>) -> T) -> (ParamStore, T, Tensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let block = make(&mut ParamBuilder::new(&mut store, &mut rng));
    store.randomize(0.3, &mut rng);
    let x = Tensor::rand_uniform(dims, -1.0, 1.0, &mut rng);
    (store, block, x)
}

pub fn lcb(seed: u64) -> GradReport {
    let (mut store, block, x) = setup(seed, [1, 4, 5, 6], |pb| Lcb::new(pb, 4));
    check(&mut store, &x, |t, v| block.forward(t, v))
}

pub fn osa(seed: u64) -> GradReport {
    let (mut store, block, x) = setup(seed, [1, 4, 4, 4], |pb| Scatb::new(pb, 4, 2, 2).unwrap());
    check(&mut store, &x, |t, v| block.osa(t, v))
}

pub fn esa(seed: u64) -> GradReport {
    let (mut store, block, x) = setup(seed, [1, 4, 9, 8], |pb| Esa::new(pb, 4));
    check(&mut store, &x, |t, v| block.forward(t, v))
}

pub fn scatb(seed: u64) -> GradReport {
    let (mut store, block, x) = setup(seed, [1, 4, 8, 8], |pb| Scatb::new(pb, 4, 2, 4).unwrap());
    check(&mut store, &x, |t, v| block.forward(t, v))
}

/// The three bands are stacked along batch in the probe input.
pub fn afb(seed: u64) -> GradReport {
    let (mut store, block, x) = setup(seed, [3, 4, 3, 4], |pb| Afb::new(pb, 4, AfbMode::Attention));
    check(&mut store, &x, |t, v| {
        let parts = split_batch(t, v, 3)?;
        block.forward(t, parts[0], parts[1], parts[2])
    })
}

pub fn cab(seed: u64) -> GradReport {
    let (mut store, block, x) = setup(seed, [2, 4, 3, 4], |pb| Cab::new(pb, 4));
    check(&mut store, &x, |t, v| {
        let parts = split_batch(t, v, 2)?;
        block.forward(t, parts[0], parts[1])
    })
}

/// Split `(n, c, h, w)` into `n` single-item variables through a reshape and
/// channel slices, so gradients flow back to the shared input.
fn split_batch(t: &mut Tape<'_>, v: Var, n: usize) -> Result<Vec<Var>> {
    let [_, c, h, w] = t.shape(v).0;
    let flat = t.reshape(v, [1, n * c, h, w])?;
    t.chunk_channels(flat, n)
}

pub fn model_config() -> ModelConfig {
    ModelConfig {
        width: 8,
        n_scatb: 1,
        heads: 2,
        window: 4,
        ..ModelConfig::full(2)
    }
}

/// The full network on a `(1, 3, 16, 16)` input.
pub fn model(seed: u64) -> GradReport {
    let mut m = MlCraist::new(model_config(), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    m.store.randomize(0.2, &mut rng);
    let x = Tensor::rand_uniform([1, 3, 16, 16], 0.0, 1.0, &mut rng);
    let net = m.net.clone();
    check(&mut m.store, &x, |t, v| net.forward(t, v))
}

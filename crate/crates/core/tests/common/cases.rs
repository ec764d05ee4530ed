//! Random small instances comparing library operators against the oracles.
//! Each function returns the maximum absolute deviation for one seed.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mlcraist::blocks::{Afb, AfbMode, Cab, ParamBuilder, Scatb};
use mlcraist::ops::{conv2d_forward, matmul_ex, softmax_last, ConvSpec};
use mlcraist::{MlCraist, ModelConfig, ParamStore, Tape, Tensor};

use super::{Arr, Params};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand_t<R: Rng>(dims: [usize; 4], r: &mut R) -> Tensor {
    Tensor::rand_uniform(dims, -1.0, 1.0, r)
}

pub fn conv2d(seed: u64) -> f64 {
    let mut r = rng(seed);
    let groups = [1, 1, 2, 3][r.gen_range(0..4)];
    let icg = r.gen_range(1..4);
    let ocg = r.gen_range(1..4);
    let k = [1, 3, 5][r.gen_range(0..3)];
    let stride = r.gen_range(1..3);
    let pad = r.gen_range(0..=k / 2);
    let (h, w) = (r.gen_range(k..k + 6), r.gen_range(k..k + 6));
    let b = r.gen_range(1..3);
    let x = rand_t([b, icg * groups, h, w], &mut r);
    let wt = rand_t([ocg * groups, icg, k, k], &mut r);
    let bias = rand_t([1, 1, 1, ocg * groups], &mut r);
    let y = conv2d_forward(&x, &wt, Some(&bias), ConvSpec::new(stride, pad, groups)).unwrap();
    let want = super::conv2d(
        &Arr::from_tensor(&x),
        &Arr::from_tensor(&wt),
        Some(&Arr::from_tensor(&bias)),
        stride,
        pad,
        groups,
    );
    want.max_abs_diff(&y)
}

pub fn matmul(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (b0, b1) = (r.gen_range(1..3), r.gen_range(1..3));
    let (m, k, n) = (r.gen_range(1..9), r.gen_range(1..9), r.gen_range(1..9));
    let (ta, tb) = (r.gen_bool(0.5), r.gen_bool(0.5));
    let a = rand_t(if ta { [b0, b1, k, m] } else { [b0, b1, m, k] }, &mut r);
    let b = rand_t(if tb { [b0, b1, n, k] } else { [b0, b1, k, n] }, &mut r);
    let y = matmul_ex(&a, ta, &b, tb).unwrap();
    super::matmul(&Arr::from_tensor(&a), ta, &Arr::from_tensor(&b), tb).max_abs_diff(&y)
}

pub fn softmax(seed: u64) -> f64 {
    let mut r = rng(seed);
    let dims = [r.gen_range(1..3), r.gen_range(1..3), r.gen_range(1..6), r.gen_range(1..12)];
    let spread = [1.0f32, 10.0, 80.0][r.gen_range(0..3)];
    let x = Tensor::rand_uniform(dims, -spread, spread, &mut r);
    super::softmax(&Arr::from_tensor(&x)).max_abs_diff(&softmax_last(&x))
}

/// A randomized block of any kind, so zero-initialized layers take part.
fn build<T>(seed: u64, make: impl FnOnce(&mut ParamBuilder<'_>) -> T) -> (ParamStore, T) {
    let mut r = rng(seed ^ 0x5eed);
    let mut store = ParamStore::new();
    let block = make(&mut ParamBuilder::new(&mut store, &mut r));
    store.randomize(0.3, &mut r);
    (store, block)
}

pub fn osa(seed: u64) -> f64 {
    let mut r = rng(seed);
    let heads = r.gen_range(1..3);
    let c = heads * r.gen_range(1..3) * 2;
    let win = r.gen_range(1..4);
    let (h, w) = (win * r.gen_range(1..3), win * r.gen_range(1..3));
    let x = rand_t([r.gen_range(1..3), c, h, w], &mut r);
    let (store, block) = build(seed, |pb| Scatb::new(pb, c, heads, win).unwrap());
    let mut tape = Tape::with_params(&store);
    let xv = tape.constant(x.clone());
    let y = block.osa(&mut tape, xv).unwrap();
    Params(&store).osa("", &Arr::from_tensor(&x), heads, win).max_abs_diff(tape.value(y))
}

pub fn scatb(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (c, heads, win) = (8, 2, 4);
    let (h, w) = (win * r.gen_range(1..4), win * r.gen_range(1..4));
    let x = rand_t([1, c, h, w], &mut r);
    let (store, block) = build(seed, |pb| Scatb::new(pb, c, heads, win).unwrap());
    let mut tape = Tape::with_params(&store);
    let xv = tape.constant(x.clone());
    let y = block.forward(&mut tape, xv).unwrap();
    Params(&store).scatb("", &Arr::from_tensor(&x), heads, win).max_abs_diff(tape.value(y))
}

pub fn afb_mode(seed: u64, mode: AfbMode) -> f64 {
    let mut r = rng(seed);
    let c = r.gen_range(1..5);
    let dims = [r.gen_range(1..3), c, r.gen_range(1..6), r.gen_range(1..6)];
    let (lh, hl, hh) = (rand_t(dims, &mut r), rand_t(dims, &mut r), rand_t(dims, &mut r));
    let (store, block) = build(seed, |pb| Afb::new(pb, c, mode));
    let mut tape = Tape::with_params(&store);
    let v = [lh.clone(), hl.clone(), hh.clone()].map(|t| tape.constant(t));
    let y = block.forward(&mut tape, v[0], v[1], v[2]).unwrap();
    let [a, b, d] = [&lh, &hl, &hh].map(Arr::from_tensor);
    Params(&store).afb("", &a, &b, &d).max_abs_diff(tape.value(y))
}

pub fn afb(seed: u64) -> f64 {
    afb_mode(seed, AfbMode::Attention)
}

pub fn cab(seed: u64) -> f64 {
    let mut r = rng(seed);
    let c = r.gen_range(1..5);
    let dims = [r.gen_range(1..3), c, r.gen_range(1..6), r.gen_range(1..6)];
    let (fq, fkv) = (rand_t(dims, &mut r), rand_t(dims, &mut r));
    let (store, block) = build(seed, |pb| Cab::new(pb, c));
    let mut tape = Tape::with_params(&store);
    let (q, kv) = (tape.constant(fq.clone()), tape.constant(fkv.clone()));
    let y = block.forward(&mut tape, q, kv).unwrap();
    Params(&store)
        .cab("", &Arr::from_tensor(&fq), &Arr::from_tensor(&fkv))
        .max_abs_diff(tape.value(y))
}

/// The whole network with randomized weights against the straight-line
/// composition of the oracles.
pub fn model(seed: u64, cfg: ModelConfig, h: usize, w: usize) -> f64 {
    let mut m = MlCraist::new(cfg.clone(), seed).unwrap();
    let mut r = rng(seed);
    m.store.randomize(0.2, &mut r);
    let x = Tensor::rand_uniform([1, 3, h, w], 0.0, 1.0, &mut r);
    let y = m.forward(&x).unwrap();
    Params(&m.store).model(&cfg, &Arr::from_tensor(&x)).max_abs_diff(&y)
}

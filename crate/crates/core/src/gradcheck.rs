//! Central-difference verification of tape gradients.
//!
//! The objective is the sum of the graph output's elements, accumulated in
//! `f64`. Numeric derivatives combine central differences at steps `eps`
//! and `2·eps` by Richardson extrapolation, which cancels the second-order
//! truncation term and allows a step large enough to rise above `f32`
//! rounding in deep graphs. The reported error is
//! `max |analytic - numeric| / max(1, |analytic|)` over the checked entries.

use crate::error::Result;
use crate::param::{ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub const DEFAULT_EPS: f64 = 1e-2;

fn objective(tape: &Tape<'_>, out: Var) -> f64 {
    tape.value(out).sum()
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

/// Extrapolated central difference around the value in `slot`. Steps are
/// the ones actually representable in `f32`.
fn central_difference(slot: &mut f32, eps: f64, mut eval: impl FnMut(&mut f32) -> Result<f64>) -> Result<f64> {
    let orig = *slot;
    let mut diff = |h: f64, slot: &mut f32| -> Result<(f64, f64)> {
        let plus = (orig as f64 + h) as f32;
        let minus = (orig as f64 - h) as f32;
        *slot = plus;
        let fp = eval(slot)?;
        *slot = minus;
        let fm = eval(slot)?;
        *slot = orig;
        let width = plus as f64 - minus as f64;
        Ok(((fp - fm) / width, width))
    };
    let (d1, w1) = diff(eps, slot)?;
    let (d2, w2) = diff(2.0 * eps, slot)?;
    let (a, b) = (w1 * w1, w2 * w2);
    Ok((b * d1 - a * d2) / (b - a))
}

/// Check the gradient of `sum(f(x))` with respect to every element of `x`.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: for<'a> Fn(&mut Tape<'a>, Var) -> Result<Var>,
{
    check_input(None, f, x, eps)
}

/// [`grad_check`] for functions that also read weights from `store`.
pub fn grad_check_with<F>(store: &ParamStore, f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: for<'a> Fn(&mut Tape<'a>, Var) -> Result<Var>,
{
    check_input(Some(store), f, x, eps)
}

fn tape_for(store: Option<&ParamStore>) -> Tape<'_> {
    store.map_or_else(Tape::new, Tape::with_params)
}

fn check_input<F>(store: Option<&ParamStore>, f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: for<'a> Fn(&mut Tape<'a>, Var) -> Result<Var>,
{
    let analytic = {
        let mut tape = tape_for(store);
        let xv = tape.input(x.clone());
        let out = f(&mut tape, xv)?;
        let grads = tape.backward(out)?;
        grads.wrt(xv).cloned().unwrap_or_else(|| Tensor::zeros(x.shape()))
    };
    let eval = |probe: &Tensor| -> Result<f64> {
        let mut tape = tape_for(store);
        let xv = tape.input(probe.clone());
        let out = f(&mut tape, xv)?;
        Ok(objective(&tape, out))
    };
    let mut probe = x.clone();
    let mut worst = 0f64;
    for i in 0..x.numel() {
        let mut slot = probe.data()[i];
        let numeric = central_difference(&mut slot, eps, |v| {
            probe.data_mut()[i] = *v;
            eval(&probe)
        })?;
        probe.data_mut()[i] = slot;
        worst = worst.max(rel_err(analytic.data()[i] as f64, numeric));
    }
    Ok(worst)
}

/// Check parameter gradients of `sum(f(tape))` at the given
/// `(parameter, flat element)` entries.
pub fn grad_check_params<F>(store: &mut ParamStore, entries: &[(ParamId, usize)], eps: f64, f: F) -> Result<f64>
where
    F: for<'a> Fn(&mut Tape<'a>) -> Result<Var>,
{
    let analytic: Vec<Option<Tensor>> = {
        let mut tape = Tape::with_params(store);
        let out = f(&mut tape)?;
        let grads = tape.backward(out)?;
        let mut by_id = vec![None; store.len()];
        for (id, g) in grads.params() {
            by_id[id.index()] = g.cloned();
        }
        by_id
    };
    let mut worst = 0f64;
    for &(id, i) in entries {
        let a = analytic[id.index()].as_ref().map_or(0.0, |g| g.data()[i] as f64);
        let mut slot = store.get(id).value.data()[i];
        let numeric = central_difference(&mut slot, eps, |v| {
            store.get_mut(id).value.data_mut()[i] = *v;
            let mut tape = Tape::with_params(store);
            let out = f(&mut tape)?;
            Ok(objective(&tape, out))
        })?;
        store.get_mut(id).value.data_mut()[i] = slot;
        worst = worst.max(rel_err(a, numeric));
    }
    Ok(worst)
}

/// Every element of every parameter.
pub fn all_entries(store: &ParamStore) -> Vec<(ParamId, usize)> {
    store
        .ids()
        .flat_map(|id| (0..store.get(id).numel()).map(move |i| (id, i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::ConvSpec;
    use crate::param::Init;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sum_of_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::rand_uniform([1, 2, 3, 3], -1.0, 1.0, &mut rng);
        let err = grad_check(|t, x| t.mul(x, x), &x, DEFAULT_EPS).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // sum(x) has gradient 1 everywhere; scale by 0 in the graph but feed
        // the difference through a constant to make the check disagree.
        let x = Tensor::ones([1, 1, 2, 2]);
        let err = grad_check(
            |t, x| {
                let y = t.value(x).clone();
                Ok(t.constant(y))
            },
            &x,
            DEFAULT_EPS,
        )
        .unwrap();
        assert!(err > 0.5);
    }

    #[test]
    fn l1_of_conv_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let w = store.add("w", &[3, 2, 3, 3], Init::KaimingUniform { fan_in: 18 }, &mut rng);
        let b = store.add("b", &[3], Init::Constant(0.1), &mut rng);
        let x = Tensor::rand_uniform([1, 2, 5, 5], -1.0, 1.0, &mut rng);
        // Keep every residual well away from the kink of |.|.
        let pred = crate::ops::conv2d_forward(&x, store.value(w), Some(store.value(b)), ConvSpec::same(3)).unwrap();
        let offset = Tensor::rand_uniform([1, 3, 5, 5], -0.5, 0.5, &mut rng);
        let target = pred.zip_map(&offset, |p, o| p + o + 0.1 * o.signum()).unwrap();
        let entries = all_entries(&store);
        let err = grad_check_params(&mut store, &entries, DEFAULT_EPS, |t| {
            let xv = t.constant(x.clone());
            let (wv, bv) = (t.param(w), t.param(b));
            let y = t.conv2d(xv, wv, Some(bv), ConvSpec::same(3))?;
            t.l1_loss(y, &target)
        })
        .unwrap();
        assert!(err < 1e-2, "{err}");
        let err = grad_check(
            |t, xv| {
                let wv = t.constant(store.value(w).clone());
                let bv = t.constant(store.value(b).clone());
                let y = t.conv2d(xv, wv, Some(bv), ConvSpec::same(3))?;
                t.l1_loss(y, &target)
            },
            &x,
            DEFAULT_EPS,
        )
        .unwrap();
        assert!(err < 1e-2, "{err}");
    }
}

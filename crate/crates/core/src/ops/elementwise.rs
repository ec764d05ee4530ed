//! Broadcasting binary arithmetic and pointwise activations.
//!
//! Broadcasting aligns the four axes position by position (all tensors are
//! rank 4, so trailing alignment and positional alignment coincide). An axis
//! broadcasts when either side has extent 1.

use crate::error::{ensure, Result};
use crate::tensor::{Shape, Tensor};

pub fn broadcast_shape(a: Shape, b: Shape) -> Result<Shape> {
    let mut out = [0; 4];
    for i in 0..4 {
        let (x, y) = (a.0[i], b.0[i]);
        ensure!(
            x == y || x == 1 || y == 1,
            "shapes {a} and {b} are not broadcastable"
        );
        out[i] = x.max(y);
    }
    Ok(Shape(out))
}

/// Index into a (possibly broadcast) operand for each output element.
fn broadcast_index(src: Shape, out: Shape) -> impl Fn(usize) -> usize {
    let st = src.strides();
    let mul: [usize; 4] = std::array::from_fn(|i| if src.0[i] == 1 { 0 } else { st[i] });
    let os = out.strides();
    move |flat| {
        let mut rem = flat;
        let mut idx = 0;
        for i in 0..4 {
            let coord = rem / os[i];
            rem %= os[i];
            idx += coord * mul[i];
        }
        idx
    }
}

fn binary(a: &Tensor, b: &Tensor, f: impl Fn(f32, f32) -> f32) -> Result<Tensor> {
    if a.shape() == b.shape() {
        return a.zip_map(b, f);
    }
    let shape = broadcast_shape(a.shape(), b.shape())?;
    let (ia, ib) = (broadcast_index(a.shape(), shape), broadcast_index(b.shape(), shape));
    let data = (0..shape.numel())
        .map(|i| f(a.data()[ia(i)], b.data()[ib(i)]))
        .collect();
    Tensor::from_vec(shape, data)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    binary(a, b, |x, y| x + y)
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    binary(a, b, |x, y| x * y)
}

/// Sum a gradient of the broadcast output shape back down to `target`.
pub fn reduce_to(grad: &Tensor, target: Shape) -> Tensor {
    if grad.shape() == target {
        return grad.clone();
    }
    let idx = broadcast_index(target, grad.shape());
    let mut acc = vec![0f64; target.numel()];
    for (i, &g) in grad.data().iter().enumerate() {
        acc[idx(i)] += g as f64;
    }
    Tensor::from_vec(target, acc.into_iter().map(|v| v as f32).collect()).expect("reduced shape")
}

/// Gradient of `a * b` with respect to `a` (swap the arguments for `b`).
pub fn mul_backward(dy: &Tensor, other: &Tensor, target: Shape) -> Result<Tensor> {
    Ok(reduce_to(&mul(dy, other)?, target))
}

const GELU_C: f32 = 0.797_884_6; // sqrt(2 / pi)

/// GELU, tanh approximation.
pub fn gelu(v: f32) -> f32 {
    0.5 * v * (1.0 + (GELU_C * (v + 0.044715 * v * v * v)).tanh())
}

pub fn gelu_grad(v: f32) -> f32 {
    let inner = GELU_C * (v + 0.044715 * v * v * v);
    let t = inner.tanh();
    let dinner = GELU_C * (1.0 + 3.0 * 0.044715 * v * v);
    0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dinner
}

pub fn relu(v: f32) -> f32 {
    v.max(0.0)
}

pub fn sigmoid(v: f32) -> f32 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

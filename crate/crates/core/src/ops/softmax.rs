use crate::tensor::Tensor;

/// Softmax over the last axis with max subtraction. Row sums are formed in
/// `f64`.
pub fn softmax_last(x: &Tensor) -> Tensor {
    let n = x.shape().w();
    let mut out = x.clone();
    if n == 0 {
        return out;
    }
    for row in out.data_mut().chunks_mut(n) {
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let mut sum = 0f64;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v as f64;
        }
        let inv = 1.0 / sum;
        for v in row.iter_mut() {
            *v = (*v as f64 * inv) as f32;
        }
    }
    out
}

/// `dx = y ⊙ (dy - Σ dy⊙y)` row by row, from the softmax output `y`.
pub fn softmax_last_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    let n = y.shape().w();
    let mut dx = dy.clone();
    if n == 0 {
        return dx;
    }
    for (g, yr) in dx.data_mut().chunks_mut(n).zip(y.data().chunks(n)) {
        let dot: f64 = g.iter().zip(yr).map(|(&a, &b)| a as f64 * b as f64).sum();
        for (gv, &yv) in g.iter_mut().zip(yr) {
            *gv = yv * (*gv - dot as f32);
        }
    }
    dx
}

use crate::error::{ensure, Result};
use crate::tensor::Tensor;

/// Max pooling with a square window clipped to the input extent, so maps
/// smaller than `kernel` still yield at least one output. Returns the pooled
/// map and the flat input index of every maximum (for the backward pass).
pub fn max_pool2d(x: &Tensor, kernel: usize, stride: usize) -> Result<(Tensor, Vec<usize>)> {
    let [b, c, h, w] = x.dims();
    ensure!(h >= 1 && w >= 1 && kernel >= 1 && stride >= 1, "max_pool2d on {}", x.shape());
    let (kh, kw) = (kernel.min(h), kernel.min(w));
    let (oh, ow) = ((h - kh) / stride + 1, (w - kw) / stride + 1);
    let mut out = Tensor::zeros([b, c, oh, ow]);
    let mut argmax = Vec::with_capacity(out.numel());
    let src = x.data();
    let mut o = 0;
    for p in 0..b * c {
        let base = p * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * stride * w + ox * stride;
                for ky in 0..kh {
                    for kx in 0..kw {
                        let i = base + (oy * stride + ky) * w + ox * stride + kx;
                        if src[i] > src[best] {
                            best = i;
                        }
                    }
                }
                out.data_mut()[o] = src[best];
                argmax.push(best);
                o += 1;
            }
        }
    }
    Ok((out, argmax))
}

pub fn max_pool2d_backward(dy: &Tensor, argmax: &[usize], in_shape: crate::tensor::Shape) -> Tensor {
    let mut dx = Tensor::zeros(in_shape);
    for (&g, &i) in dy.data().iter().zip(argmax) {
        dx.data_mut()[i] += g;
    }
    dx
}

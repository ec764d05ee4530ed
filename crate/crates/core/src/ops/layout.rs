//! Bijective index remappings (permute, window partition, pixel shuffle) and
//! the channel concat/slice, pad and crop helpers built on them.

use crate::error::{ensure, Result};
use crate::tensor::{Shape, Tensor};

pub fn invert_perm(perm: [usize; 4]) -> [usize; 4] {
    let mut inv = [0; 4];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// Output axis `i` is input axis `perm[i]`.
pub fn permute(x: &Tensor, perm: [usize; 4]) -> Result<Tensor> {
    let mut seen = [false; 4];
    for &p in &perm {
        ensure!(p < 4 && !seen[p], "invalid permutation {perm:?}");
        seen[p] = true;
    }
    let dims = x.dims();
    let out_shape = Shape(std::array::from_fn(|i| dims[perm[i]]));
    let in_strides = x.shape().strides();
    let st: [usize; 4] = std::array::from_fn(|i| in_strides[perm[i]]);
    let [d0, d1, d2, d3] = out_shape.0;
    let src = x.data();
    let mut out = Vec::with_capacity(x.numel());
    for i0 in 0..d0 {
        for i1 in 0..d1 {
            for i2 in 0..d2 {
                let base = i0 * st[0] + i1 * st[1] + i2 * st[2];
                out.extend((0..d3).map(|i3| src[base + i3 * st[3]]));
            }
        }
    }
    Tensor::from_vec(out_shape, out)
}

pub fn concat_channels(xs: &[&Tensor]) -> Result<Tensor> {
    ensure!(!xs.is_empty(), "concat of zero tensors");
    let [b, _, h, w] = xs[0].dims();
    for x in xs {
        let [xb, _, xh, xw] = x.dims();
        ensure!(
            (xb, xh, xw) == (b, h, w),
            "concat shape mismatch: {} vs {}",
            x.shape(),
            xs[0].shape()
        );
    }
    let c: usize = xs.iter().map(|x| x.shape().c()).sum();
    let plane = h * w;
    let mut out = Vec::with_capacity(b * c * plane);
    for n in 0..b {
        for x in xs {
            let per = x.shape().c() * plane;
            out.extend_from_slice(&x.data()[n * per..(n + 1) * per]);
        }
    }
    Tensor::from_vec([b, c, h, w], out)
}

/// Channels `start..start + len`.
pub fn slice_channels(x: &Tensor, start: usize, len: usize) -> Result<Tensor> {
    let [b, c, h, w] = x.dims();
    ensure!(start + len <= c, "channel slice {start}..{} out of {c}", start + len);
    let plane = h * w;
    let mut out = Vec::with_capacity(b * len * plane);
    for n in 0..b {
        out.extend_from_slice(&x.data()[(n * c + start) * plane..][..len * plane]);
    }
    Tensor::from_vec([b, len, h, w], out)
}

/// Write `grad` (a channel slice) back into a zero tensor of `full` shape.
pub fn unslice_channels(grad: &Tensor, full: Shape, start: usize) -> Tensor {
    let [b, c, h, w] = full.0;
    let len = grad.shape().c();
    let plane = h * w;
    let mut out = Tensor::zeros(full);
    for n in 0..b {
        out.data_mut()[(n * c + start) * plane..][..len * plane]
            .copy_from_slice(&grad.data()[n * len * plane..][..len * plane]);
    }
    out
}

/// Grow to `(out_h, out_w)` by repeating the last row and column.
pub fn pad_replicate(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let [b, c, h, w] = x.dims();
    ensure!(
        out_h >= h && out_w >= w && h > 0 && w > 0,
        "cannot replicate-pad {} to {out_h}x{out_w}",
        x.shape()
    );
    let mut out = Tensor::zeros([b, c, out_h, out_w]);
    for (src, dst) in x.data().chunks(h * w).zip(out.data_mut().chunks_mut(out_h * out_w)) {
        for y in 0..out_h {
            let row = &src[y.min(h - 1) * w..][..w];
            let drow = &mut dst[y * out_w..][..out_w];
            drow[..w].copy_from_slice(row);
            drow[w..].fill(row[w - 1]);
        }
    }
    Ok(out)
}

pub fn pad_replicate_backward(dy: &Tensor, in_shape: Shape) -> Tensor {
    let [_, _, h, w] = in_shape.0;
    let [_, _, out_h, out_w] = dy.dims();
    let mut dx = Tensor::zeros(in_shape);
    for (src, dst) in dy.data().chunks(out_h * out_w).zip(dx.data_mut().chunks_mut(h * w)) {
        for y in 0..out_h {
            let row = &src[y * out_w..][..out_w];
            let drow = &mut dst[y.min(h - 1) * w..][..w];
            for (d, &g) in drow.iter_mut().zip(&row[..w]) {
                *d += g;
            }
            drow[w - 1] += row[w..].iter().sum::<f32>();
        }
    }
    dx
}

/// Top-left `(h, w)` window.
pub fn crop(x: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    let [b, c, xh, xw] = x.dims();
    ensure!(h <= xh && w <= xw, "cannot crop {} to {h}x{w}", x.shape());
    let mut out = Vec::with_capacity(b * c * h * w);
    for plane in x.data().chunks(xh * xw) {
        for y in 0..h {
            out.extend_from_slice(&plane[y * xw..][..w]);
        }
    }
    Tensor::from_vec([b, c, h, w], out)
}

pub fn crop_backward(dy: &Tensor, in_shape: Shape) -> Tensor {
    let [_, _, xh, xw] = in_shape.0;
    let [_, _, h, w] = dy.dims();
    let mut dx = Tensor::zeros(in_shape);
    for (src, dst) in dy.data().chunks(h * w).zip(dx.data_mut().chunks_mut(xh * xw)) {
        for y in 0..h {
            dst[y * xw..][..w].copy_from_slice(&src[y * w..][..w]);
        }
    }
    dx
}

/// `(b, k*s², h, w) -> (b, k, s*h, s*w)` with
/// `out[b, k, s*i + di, s*j + dj] = in[b, k*s² + di*s + dj, i, j]`.
pub fn pixel_shuffle(x: &Tensor, s: usize) -> Result<Tensor> {
    let [b, c, h, w] = x.dims();
    ensure!(s >= 1 && c % (s * s) == 0, "pixel_shuffle: {c} channels not divisible by {}", s * s);
    let k = c / (s * s);
    let mut out = Tensor::zeros([b, k, s * h, s * w]);
    let (ow, src) = (s * w, x.data());
    let dst = out.data_mut();
    for n in 0..b {
        for kc in 0..k {
            for di in 0..s {
                for dj in 0..s {
                    let ci = kc * s * s + di * s + dj;
                    let plane = &src[(n * c + ci) * h * w..][..h * w];
                    let oplane = &mut dst[(n * k + kc) * s * h * ow..][..s * h * ow];
                    for i in 0..h {
                        let row = &plane[i * w..][..w];
                        let orow = &mut oplane[(s * i + di) * ow..][..ow];
                        for (j, &v) in row.iter().enumerate() {
                            orow[s * j + dj] = v;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle(x: &Tensor, s: usize) -> Result<Tensor> {
    let [b, k, sh, sw] = x.dims();
    ensure!(
        s >= 1 && sh % s == 0 && sw % s == 0,
        "pixel_unshuffle: {sh}x{sw} not divisible by {s}"
    );
    let (h, w) = (sh / s, sw / s);
    let c = k * s * s;
    let mut out = Tensor::zeros([b, c, h, w]);
    for n in 0..b {
        for kc in 0..k {
            for di in 0..s {
                for dj in 0..s {
                    let ci = kc * s * s + di * s + dj;
                    for i in 0..h {
                        for j in 0..w {
                            out.set(n, ci, i, j, x.at(n, kc, s * i + di, s * j + dj));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Geometry of non-overlapping square attention windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Windows {
    pub heads: usize,
    pub win: usize,
}

impl Windows {
    pub fn partitioned_shape(&self, x: Shape) -> Result<Shape> {
        let [b, c, h, w] = x.0;
        ensure!(self.heads >= 1 && c % self.heads == 0, "{c} channels not divisible into {} heads", self.heads);
        ensure!(
            self.win >= 1 && h % self.win == 0 && w % self.win == 0,
            "spatial size {h}x{w} not divisible by window {}",
            self.win
        );
        let n_win = (h / self.win) * (w / self.win);
        Ok(Shape::new(b * n_win, self.heads, self.win * self.win, c / self.heads))
    }

    /// `(b, c, h, w) -> (b * windows, heads, win², c / heads)`, windows in
    /// row-major order, pixels row-major inside each window.
    pub fn partition(&self, x: &Tensor) -> Result<Tensor> {
        let out_shape = self.partitioned_shape(x.shape())?;
        let mut out = Tensor::zeros(out_shape);
        self.walk(x.shape(), |src, dst| out.data_mut()[dst] = x.data()[src]);
        Ok(out)
    }

    /// Inverse of [`Windows::partition`] back to `image` shape.
    pub fn merge(&self, t: &Tensor, image: Shape) -> Result<Tensor> {
        let expect = self.partitioned_shape(image)?;
        ensure!(t.shape() == expect, "window merge expects {expect}, got {}", t.shape());
        let mut out = Tensor::zeros(image);
        self.walk(image, |src, dst| out.data_mut()[src] = t.data()[dst]);
        Ok(out)
    }

    /// Visit `(image_offset, partitioned_offset)` pairs.
    fn walk(&self, image: Shape, mut f: impl FnMut(usize, usize)) {
        let [b, c, h, w] = image.0;
        let (win, heads) = (self.win, self.heads);
        let d = c / heads;
        let (nh, nw) = (h / win, w / win);
        let mut dst = 0;
        for n in 0..b {
            for wy in 0..nh {
                for wx in 0..nw {
                    for hd in 0..heads {
                        for ty in 0..win {
                            for tx in 0..win {
                                let (y, x) = (wy * win + ty, wx * win + tx);
                                for k in 0..d {
                                    let ch = hd * d + k;
                                    f(((n * c + ch) * h + y) * w + x, dst);
                                    dst += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

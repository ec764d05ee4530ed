//! Separable resampling (bicubic and bilinear) expressed as sparse linear
//! maps, so the same plan serves the forward pass and, transposed, the
//! backward pass.

use crate::error::{ensure, Result};
use crate::tensor::Tensor;

/// Cubic convolution coefficient.
pub const CUBIC_A: f64 = -0.5;

fn cubic(x: f64) -> f64 {
    let a = CUBIC_A;
    let t = x.abs();
    if t <= 1.0 {
        ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Filter {
    /// Cubic convolution; widened (antialiased) when shrinking.
    Bicubic,
    /// Two-tap linear interpolation, half-pixel centers.
    Bilinear,
}

/// Resampling weights along one axis in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisPlan {
    in_len: usize,
    out_len: usize,
    starts: Vec<usize>,
    taps: Vec<(usize, f32)>,
}

impl AxisPlan {
    pub fn new(filter: Filter, in_len: usize, out_len: usize) -> Self {
        let scale = out_len as f64 / in_len as f64;
        let clamp = |j: i64| j.clamp(0, in_len as i64 - 1) as usize;
        let mut starts = Vec::with_capacity(out_len + 1);
        let mut taps = Vec::new();
        for i in 0..out_len {
            starts.push(taps.len());
            let center = (i as f64 + 0.5) / scale - 0.5;
            let mut row: Vec<(usize, f64)> = Vec::new();
            let mut push = |j: usize, w: f64| {
                if w == 0.0 {
                    return;
                }
                match row.iter_mut().find(|(k, _)| *k == j) {
                    Some(entry) => entry.1 += w,
                    None => row.push((j, w)),
                }
            };
            match filter {
                Filter::Bicubic => {
                    // Widen the kernel by 1/scale when shrinking.
                    let support = if scale < 1.0 { 2.0 / scale } else { 2.0 };
                    let stretch = if scale < 1.0 { scale } else { 1.0 };
                    let lo = (center - support).floor() as i64;
                    let hi = (center + support).ceil() as i64;
                    for j in lo..=hi {
                        push(clamp(j), cubic((center - j as f64) * stretch));
                    }
                }
                Filter::Bilinear => {
                    let c = center.max(0.0);
                    let j0 = c.floor() as i64;
                    let frac = c - j0 as f64;
                    push(clamp(j0), 1.0 - frac);
                    push(clamp(j0 + 1), frac);
                }
            }
            let total: f64 = row.iter().map(|(_, w)| w).sum();
            row.sort_by_key(|(j, _)| *j);
            taps.extend(row.into_iter().map(|(j, w)| (j, (w / total) as f32)));
        }
        starts.push(taps.len());
        AxisPlan {
            in_len,
            out_len,
            starts,
            taps,
        }
    }

    fn row(&self, i: usize) -> &[(usize, f32)] {
        &self.taps[self.starts[i]..self.starts[i + 1]]
    }
}

/// A separable 2-D resampling plan from `(in_h, in_w)` to `(out_h, out_w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResizePlan {
    rows: AxisPlan,
    cols: AxisPlan,
}

impl ResizePlan {
    pub fn new(filter: Filter, in_h: usize, in_w: usize, out_h: usize, out_w: usize) -> Result<Self> {
        ensure!(
            in_h >= 1 && in_w >= 1 && out_h >= 1 && out_w >= 1,
            "resize needs non-empty sizes, got {in_h}x{in_w} -> {out_h}x{out_w}"
        );
        Ok(ResizePlan {
            rows: AxisPlan::new(filter, in_h, out_h),
            cols: AxisPlan::new(filter, in_w, out_w),
        })
    }

    pub fn out_hw(&self) -> (usize, usize) {
        (self.rows.out_len, self.cols.out_len)
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let [b, c, h, w] = x.dims();
        ensure!(
            (h, w) == (self.rows.in_len, self.cols.in_len),
            "resize plan built for {}x{}, got {}",
            self.rows.in_len,
            self.cols.in_len,
            x.shape()
        );
        let (oh, ow) = self.out_hw();
        let mut tmp = vec![0f32; h * ow];
        let mut out = Tensor::zeros([b, c, oh, ow]);
        for (src, dst) in x.data().chunks(h * w).zip(out.data_mut().chunks_mut(oh * ow)) {
            for y in 0..h {
                let srow = &src[y * w..][..w];
                for (xo, t) in tmp[y * ow..][..ow].iter_mut().enumerate() {
                    *t = self.cols.row(xo).iter().map(|&(j, wt)| wt * srow[j]).sum();
                }
            }
            for yo in 0..oh {
                let drow = &mut dst[yo * ow..][..ow];
                for &(j, wt) in self.rows.row(yo) {
                    for (d, &t) in drow.iter_mut().zip(&tmp[j * ow..][..ow]) {
                        *d += wt * t;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Adjoint of [`ResizePlan::apply`].
    pub fn apply_transpose(&self, dy: &Tensor) -> Tensor {
        let [b, c, oh, ow] = dy.dims();
        let (h, w) = (self.rows.in_len, self.cols.in_len);
        let mut tmp = vec![0f32; h * ow];
        let mut dx = Tensor::zeros([b, c, h, w]);
        for (src, dst) in dy.data().chunks(oh * ow).zip(dx.data_mut().chunks_mut(h * w)) {
            tmp.fill(0.0);
            for yo in 0..oh {
                let grow = &src[yo * ow..][..ow];
                for &(j, wt) in self.rows.row(yo) {
                    for (t, &g) in tmp[j * ow..][..ow].iter_mut().zip(grow) {
                        *t += wt * g;
                    }
                }
            }
            for y in 0..h {
                let trow = &tmp[y * ow..][..ow];
                let drow = &mut dst[y * w..][..w];
                for (xo, &g) in trow.iter().enumerate() {
                    for &(j, wt) in self.cols.row(xo) {
                        drow[j] += wt * g;
                    }
                }
            }
        }
        dx
    }
}

/// Bicubic resize of every channel to `(out_h, out_w)`.
pub fn bicubic_resize(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let [_, _, h, w] = x.dims();
    ResizePlan::new(Filter::Bicubic, h, w, out_h, out_w)?.apply(x)
}

pub fn bilinear_resize(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let [_, _, h, w] = x.dims();
    ResizePlan::new(Filter::Bilinear, h, w, out_h, out_w)?.apply(x)
}

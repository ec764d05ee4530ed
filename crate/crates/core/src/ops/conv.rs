//! 2-D convolution with zero padding, stride and channel groups.
//!
//! Three kernels share one contract: pointwise (1x1, stride 1, no padding)
//! runs straight through GEMM, depthwise (one input channel per group) uses a
//! direct stencil, and everything else lowers to im2col + GEMM.

use super::gemm::{gemm, MatRef};
use crate::error::{ensure, Result};
use crate::tensor::{Shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl ConvSpec {
    pub const fn new(stride: usize, padding: usize, groups: usize) -> Self {
        ConvSpec {
            stride,
            padding,
            groups,
        }
    }

    /// Stride 1, "same" padding for an odd kernel, dense.
    pub const fn same(kernel: usize) -> Self {
        ConvSpec::new(1, kernel / 2, 1)
    }
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    b: usize,
    ic: usize,
    h: usize,
    w: usize,
    oc: usize,
    icg: usize,
    ocg: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    spec: ConvSpec,
}

impl Geometry {
    fn new(x: Shape, weight: Shape, spec: ConvSpec) -> Result<Self> {
        let [b, ic, h, w] = x.0;
        let [oc, icg, kh, kw] = weight.0;
        ensure!(spec.stride >= 1, "conv2d stride must be at least 1");
        ensure!(spec.groups >= 1, "conv2d groups must be at least 1");
        ensure!(
            ic % spec.groups == 0 && oc % spec.groups == 0,
            "conv2d channels ({ic} in, {oc} out) not divisible by groups {}",
            spec.groups
        );
        ensure!(
            icg * spec.groups == ic,
            "conv2d weight {weight} expects {} input channels, input {x} has {ic}",
            icg * spec.groups
        );
        let (ph, pw) = (h + 2 * spec.padding, w + 2 * spec.padding);
        ensure!(
            ph >= kh && pw >= kw && kh > 0 && kw > 0,
            "conv2d kernel {kh}x{kw} larger than padded input {ph}x{pw}"
        );
        Ok(Geometry {
            b,
            ic,
            h,
            w,
            oc,
            icg,
            ocg: oc / spec.groups,
            kh,
            kw,
            oh: (ph - kh) / spec.stride + 1,
            ow: (pw - kw) / spec.stride + 1,
            spec,
        })
    }

    fn out_shape(&self) -> Shape {
        Shape::new(self.b, self.oc, self.oh, self.ow)
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.spec.stride == 1 && self.spec.padding == 0
    }

    fn is_depthwise(&self) -> bool {
        self.icg == 1 && self.ocg == 1
    }

    /// Output columns `ox` whose tap `kx` lands inside the input row.
    fn valid_cols(&self, kx: usize) -> std::ops::Range<usize> {
        valid_range(self.ow, self.w, kx, self.spec.stride, self.spec.padding)
    }

    fn valid_rows(&self, ky: usize) -> std::ops::Range<usize> {
        valid_range(self.oh, self.h, ky, self.spec.stride, self.spec.padding)
    }
}

/// Range of output positions `o` with `0 <= o*stride + k - pad < len`.
fn valid_range(out_len: usize, len: usize, k: usize, stride: usize, pad: usize) -> std::ops::Range<usize> {
    let lo = if k >= pad { 0 } else { (pad - k).div_ceil(stride) };
    // o*stride + k - pad <= len - 1  <=>  o <= (len - 1 + pad - k) / stride
    let hi = if len + pad > k {
        ((len - 1 + pad - k) / stride + 1).min(out_len)
    } else {
        0
    };
    lo..hi.max(lo)
}

pub fn conv2d_output_shape(x: Shape, weight: Shape, spec: ConvSpec) -> Result<Shape> {
    Ok(Geometry::new(x, weight, spec)?.out_shape())
}

pub fn conv2d_forward(x: &Tensor, weight: &Tensor, bias: Option<&Tensor>, spec: ConvSpec) -> Result<Tensor> {
    let g = Geometry::new(x.shape(), weight.shape(), spec)?;
    if let Some(bias) = bias {
        ensure!(
            bias.numel() == g.oc,
            "conv2d bias has {} elements, expected {}",
            bias.numel(),
            g.oc
        );
    }
    let mut out = Tensor::zeros(g.out_shape());
    let plane = g.oh * g.ow;
    if let Some(bias) = bias {
        for (i, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
            chunk.fill(bias.data()[i % g.oc]);
        }
    }
    if g.is_depthwise() {
        depthwise_forward(&g, x.data(), weight.data(), out.data_mut());
    } else {
        let beta = if bias.is_some() { 1.0 } else { 0.0 };
        let pointwise = g.is_pointwise();
        let kk = g.icg * g.kh * g.kw;
        let mut cols = if pointwise { Vec::new() } else { vec![0.0; kk * plane] };
        let in_plane = g.h * g.w;
        for b in 0..g.b {
            for grp in 0..spec.groups {
                let x_g = &x.data()[(b * g.ic + grp * g.icg) * in_plane..][..g.icg * in_plane];
                let w_g = &weight.data()[grp * g.ocg * kk..][..g.ocg * kk];
                let y_g = &mut out.data_mut()[(b * g.oc + grp * g.ocg) * plane..][..g.ocg * plane];
                let rhs = if pointwise {
                    MatRef::new(x_g, g.icg, plane)
                } else {
                    im2col(&g, x_g, &mut cols);
                    MatRef::new(&cols, kk, plane)
                };
                gemm(MatRef::new(w_g, g.ocg, kk), rhs, y_g, beta);
            }
        }
    }
    Ok(out)
}

/// Gradients of a convolution. `dx` is only computed when `need_dx` is set.
pub struct ConvGrads {
    pub dx: Option<Tensor>,
    pub dweight: Tensor,
    pub dbias: Option<Tensor>,
}

pub fn conv2d_backward(
    x: &Tensor,
    weight: &Tensor,
    has_bias: bool,
    spec: ConvSpec,
    dy: &Tensor,
    need_dx: bool,
) -> Result<ConvGrads> {
    let g = Geometry::new(x.shape(), weight.shape(), spec)?;
    ensure!(
        dy.shape() == g.out_shape(),
        "conv2d upstream gradient {} does not match output {}",
        dy.shape(),
        g.out_shape()
    );
    let plane = g.oh * g.ow;
    let dbias = has_bias.then(|| {
        let mut db = vec![0f64; g.oc];
        for (i, chunk) in dy.data().chunks(plane).enumerate() {
            db[i % g.oc] += chunk.iter().map(|&v| v as f64).sum::<f64>();
        }
        Tensor::from_vec([1, g.oc, 1, 1], db.into_iter().map(|v| v as f32).collect())
            .expect("bias gradient shape")
    });
    let mut dweight = Tensor::zeros(weight.shape());
    let mut dx = need_dx.then(|| Tensor::zeros(x.shape()));

    if g.is_depthwise() {
        depthwise_backward(
            &g,
            x.data(),
            weight.data(),
            dy.data(),
            dweight.data_mut(),
            dx.as_mut().map(|t| t.data_mut()),
        );
    } else {
        let pointwise = g.is_pointwise();
        let kk = g.icg * g.kh * g.kw;
        let in_plane = g.h * g.w;
        let mut cols = if pointwise { Vec::new() } else { vec![0.0; kk * plane] };
        let mut dcols = if pointwise || !need_dx { Vec::new() } else { vec![0.0; kk * plane] };
        for b in 0..g.b {
            for grp in 0..spec.groups {
                let x_g = &x.data()[(b * g.ic + grp * g.icg) * in_plane..][..g.icg * in_plane];
                let w_g = &weight.data()[grp * g.ocg * kk..][..g.ocg * kk];
                let dy_g = &dy.data()[(b * g.oc + grp * g.ocg) * plane..][..g.ocg * plane];
                let dw_g = &mut dweight.data_mut()[grp * g.ocg * kk..][..g.ocg * kk];
                let cols_ref = if pointwise {
                    MatRef::new(x_g, g.icg, plane)
                } else {
                    im2col(&g, x_g, &mut cols);
                    MatRef::new(&cols, kk, plane)
                };
                // dW += dY · colsᵀ
                gemm(MatRef::new(dy_g, g.ocg, plane), cols_ref.t(), dw_g, 1.0);
                if let Some(dx) = dx.as_mut() {
                    let dx_g = &mut dx.data_mut()[(b * g.ic + grp * g.icg) * in_plane..][..g.icg * in_plane];
                    let wt = MatRef::new(w_g, g.ocg, kk).t();
                    if pointwise {
                        gemm(wt, MatRef::new(dy_g, g.ocg, plane), dx_g, 1.0);
                    } else {
                        gemm(wt, MatRef::new(dy_g, g.ocg, plane), &mut dcols, 0.0);
                        col2im(&g, &dcols, dx_g);
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        dx,
        dweight,
        dbias,
    })
}

fn im2col(g: &Geometry, x: &[f32], cols: &mut [f32]) {
    let (s, p) = (g.spec.stride, g.spec.padding);
    let plane = g.oh * g.ow;
    for ci in 0..g.icg {
        let x_c = &x[ci * g.h * g.w..][..g.h * g.w];
        for ky in 0..g.kh {
            let rows = g.valid_rows(ky);
            for kx in 0..g.kw {
                let row = &mut cols[((ci * g.kh + ky) * g.kw + kx) * plane..][..plane];
                row.fill(0.0);
                let cols_ok = g.valid_cols(kx);
                for oy in rows.clone() {
                    let iy = oy * s + ky - p;
                    let src = &x_c[iy * g.w..][..g.w];
                    let dst = &mut row[oy * g.ow..][..g.ow];
                    for ox in cols_ok.clone() {
                        dst[ox] = src[ox * s + kx - p];
                    }
                }
            }
        }
    }
}

fn col2im(g: &Geometry, cols: &[f32], dx: &mut [f32]) {
    let (s, p) = (g.spec.stride, g.spec.padding);
    let plane = g.oh * g.ow;
    for ci in 0..g.icg {
        let dx_c = &mut dx[ci * g.h * g.w..][..g.h * g.w];
        for ky in 0..g.kh {
            let rows = g.valid_rows(ky);
            for kx in 0..g.kw {
                let row = &cols[((ci * g.kh + ky) * g.kw + kx) * plane..][..plane];
                let cols_ok = g.valid_cols(kx);
                for oy in rows.clone() {
                    let iy = oy * s + ky - p;
                    let dst = &mut dx_c[iy * g.w..][..g.w];
                    let src = &row[oy * g.ow..][..g.ow];
                    for ox in cols_ok.clone() {
                        dst[ox * s + kx - p] += src[ox];
                    }
                }
            }
        }
    }
}

fn depthwise_forward(g: &Geometry, x: &[f32], weight: &[f32], out: &mut [f32]) {
    let (s, p) = (g.spec.stride, g.spec.padding);
    let (in_plane, plane, kk) = (g.h * g.w, g.oh * g.ow, g.kh * g.kw);
    for b in 0..g.b {
        for ch in 0..g.oc {
            let x_c = &x[(b * g.ic + ch) * in_plane..][..in_plane];
            let y_c = &mut out[(b * g.oc + ch) * plane..][..plane];
            let w_c = &weight[ch * kk..][..kk];
            for ky in 0..g.kh {
                let rows = g.valid_rows(ky);
                for kx in 0..g.kw {
                    let wv = w_c[ky * g.kw + kx];
                    let cols = g.valid_cols(kx);
                    for oy in rows.clone() {
                        let iy = oy * s + ky - p;
                        let src = &x_c[iy * g.w..][..g.w];
                        let dst = &mut y_c[oy * g.ow..][..g.ow];
                        if s == 1 {
                            let off = kx as isize - p as isize;
                            let (lo, hi) = (cols.start, cols.end);
                            let src = &src[(lo as isize + off) as usize..(hi as isize + off) as usize];
                            for (d, &v) in dst[lo..hi].iter_mut().zip(src) {
                                *d += wv * v;
                            }
                        } else {
                            for ox in cols.clone() {
                                dst[ox] += wv * src[ox * s + kx - p];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn depthwise_backward(
    g: &Geometry,
    x: &[f32],
    weight: &[f32],
    dy: &[f32],
    dweight: &mut [f32],
    mut dx: Option<&mut [f32]>,
) {
    let (s, p) = (g.spec.stride, g.spec.padding);
    let (in_plane, plane, kk) = (g.h * g.w, g.oh * g.ow, g.kh * g.kw);
    for b in 0..g.b {
        for ch in 0..g.oc {
            let x_c = &x[(b * g.ic + ch) * in_plane..][..in_plane];
            let dy_c = &dy[(b * g.oc + ch) * plane..][..plane];
            let w_c = &weight[ch * kk..][..kk];
            for ky in 0..g.kh {
                let rows = g.valid_rows(ky);
                for kx in 0..g.kw {
                    let wv = w_c[ky * g.kw + kx];
                    let cols = g.valid_cols(kx);
                    let mut acc = 0f32;
                    for oy in rows.clone() {
                        let iy = oy * s + ky - p;
                        let src = &x_c[iy * g.w..][..g.w];
                        let grad = &dy_c[oy * g.ow..][..g.ow];
                        for ox in cols.clone() {
                            acc += grad[ox] * src[ox * s + kx - p];
                        }
                        if let Some(dx) = dx.as_deref_mut() {
                            let dst = &mut dx[(b * g.ic + ch) * in_plane + iy * g.w..][..g.w];
                            for ox in cols.clone() {
                                dst[ox * s + kx - p] += wv * grad[ox];
                            }
                        }
                    }
                    dweight[ch * kk + ky * g.kw + kx] += acc;
                }
            }
        }
    }
}

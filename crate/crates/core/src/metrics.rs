//! Fidelity metrics on the luminance channel.
//!
//! `psnr` reports `f64::INFINITY` for identical inputs. `ssim` uses an
//! 11x11 Gaussian window (σ = 1.5) over the valid region only, with
//! `K1 = 0.01`, `K2 = 0.03` and peak 1. `epi` is the correlation coefficient
//! of the Laplacian-filtered images.

use crate::error::{ensure, Result};
use crate::tensor::Tensor;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

/// BT.601 studio-swing luma of `(b, 3, h, w)` RGB in `[0, 1]`.
pub fn rgb_to_y(img: &Tensor) -> Result<Tensor> {
    let [b, c, h, w] = img.dims();
    ensure!(c == 3, "luma conversion needs 3 channels, got {c}");
    let mut out = Tensor::zeros([b, 1, h, w]);
    let plane = h * w;
    for n in 0..b {
        let src = &img.data()[n * 3 * plane..][..3 * plane];
        let dst = &mut out.data_mut()[n * plane..][..plane];
        for (k, y) in dst.iter_mut().enumerate() {
            let (r, g, bl) = (src[k] as f64, src[plane + k] as f64, src[2 * plane + k] as f64);
            *y = ((65.481 * r + 128.553 * g + 24.966 * bl + 16.0) / 255.0) as f32;
        }
    }
    Ok(out)
}

fn same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    ensure!(a.shape() == b.shape(), "metric inputs differ in shape: {} vs {}", a.shape(), b.shape());
    Ok(())
}

pub fn mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    same_shape(a, b)?;
    let n = a.numel().max(1) as f64;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        / n)
}

/// Peak signal-to-noise ratio in dB for peak value 1.
pub fn psnr(a: &Tensor, b: &Tensor) -> Result<f64> {
    let m = mse(a, b)?;
    Ok(if m == 0.0 { f64::INFINITY } else { -10.0 * m.log10() })
}

/// The normalized 1-D Gaussian the SSIM window is the outer product of.
pub fn gaussian_1d(size: usize, sigma: f64) -> Vec<f64> {
    let mid = (size as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - mid).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Valid-region separable filtering of one plane.
fn filter_valid(x: &[f64], h: usize, w: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (oh, ow) = (h + 1 - n, w + 1 - n);
    let mut rows = vec![0.0; h * ow];
    for i in 0..h {
        for j in 0..ow {
            rows[i * ow + j] = k.iter().enumerate().map(|(t, kv)| kv * x[i * w + j + t]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = k.iter().enumerate().map(|(t, kv)| kv * rows[(i + t) * ow + j]).sum();
        }
    }
    (out, oh, ow)
}

fn planes(t: &Tensor) -> impl Iterator<Item = Vec<f64>> + '_ {
    let [_, _, h, w] = t.dims();
    t.data().chunks(h * w).map(|p| p.iter().map(|&v| v as f64).collect())
}

/// Mean structural similarity, averaged over every plane.
pub fn ssim(a: &Tensor, b: &Tensor) -> Result<f64> {
    same_shape(a, b)?;
    let [_, _, h, w] = a.dims();
    ensure!(
        h >= SSIM_WINDOW && w >= SSIM_WINDOW,
        "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {h}x{w}"
    );
    let k = gaussian_1d(SSIM_WINDOW, SSIM_SIGMA);
    let (c1, c2) = (K1 * K1, K2 * K2);
    let mut total = 0.0;
    let mut count = 0usize;
    for (x, y) in planes(a).zip(planes(b)) {
        let sq = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(u, v)| u * v).collect::<Vec<_>>();
        let (mx, _, _) = filter_valid(&x, h, w, &k);
        let (my, _, _) = filter_valid(&y, h, w, &k);
        let (xx, _, _) = filter_valid(&sq(&x, &x), h, w, &k);
        let (yy, _, _) = filter_valid(&sq(&y, &y), h, w, &k);
        let (xy, _, _) = filter_valid(&sq(&x, &y), h, w, &k);
        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let vx = xx[i] - ux * ux;
            let vy = yy[i] - uy * uy;
            let cxy = xy[i] - ux * uy;
            total += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        count += mx.len();
    }
    Ok(total / count as f64)
}

fn laplacian(x: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity((h - 2) * (w - 2));
    for i in 1..h - 1 {
        for j in 1..w - 1 {
            let c = x[i * w + j];
            out.push(x[(i - 1) * w + j] + x[(i + 1) * w + j] + x[i * w + j - 1] + x[i * w + j + 1] - 4.0 * c);
        }
    }
    out
}

/// Edge preservation index: correlation of Laplacian responses of the test
/// image `a` and reference `b`.
pub fn epi(a: &Tensor, b: &Tensor) -> Result<f64> {
    same_shape(a, b)?;
    let [_, _, h, w] = a.dims();
    ensure!(h >= 3 && w >= 3, "edge index needs at least 3x3 pixels, got {h}x{w}");
    let (mut la, mut lb) = (Vec::new(), Vec::new());
    for (x, y) in planes(a).zip(planes(b)) {
        la.extend(laplacian(&x, h, w));
        lb.extend(laplacian(&y, h, w));
    }
    if la == lb {
        return Ok(1.0);
    }
    let n = la.len() as f64;
    let (ma, mb) = (la.iter().sum::<f64>() / n, lb.iter().sum::<f64>() / n);
    let (mut num, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (p, q) in la.iter().zip(&lb) {
        let (dp, dq) = (p - ma, q - mb);
        num += dp * dq;
        va += dp * dp;
        vb += dq * dq;
    }
    let den = (va * vb).sqrt();
    Ok(if den == 0.0 { 0.0 } else { num / den })
}

/// Drop `border` pixels from each side.
pub fn shave(t: &Tensor, border: usize) -> Result<Tensor> {
    let [b, c, h, w] = t.dims();
    ensure!(
        h > 2 * border && w > 2 * border,
        "cannot remove a {border}px border from {h}x{w}"
    );
    let (oh, ow) = (h - 2 * border, w - 2 * border);
    let mut out = Tensor::zeros([b, c, oh, ow]);
    for p in 0..b * c {
        for i in 0..oh {
            let src = &t.data()[p * h * w + (i + border) * w + border..][..ow];
            out.data_mut()[p * oh * ow + i * ow..][..ow].copy_from_slice(src);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scores {
    pub psnr_y: f64,
    pub ssim_y: f64,
    pub epi: f64,
}

/// Luma metrics of a restored RGB image against ground truth, after
/// removing `border` pixels from each side.
pub fn evaluate(sr: &Tensor, gt: &Tensor, border: usize) -> Result<Scores> {
    same_shape(sr, gt)?;
    let a = rgb_to_y(&shave(sr, border)?)?;
    let b = rgb_to_y(&shave(gt, border)?)?;
    Ok(Scores {
        psnr_y: psnr(&a, &b)?,
        ssim_y: ssim(&a, &b)?,
        epi: epi(&a, &b)?,
    })
}

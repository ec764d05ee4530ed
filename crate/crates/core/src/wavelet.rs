//! Orthonormal 2-D Haar analysis and synthesis.
//!
//! For each 2x2 block `[a b; c d]` of every channel:
//!
//! ```text
//! LL = (a + b + c + d) / 2      LH = (a + b - c - d) / 2
//! HL = (a - b + c - d) / 2      HH = (a - b - c + d) / 2
//! ```
//!
//! LH responds to variation down the columns (vertical), HL to variation
//! along the rows (horizontal), HH to the diagonal.

use crate::error::{ensure, Result};
use crate::ops::layout::{concat_channels, slice_channels};
use crate::tensor::{Shape, Tensor};

/// One analysis level: four equally shaped half-resolution bands.
#[derive(Clone, Debug, PartialEq)]
pub struct SubBandSet {
    pub ll: Tensor,
    pub lh: Tensor,
    pub hl: Tensor,
    pub hh: Tensor,
}

impl SubBandSet {
    pub fn shape(&self) -> Shape {
        self.ll.shape()
    }

    pub fn bands(&self) -> [&Tensor; 4] {
        [&self.ll, &self.lh, &self.hl, &self.hh]
    }

    /// Sum of squares across all four bands.
    pub fn energy(&self) -> f64 {
        self.bands()
            .iter()
            .flat_map(|t| t.data())
            .map(|&v| v as f64 * v as f64)
            .sum()
    }
}

pub fn dwt2_haar(x: &Tensor) -> Result<SubBandSet> {
    let [b, c, h, w] = x.dims();
    ensure!(
        h % 2 == 0 && w % 2 == 0 && h > 0 && w > 0,
        "Haar analysis needs even spatial size, got {h}x{w}"
    );
    let (hh2, hw2) = (h / 2, w / 2);
    let shape = Shape::new(b, c, hh2, hw2);
    let mut bands = [(); 4].map(|_| Tensor::zeros(shape));
    for (p, src) in x.data().chunks(h * w).enumerate() {
        let off = p * hh2 * hw2;
        for i in 0..hh2 {
            let top = &src[2 * i * w..][..w];
            let bot = &src[(2 * i + 1) * w..][..w];
            for j in 0..hw2 {
                let (a, bb, cc, d) = (top[2 * j], top[2 * j + 1], bot[2 * j], bot[2 * j + 1]);
                let k = off + i * hw2 + j;
                bands[0].data_mut()[k] = (a + bb + cc + d) * 0.5;
                bands[1].data_mut()[k] = (a + bb - cc - d) * 0.5;
                bands[2].data_mut()[k] = (a - bb + cc - d) * 0.5;
                bands[3].data_mut()[k] = (a - bb - cc + d) * 0.5;
            }
        }
    }
    let [ll, lh, hl, hh] = bands;
    Ok(SubBandSet { ll, lh, hl, hh })
}

pub fn idwt2_haar(s: &SubBandSet) -> Result<Tensor> {
    let shape = s.ll.shape();
    ensure!(
        s.bands().iter().all(|t| t.shape() == shape),
        "sub-band shapes differ: {} {} {} {}",
        s.ll.shape(),
        s.lh.shape(),
        s.hl.shape(),
        s.hh.shape()
    );
    let [b, c, h2, w2] = shape.0;
    let (h, w) = (2 * h2, 2 * w2);
    let mut out = Tensor::zeros([b, c, h, w]);
    let dst = out.data_mut();
    for p in 0..b * c {
        let off = p * h2 * w2;
        let base = p * h * w;
        for i in 0..h2 {
            for j in 0..w2 {
                let k = off + i * w2 + j;
                let (ll, lh, hl, hh) = (s.ll.data()[k], s.lh.data()[k], s.hl.data()[k], s.hh.data()[k]);
                dst[base + 2 * i * w + 2 * j] = (ll + lh + hl + hh) * 0.5;
                dst[base + 2 * i * w + 2 * j + 1] = (ll + lh - hl - hh) * 0.5;
                dst[base + (2 * i + 1) * w + 2 * j] = (ll - lh + hl - hh) * 0.5;
                dst[base + (2 * i + 1) * w + 2 * j + 1] = (ll - lh - hl + hh) * 0.5;
            }
        }
    }
    Ok(out)
}

/// Decompose `levels` times, each level analysing the previous LL band.
/// Level 1 comes first.
pub fn dwt2_multilevel(x: &Tensor, levels: usize) -> Result<Vec<SubBandSet>> {
    ensure!(levels >= 1, "at least one decomposition level is required");
    let div = 1usize << levels;
    let [_, _, h, w] = x.dims();
    ensure!(
        h % div == 0 && w % div == 0 && h > 0 && w > 0,
        "{h}x{w} is not divisible by 2^{levels}"
    );
    let mut out: Vec<SubBandSet> = Vec::with_capacity(levels);
    for _ in 0..levels {
        let next = dwt2_haar(out.last().map_or(x, |s| &s.ll))?;
        out.push(next);
    }
    Ok(out)
}

/// Bands concatenated along channels as `[LL, LH, HL, HH]`.
pub(crate) fn dwt2_packed(x: &Tensor) -> Result<Tensor> {
    let s = dwt2_haar(x)?;
    concat_channels(&s.bands())
}

/// Adjoint (and inverse) of [`dwt2_packed`].
pub(crate) fn idwt2_packed(packed: &Tensor) -> Result<Tensor> {
    let c4 = packed.shape().c();
    ensure!(c4 % 4 == 0, "packed sub-bands need a multiple of 4 channels");
    let c = c4 / 4;
    let band = |i| slice_channels(packed, i * c, c);
    idwt2_haar(&SubBandSet {
        ll: band(0)?,
        lh: band(1)?,
        hl: band(2)?,
        hh: band(3)?,
    })
}

/// Round `n` up to a multiple of `m`.
pub fn round_up(n: usize, m: usize) -> usize {
    n.div_ceil(m) * m
}

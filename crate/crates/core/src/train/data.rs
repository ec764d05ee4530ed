use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{ensure, Error, Result};
use crate::image_io::load_rgb;
use crate::ops::bicubic_resize;
use crate::tensor::Tensor;

/// Where a training pair came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub source: String,
    /// Top-left corner of the crop in low-resolution pixels.
    pub offset: (usize, usize),
    pub code: u8,
}

/// Aligned low/high-resolution patches, each `(1, 3, ·, ·)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePair {
    pub lr: Tensor,
    pub hr: Tensor,
    pub provenance: Provenance,
}

/// Apply dihedral transform `code` (0..8) to the two spatial axes: a
/// horizontal flip when `code >= 4`, then `code % 4` clockwise quarter
/// turns. A quarter turn sends pixel `(i, j)` of an `h x w` map to
/// `(j, h - 1 - i)`.
pub fn transform(t: &Tensor, code: u8) -> Tensor {
    let code = code % 8;
    let mut out = if code >= 4 { hflip(t) } else { t.clone() };
    for _ in 0..code % 4 {
        out = rot90(&out);
    }
    out
}

fn hflip(t: &Tensor) -> Tensor {
    let [b, c, h, w] = t.dims();
    let mut out = Tensor::zeros(t.shape());
    for p in 0..b * c {
        for i in 0..h {
            let row = p * h * w + i * w;
            for j in 0..w {
                out.data_mut()[row + j] = t.data()[row + w - 1 - j];
            }
        }
    }
    out
}

fn rot90(t: &Tensor) -> Tensor {
    let [b, c, h, w] = t.dims();
    let mut out = Tensor::zeros([b, c, w, h]);
    for p in 0..b * c {
        let (src, dst) = (p * h * w, p * h * w);
        for i in 0..h {
            for j in 0..w {
                out.data_mut()[dst + j * h + (h - 1 - i)] = t.data()[src + i * w + j];
            }
        }
    }
    out
}

/// The code undoing `code`.
pub fn inverse_code(code: u8) -> u8 {
    let code = code % 8;
    if code >= 4 {
        code
    } else {
        (4 - code) % 4
    }
}

/// The single code equal to applying `first`, then `second`.
pub fn compose(first: u8, second: u8) -> u8 {
    let (r1, f1) = ((first % 4) as i32, first % 8 >= 4);
    let (r2, f2) = ((second % 4) as i32, second % 8 >= 4);
    // A flip reverses the direction of the turns that precede it.
    let r = if f2 { r2 - r1 } else { r2 + r1 }.rem_euclid(4) as u8;
    r + if f1 != f2 { 4 } else { 0 }
}

/// The same transform on both halves of a pair.
pub fn augment(pair: &SamplePair, code: u8) -> SamplePair {
    SamplePair {
        lr: transform(&pair.lr, code),
        hr: transform(&pair.hr, code),
        provenance: Provenance {
            code: compose(pair.provenance.code, code),
            ..pair.provenance.clone()
        },
    }
}

/// Crop an image so both spatial sides are multiples of `s`.
pub fn crop_to_multiple(hr: &Tensor, s: usize) -> Result<Tensor> {
    let [_, _, h, w] = hr.dims();
    ensure!(s >= 1 && h >= s && w >= s, "image {h}x{w} is smaller than scale {s}");
    crate::ops::crop(hr, h - h % s, w - w % s)
}

/// Bicubic downscale by `s` (after cropping to a multiple of `s`), clamped
/// to `[0, 1]`.
pub fn degrade(hr: &Tensor, s: usize) -> Result<Tensor> {
    let hr = crop_to_multiple(hr, s)?;
    let [_, _, h, w] = hr.dims();
    Ok(bicubic_resize(&hr, h / s, w / s)?.map(|v| v.clamp(0.0, 1.0)))
}

struct Source {
    name: String,
    hr: Tensor,
    lr: Tensor,
}

/// High-resolution images with their precomputed degradations.
pub struct Dataset {
    sources: Vec<Source>,
    scale: usize,
}

impl Dataset {
    pub fn from_images(images: Vec<(String, Tensor)>, scale: usize) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::Config("the dataset contains no images".into()));
        }
        let sources = images
            .into_iter()
            .map(|(name, img)| {
                let hr = crop_to_multiple(&img, scale)?;
                let lr = degrade(&hr, scale)?;
                Ok(Source { name, hr, lr })
            })
            .collect::<Result<_>>()?;
        Ok(Dataset { sources, scale })
    }

    /// Every `.png` in `dir`, in file-name order.
    pub fn from_dir(dir: &Path, scale: usize) -> Result<Self> {
        let images = png_files(dir)?
            .into_iter()
            .map(|p| Ok((p.display().to_string(), load_rgb(&p)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_images(images, scale)
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    /// Fail unless every image holds a `patch`-sized low-resolution crop.
    pub fn check_patch(&self, patch: usize) -> Result<()> {
        for s in &self.sources {
            let [_, _, h, w] = s.lr.dims();
            if h < patch || w < patch {
                return Err(Error::Config(format!(
                    "{} is too small for {patch}px patches at scale {} (needs at least {}x{})",
                    s.name,
                    self.scale,
                    patch * self.scale,
                    patch * self.scale
                )));
            }
        }
        Ok(())
    }

    /// One random aligned, augmented crop.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, patch: usize) -> Result<SamplePair> {
        let src = &self.sources[rng.gen_range(0..self.sources.len())];
        let [_, _, h, w] = src.lr.dims();
        ensure!(h >= patch && w >= patch, "{} is smaller than the patch size {patch}", src.name);
        let y = rng.gen_range(0..=h - patch);
        let x = rng.gen_range(0..=w - patch);
        let code = rng.gen_range(0..8u8);
        let s = self.scale;
        let pair = SamplePair {
            lr: window(&src.lr, y, x, patch),
            hr: window(&src.hr, y * s, x * s, patch * s),
            provenance: Provenance {
                source: src.name.clone(),
                offset: (y, x),
                code: 0,
            },
        };
        Ok(augment(&pair, code))
    }

    /// A stacked batch `(lr, hr)`.
    pub fn batch<R: Rng + ?Sized>(&self, rng: &mut R, size: usize, patch: usize) -> Result<(Tensor, Tensor)> {
        let pairs = (0..size).map(|_| self.sample(rng, patch)).collect::<Result<Vec<_>>>()?;
        let lr: Vec<Tensor> = pairs.iter().map(|p| p.lr.clone()).collect();
        let hr: Vec<Tensor> = pairs.into_iter().map(|p| p.hr).collect();
        Ok((Tensor::stack(&lr)?, Tensor::stack(&hr)?))
    }
}

fn window(t: &Tensor, y: usize, x: usize, size: usize) -> Tensor {
    let [_, c, _, _] = t.dims();
    let mut out = Tensor::zeros([1, c, size, size]);
    for ch in 0..c {
        for i in 0..size {
            for j in 0..size {
                out.set(0, ch, i, j, t.at(0, ch, y + i, x + j));
            }
        }
    }
    out
}

/// Sorted `.png` files directly inside `dir`.
pub fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

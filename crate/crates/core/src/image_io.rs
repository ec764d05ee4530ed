//! 8-bit PNG in and out. Pixels map to `[0, 1]` by `/255`; grayscale and
//! alpha inputs are reduced to RGB.

use std::path::Path;

use image::{ImageBuffer, Rgb};

use crate::error::{ensure, Error, Result};
use crate::tensor::Tensor;

/// Read an image as a `(1, 3, h, w)` tensor.
pub fn load_rgb(path: &Path) -> Result<Tensor> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut t = Tensor::zeros([1, 3, h, w]);
    for (x, y, px) in rgb.enumerate_pixels() {
        for c in 0..3 {
            t.set(0, c, y as usize, x as usize, px[c] as f32 / 255.0);
        }
    }
    Ok(t)
}

/// Clamp to `[0, 1]` and quantize with round-half-up.
pub fn quantize(v: f32) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0 + 0.5).floor().min(255.0) as u8
}

/// Write a `(1, 3, h, w)` or `(1, 1, h, w)` tensor as an RGB PNG.
pub fn save_rgb(path: &Path, t: &Tensor) -> Result<()> {
    let [b, c, h, w] = t.dims();
    ensure!(b == 1 && (c == 3 || c == 1), "cannot save a {} tensor as an image", t.shape());
    let buf = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let px = |ch: usize| quantize(t.at(0, if c == 1 { 0 } else { ch }, y as usize, x as usize));
        Rgb([px(0), px(1), px(2)])
    });
    buf.save_with_format(path, image::ImageFormat::Png).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}

/// The 8-bit round trip `save_rgb` followed by `load_rgb` performs.
pub fn quantize_tensor(t: &Tensor) -> Tensor {
    t.map(|v| quantize(v) as f32 / 255.0)
}

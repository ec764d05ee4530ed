//! Procedural RGB test images: smooth gradients overlaid with filled
//! shapes and stripe patches, so every image carries both flat regions and
//! edges at several orientations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;

/// One `(1, 3, size, size)` image in `[0, 1]`.
pub fn toy_image(size: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = Tensor::zeros([1, 3, size, size]);
    let n = size as f32;

    let base: [f32; 3] = std::array::from_fn(|_| rng.gen_range(0.2..0.8));
    let grad: [(f32, f32); 3] = std::array::from_fn(|_| (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)));
    for c in 0..3 {
        for i in 0..size {
            for j in 0..size {
                let v = base[c] + grad[c].0 * (i as f32 / n - 0.5) + grad[c].1 * (j as f32 / n - 0.5);
                img.set(0, c, i, j, v);
            }
        }
    }

    for _ in 0..rng.gen_range(2..5) {
        let color: [f32; 3] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
        let (cy, cx) = (rng.gen_range(0.0..n), rng.gen_range(0.0..n));
        let r = rng.gen_range(n * 0.08..n * 0.3);
        let disc = rng.gen_bool(0.5);
        for i in 0..size {
            for j in 0..size {
                let (dy, dx) = (i as f32 + 0.5 - cy, j as f32 + 0.5 - cx);
                let inside = if disc {
                    dy * dy + dx * dx <= r * r
                } else {
                    dy.abs() <= r && dx.abs() <= r * 0.6
                };
                if inside {
                    for c in 0..3 {
                        img.set(0, c, i, j, color[c]);
                    }
                }
            }
        }
    }

    // A patch of stripes at a random angle and period.
    let angle: f32 = rng.gen_range(0.0..std::f32::consts::PI);
    let period: f32 = rng.gen_range(3.0..8.0);
    let (sy, sx) = (rng.gen_range(0..size / 2), rng.gen_range(0..size / 2));
    let side = size / 3;
    let amp: f32 = rng.gen_range(0.15..0.35);
    for i in sy..(sy + side).min(size) {
        for j in sx..(sx + side).min(size) {
            let t = (i as f32 * angle.sin() + j as f32 * angle.cos()) / period;
            let s = if t.rem_euclid(1.0) < 0.5 { amp } else { -amp };
            for c in 0..3 {
                let v = img.at(0, c, i, j) + s;
                img.set(0, c, i, j, v);
            }
        }
    }
    img.map(|v| v.clamp(0.0, 1.0))
}

/// `count` named images from consecutive seeds.
pub fn toy_set(count: usize, size: usize, seed: u64) -> Vec<(String, Tensor)> {
    (0..count as u64)
        .map(|i| (format!("toy_{i:03}"), toy_image(size, seed.wrapping_mul(1_000_003).wrapping_add(i))))
        .collect()
}

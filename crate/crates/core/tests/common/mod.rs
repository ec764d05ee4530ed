//! Straight-line f64 reference implementations used as test oracles.
//!
//! Nothing here calls into the library's kernels: every operator is a
//! direct loop over indices, and blocks are assembled from those loops with
//! parameters looked up by name.
#![allow(dead_code)]

pub mod cases;
pub mod grads;

use mlcraist::{ModelConfig, ParamStore, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct Arr {
    pub d: [usize; 4],
    pub v: Vec<f64>,
}

impl Arr {
    pub fn zeros(d: [usize; 4]) -> Self {
        Arr {
            d,
            v: vec![0.0; d.iter().product()],
        }
    }

    pub fn from_tensor(t: &Tensor) -> Self {
        Arr {
            d: t.dims(),
            v: t.data().iter().map(|&x| x as f64).collect(),
        }
    }

    pub fn idx(&self, n: usize, c: usize, i: usize, j: usize) -> usize {
        let [_, cc, h, w] = self.d;
        ((n * cc + c) * h + i) * w + j
    }

    pub fn at(&self, n: usize, c: usize, i: usize, j: usize) -> f64 {
        self.v[self.idx(n, c, i, j)]
    }

    pub fn set(&mut self, n: usize, c: usize, i: usize, j: usize, x: f64) {
        let k = self.idx(n, c, i, j);
        self.v[k] = x;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Arr {
        Arr {
            d: self.d,
            v: self.v.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn add(&self, o: &Arr) -> Arr {
        assert_eq!(self.d, o.d);
        Arr {
            d: self.d,
            v: self.v.iter().zip(&o.v).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn mul(&self, o: &Arr) -> Arr {
        assert_eq!(self.d, o.d);
        Arr {
            d: self.d,
            v: self.v.iter().zip(&o.v).map(|(a, b)| a * b).collect(),
        }
    }

    /// Channels `start..start + len`.
    pub fn channels(&self, start: usize, len: usize) -> Arr {
        let [b, _, h, w] = self.d;
        let mut out = Arr::zeros([b, len, h, w]);
        for n in 0..b {
            for c in 0..len {
                for i in 0..h {
                    for j in 0..w {
                        out.set(n, c, i, j, self.at(n, start + c, i, j));
                    }
                }
            }
        }
        out
    }

    pub fn concat(parts: &[&Arr]) -> Arr {
        let [b, _, h, w] = parts[0].d;
        let total: usize = parts.iter().map(|p| p.d[1]).sum();
        let mut out = Arr::zeros([b, total, h, w]);
        let mut base = 0;
        for p in parts {
            for n in 0..b {
                for c in 0..p.d[1] {
                    for i in 0..h {
                        for j in 0..w {
                            out.set(n, base + c, i, j, p.at(n, c, i, j));
                        }
                    }
                }
            }
            base += p.d[1];
        }
        out
    }

    pub fn max_abs_diff(&self, t: &Tensor) -> f64 {
        assert_eq!(self.d, t.dims(), "shape mismatch");
        self.v
            .iter()
            .zip(t.data())
            .map(|(a, &b)| (a - b as f64).abs())
            .fold(0.0, f64::max)
    }
}

/// Zero-padded grouped convolution.
pub fn conv2d(x: &Arr, w: &Arr, b: Option<&Arr>, stride: usize, pad: usize, groups: usize) -> Arr {
    let [bn, ic, h, wd] = x.d;
    let [oc, icg, kh, kw] = w.d;
    assert_eq!(ic, icg * groups);
    let ocg = oc / groups;
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (wd + 2 * pad - kw) / stride + 1;
    let mut out = Arr::zeros([bn, oc, oh, ow]);
    for n in 0..bn {
        for o in 0..oc {
            let g = o / ocg;
            for i in 0..oh {
                for j in 0..ow {
                    let mut s = b.map_or(0.0, |b| b.v[o]);
                    for ci in 0..icg {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let y = (i * stride + ky) as i64 - pad as i64;
                                let xx = (j * stride + kx) as i64 - pad as i64;
                                if y < 0 || xx < 0 || y >= h as i64 || xx >= wd as i64 {
                                    continue;
                                }
                                s += w.at(o, ci, ky, kx) * x.at(n, g * icg + ci, y as usize, xx as usize);
                            }
                        }
                    }
                    out.set(n, o, i, j, s);
                }
            }
        }
    }
    out
}

/// Batched product over the last two dims with optional transposes.
pub fn matmul(a: &Arr, ta: bool, b: &Arr, tb: bool) -> Arr {
    let [b0, b1, ar, ac] = a.d;
    let [_, _, br, bc] = b.d;
    let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
    let (k2, n) = if tb { (bc, br) } else { (br, bc) };
    assert_eq!(k, k2);
    let mut out = Arr::zeros([b0, b1, m, n]);
    for p in 0..b0 {
        for q in 0..b1 {
            for i in 0..m {
                for j in 0..n {
                    let mut s = 0.0;
                    for t in 0..k {
                        let av = if ta { a.at(p, q, t, i) } else { a.at(p, q, i, t) };
                        let bv = if tb { b.at(p, q, j, t) } else { b.at(p, q, t, j) };
                        s += av * bv;
                    }
                    out.set(p, q, i, j, s);
                }
            }
        }
    }
    out
}

/// Softmax over the last axis.
pub fn softmax(x: &Arr) -> Arr {
    let n = x.d[3];
    let mut out = x.clone();
    for row in out.v.chunks_mut(n) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        for (r, e) in row.iter_mut().zip(e) {
            *r = e / s;
        }
    }
    out
}

fn softmax_vec(v: &mut [f64]) {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        s += *x;
    }
    for x in v.iter_mut() {
        *x /= s;
    }
}

pub fn gelu(v: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * v * (1.0 + (c * (v + 0.044715 * v.powi(3))).tanh())
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub fn max_pool_clipped(x: &Arr, k: usize, s: usize) -> Arr {
    let [b, c, h, w] = x.d;
    let (kh, kw) = (k.min(h), k.min(w));
    let (oh, ow) = ((h - kh) / s + 1, (w - kw) / s + 1);
    let mut out = Arr::zeros([b, c, oh, ow]);
    for n in 0..b {
        for ch in 0..c {
            for i in 0..oh {
                for j in 0..ow {
                    let mut m = f64::NEG_INFINITY;
                    for dy in 0..kh {
                        for dx in 0..kw {
                            m = m.max(x.at(n, ch, i * s + dy, j * s + dx));
                        }
                    }
                    out.set(n, ch, i, j, m);
                }
            }
        }
    }
    out
}

fn cubic(t: f64) -> f64 {
    let (a, t) = (-0.5, t.abs());
    if t <= 1.0 {
        (a + 2.0) * t.powi(3) - (a + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        a * t.powi(3) - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a
    } else {
        0.0
    }
}

/// Interpolation weights along one axis for enlarging (or keeping) a size,
/// half-pixel centers and clamped borders.
fn axis_weights(cubic_filter: bool, n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    assert!(n_out >= n_in, "oracle only enlarges");
    let scale = n_out as f64 / n_in as f64;
    (0..n_out)
        .map(|i| {
            let x = (i as f64 + 0.5) / scale - 0.5;
            let clamp = |j: i64| j.clamp(0, n_in as i64 - 1) as usize;
            if cubic_filter {
                let base = x.floor() as i64;
                let row: Vec<(usize, f64)> = (base - 1..=base + 2).map(|j| (clamp(j), cubic(x - j as f64))).collect();
                let s: f64 = row.iter().map(|r| r.1).sum();
                row.into_iter().map(|(j, w)| (j, w / s)).collect()
            } else {
                let x = x.max(0.0);
                let j0 = x.floor() as i64;
                let f = x - j0 as f64;
                vec![(clamp(j0), 1.0 - f), (clamp(j0 + 1), f)]
            }
        })
        .collect()
}

pub fn upsample(x: &Arr, cubic_filter: bool, oh: usize, ow: usize) -> Arr {
    let [b, c, h, w] = x.d;
    let (ry, rx) = (axis_weights(cubic_filter, h, oh), axis_weights(cubic_filter, w, ow));
    let mut out = Arr::zeros([b, c, oh, ow]);
    for n in 0..b {
        for ch in 0..c {
            for i in 0..oh {
                for j in 0..ow {
                    let mut s = 0.0;
                    for &(y, wy) in &ry[i] {
                        for &(xx, wx) in &rx[j] {
                            s += wy * wx * x.at(n, ch, y, xx);
                        }
                    }
                    out.set(n, ch, i, j, s);
                }
            }
        }
    }
    out
}

/// One Haar level: `[LL, LH, HL, HH]`.
pub fn haar(x: &Arr) -> [Arr; 4] {
    let [b, c, h, w] = x.d;
    let mut bands = [(); 4].map(|_| Arr::zeros([b, c, h / 2, w / 2]));
    for n in 0..b {
        for ch in 0..c {
            for i in 0..h / 2 {
                for j in 0..w / 2 {
                    let a = x.at(n, ch, 2 * i, 2 * j);
                    let bb = x.at(n, ch, 2 * i, 2 * j + 1);
                    let cc = x.at(n, ch, 2 * i + 1, 2 * j);
                    let d = x.at(n, ch, 2 * i + 1, 2 * j + 1);
                    let vals = [a + bb + cc + d, a + bb - cc - d, a - bb + cc - d, a - bb - cc + d];
                    for (band, v) in bands.iter_mut().zip(vals) {
                        band.set(n, ch, i, j, v / 2.0);
                    }
                }
            }
        }
    }
    bands
}

pub fn pad_replicate(x: &Arr, oh: usize, ow: usize) -> Arr {
    let [b, c, h, w] = x.d;
    let mut out = Arr::zeros([b, c, oh, ow]);
    for n in 0..b {
        for ch in 0..c {
            for i in 0..oh {
                for j in 0..ow {
                    out.set(n, ch, i, j, x.at(n, ch, i.min(h - 1), j.min(w - 1)));
                }
            }
        }
    }
    out
}

pub fn crop(x: &Arr, oh: usize, ow: usize) -> Arr {
    let [b, c, _, _] = x.d;
    let mut out = Arr::zeros([b, c, oh, ow]);
    for n in 0..b {
        for ch in 0..c {
            for i in 0..oh {
                for j in 0..ow {
                    out.set(n, ch, i, j, x.at(n, ch, i, j));
                }
            }
        }
    }
    out
}

pub fn pixel_shuffle(x: &Arr, s: usize) -> Arr {
    let [b, c, h, w] = x.d;
    let oc = c / (s * s);
    let mut out = Arr::zeros([b, oc, h * s, w * s]);
    for n in 0..b {
        for ch in 0..oc {
            for i in 0..h * s {
                for j in 0..w * s {
                    let src = ch * s * s + (i % s) * s + j % s;
                    out.set(n, ch, i, j, x.at(n, src, i / s, j / s));
                }
            }
        }
    }
    out
}

/// Parameters looked up by dotted name.
pub struct Params<'a>(pub &'a ParamStore);

impl Params<'_> {
    fn join(prefix: &str, name: &str) -> String {
        if prefix.is_empty() {
            name.to_string()
        } else {
            format!("{prefix}.{name}")
        }
    }

    pub fn has(&self, name: &str) -> bool {
        self.0.find(name).is_some()
    }

    pub fn get(&self, name: &str) -> Arr {
        let id = self.0.find(name).unwrap_or_else(|| panic!("no parameter {name}"));
        Arr::from_tensor(self.0.value(id))
    }

    /// Convolution `prefix.name` with "same" padding unless overridden.
    pub fn conv_ex(&self, prefix: &str, name: &str, x: &Arr, stride: usize, pad: Option<usize>) -> Arr {
        let base = Self::join(prefix, name);
        let w = self.get(&format!("{base}.weight"));
        let b = self.get(&format!("{base}.bias"));
        let groups = x.d[1] / w.d[1];
        conv2d(x, &w, Some(&b), stride, pad.unwrap_or(w.d[2] / 2), groups)
    }

    pub fn conv(&self, prefix: &str, name: &str, x: &Arr) -> Arr {
        self.conv_ex(prefix, name, x, 1, None)
    }

    /// Pointwise followed by depthwise 3x3.
    pub fn projection(&self, prefix: &str, name: &str, x: &Arr) -> Arr {
        let p = Self::join(prefix, name);
        let y = self.conv(&p, "pw", x);
        self.conv(&p, "dw", &y)
    }

    pub fn lcb(&self, prefix: &str, x: &Arr) -> Arr {
        let p = Self::join(prefix, "lcb");
        let y = self.conv(&p, "expand", x);
        let y = self.conv(&p, "dw", &y).map(gelu);
        self.conv(&p, "project", &y).add(x)
    }

    /// Window self-attention per head, then channel self-attention per head
    /// applied to its output, then the output projection.
    pub fn osa(&self, prefix: &str, x: &Arr, heads: usize, win: usize) -> Arr {
        let [b, c, h, w] = x.d;
        let d = c / heads;
        let f = self.lcb(prefix, x);
        let qkv = self.projection(prefix, "qkv", &f);
        let (q, k, v) = (qkv.channels(0, c), qkv.channels(c, c), qkv.channels(2 * c, c));

        let mut j_out = Arr::zeros(x.d);
        for n in 0..b {
            for wy in 0..h / win {
                for wx in 0..w / win {
                    let pix: Vec<(usize, usize)> = (0..win * win)
                        .map(|t| (wy * win + t / win, wx * win + t % win))
                        .collect();
                    for hd in 0..heads {
                        for &(y1, x1) in &pix {
                            let mut a: Vec<f64> = pix
                                .iter()
                                .map(|&(y2, x2)| {
                                    (0..d)
                                        .map(|t| q.at(n, hd * d + t, y1, x1) * k.at(n, hd * d + t, y2, x2))
                                        .sum::<f64>()
                                        / (d as f64).sqrt()
                                })
                                .collect();
                            softmax_vec(&mut a);
                            for t in 0..d {
                                let s: f64 = pix
                                    .iter()
                                    .zip(&a)
                                    .map(|(&(y2, x2), wgt)| wgt * v.at(n, hd * d + t, y2, x2))
                                    .sum();
                                j_out.set(n, hd * d + t, y1, x1, s);
                            }
                        }
                    }
                }
            }
        }

        let mut o = Arr::zeros(x.d);
        let norm = ((h * w) as f64).sqrt();
        for n in 0..b {
            for hd in 0..heads {
                for i in 0..d {
                    let mut a: Vec<f64> = (0..d)
                        .map(|jj| {
                            let mut s = 0.0;
                            for y in 0..h {
                                for xx in 0..w {
                                    s += q.at(n, hd * d + i, y, xx) * k.at(n, hd * d + jj, y, xx);
                                }
                            }
                            s / norm
                        })
                        .collect();
                    softmax_vec(&mut a);
                    for y in 0..h {
                        for xx in 0..w {
                            let s: f64 = (0..d).map(|jj| a[jj] * j_out.at(n, hd * d + jj, y, xx)).sum();
                            o.set(n, hd * d + i, y, xx, s);
                        }
                    }
                }
            }
        }
        self.conv(prefix, "proj", &o)
    }

    pub fn esa(&self, prefix: &str, x: &Arr) -> Arr {
        let p = Self::join(prefix, "esa");
        let [_, _, h, w] = x.d;
        let c1 = self.conv(&p, "reduce", x);
        let dn = self.conv_ex(&p, "down", &c1, 2, Some(0));
        let pooled = max_pool_clipped(&dn, 7, 3);
        let m = self.conv(&p, "mid", &pooled);
        let u = upsample(&m, false, h, w).add(&self.conv(&p, "shortcut", &c1));
        let gate = self.conv(&p, "expand", &u).map(sigmoid);
        x.mul(&gate)
    }

    pub fn scatb(&self, prefix: &str, x: &Arr, heads: usize, win: usize) -> Arr {
        let y = x.add(&self.osa(prefix, x, heads, win));
        self.esa(prefix, &y)
    }

    /// Channel-to-channel attention: `softmax(a bᵀ) v` over flattened pixels.
    fn channel_attention(a: &Arr, bb: &Arr, v: &Arr) -> Arr {
        let [b, c, h, w] = a.d;
        let mut o = Arr::zeros(a.d);
        for n in 0..b {
            for i in 0..c {
                let mut row: Vec<f64> = (0..c)
                    .map(|jj| {
                        let mut s = 0.0;
                        for y in 0..h {
                            for xx in 0..w {
                                s += a.at(n, i, y, xx) * bb.at(n, jj, y, xx);
                            }
                        }
                        s
                    })
                    .collect();
                softmax_vec(&mut row);
                for y in 0..h {
                    for xx in 0..w {
                        o.set(n, i, y, xx, (0..c).map(|jj| row[jj] * v.at(n, jj, y, xx)).sum());
                    }
                }
            }
        }
        o
    }

    pub fn afb(&self, prefix: &str, lh: &Arr, hl: &Arr, hh: &Arr) -> Arr {
        let merge_name = Self::join(prefix, "merge.weight");
        if !self.has(&merge_name) {
            return lh.add(hl).add(hh);
        }
        let merged = self.conv(prefix, "merge", &Arr::concat(&[lh, hl, hh]));
        if !self.has(&Self::join(prefix, "lh.pw.weight")) {
            return merged;
        }
        let a = self.projection(prefix, "lh", lh);
        let bb = self.projection(prefix, "hl", hl);
        let v = self.projection(prefix, "hh", hh);
        let o = Self::channel_attention(&a, &bb, &v);
        merged.add(&self.conv(prefix, "out", &o))
    }

    pub fn cab(&self, prefix: &str, f_q: &Arr, f_kv: &Arr) -> Arr {
        let c = f_q.d[1];
        let q = self.projection(prefix, "q", f_q);
        let kv = self.projection(prefix, "kv", f_kv);
        let o = Self::channel_attention(&q, &kv.channels(0, c), &kv.channels(c, c));
        self.conv(prefix, "out", &o).add(f_q)
    }

    fn fuse(&self, prefix: &str, f_q: &Arr, f_kv: &Arr) -> Arr {
        if self.has(&Self::join(prefix, "q.pw.weight")) {
            self.cab(prefix, f_q, f_kv)
        } else {
            f_q.add(f_kv)
        }
    }

    fn stack(&self, prefix: &str, mut x: Arr, cfg: &ModelConfig) -> Arr {
        for i in 0..cfg.n_scatb {
            x = self.scatb(&format!("{prefix}.{i}"), &x, cfg.heads, cfg.window);
        }
        x
    }

    fn lhfib(&self, prefix: &str, img: &Arr, cfg: &ModelConfig) -> (Arr, Arr) {
        let [ll, lh, hl, hh] = haar(img);
        let f_f = self.afb(
            &format!("{prefix}.afb"),
            &self.conv(prefix, "lift_lh", &lh),
            &self.conv(prefix, "lift_hl", &hl),
            &self.conv(prefix, "lift_hh", &hh),
        );
        let f_s = self.stack(&format!("{prefix}.scatb"), self.conv(prefix, "lift_ll", &ll), cfg);
        (self.fuse(&format!("{prefix}.cab"), &f_s, &f_f), ll)
    }

    pub fn model(&self, cfg: &ModelConfig, x: &Arr) -> Arr {
        let [_, _, h, w] = x.d;
        let m = 4 * cfg.window;
        let (ph, pw) = (h.div_ceil(m) * m, w.div_ceil(m) * m);
        let xp = pad_replicate(x, ph, pw);
        let mut f = self.stack("backbone", self.conv("", "head", &xp), cfg);
        if cfg.use_lhfib {
            let (mut f1, ll1) = self.lhfib("lhfib1", &xp, cfg);
            if cfg.dwt_levels == 2 {
                let (f2, _) = self.lhfib("lhfib2", &ll1, cfg);
                f1 = self.fuse("fuse_half", &f1, &upsample(&f2, true, ph / 2, pw / 2));
            }
            f = self.fuse("fuse_full", &f, &upsample(&f1, true, ph, pw));
        }
        let s = cfg.scale;
        let t = pixel_shuffle(&self.conv("", "tail", &f), s);
        crop(&t, s * h, s * w).add(&upsample(x, true, s * h, s * w))
    }
}

/// Mean SSIM from an explicit 2-D Gaussian window evaluated at every valid
/// position of every plane.
pub fn ssim_sliding(a: &Arr, b: &Arr) -> f64 {
    let [bn, c, h, w] = a.d;
    let (n, sigma) = (11usize, 1.5f64);
    let mut g = vec![0.0; n * n];
    let mid = (n as f64 - 1.0) / 2.0;
    for y in 0..n {
        for x in 0..n {
            let r2 = (y as f64 - mid).powi(2) + (x as f64 - mid).powi(2);
            g[y * n + x] = (-r2 / (2.0 * sigma * sigma)).exp();
        }
    }
    let total: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= total);
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let (mut acc, mut count) = (0.0, 0usize);
    for p in 0..bn {
        for ch in 0..c {
            for i in 0..=h - n {
                for j in 0..=w - n {
                    let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                    for dy in 0..n {
                        for dx in 0..n {
                            let wgt = g[dy * n + dx];
                            let u = a.at(p, ch, i + dy, j + dx);
                            let v = b.at(p, ch, i + dy, j + dx);
                            mx += wgt * u;
                            my += wgt * v;
                            xx += wgt * u * u;
                            yy += wgt * v * v;
                            xy += wgt * u * v;
                        }
                    }
                    let (vx, vy, cov) = (xx - mx * mx, yy - my * my, xy - mx * my);
                    acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                    count += 1;
                }
            }
        }
    }
    acc / count as f64
}

/// Deterministic tensor with entries uniform in `[lo, hi)`.
pub fn random_tensor(dims: [usize; 4], lo: f32, hi: f32, seed: u64) -> Tensor {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Tensor::rand_uniform(dims, lo, hi, &mut rng)
}

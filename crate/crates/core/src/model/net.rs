use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, MIN_INPUT_SIDE};
use crate::blocks::{Afb, Conv2d, Fuse, ParamBuilder, ScatbStack};
use crate::error::{ensure, Result};
use crate::ops::{ConvSpec, Filter, ResizePlan};
use crate::param::ParamStore;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use crate::wavelet::round_up;

/// Low/high frequency interaction over one wavelet level.
#[derive(Clone, Debug, PartialEq)]
pub struct Lhfib {
    pub lift_ll: Conv2d,
    pub lift_lh: Conv2d,
    pub lift_hl: Conv2d,
    pub lift_hh: Conv2d,
    pub afb: Afb,
    pub blocks: ScatbStack,
    pub cab: Fuse,
}

impl Lhfib {
    fn new(pb: &mut ParamBuilder<'_>, cfg: &ModelConfig) -> Result<Self> {
        let c = cfg.width;
        Ok(Lhfib {
            lift_ll: pb.pointwise("lift_ll", 3, c, false),
            lift_lh: pb.pointwise("lift_lh", 3, c, false),
            lift_hl: pb.pointwise("lift_hl", 3, c, false),
            lift_hh: pb.pointwise("lift_hh", 3, c, false),
            afb: Afb::new(&mut pb.scope("afb"), c, cfg.afb_mode),
            blocks: ScatbStack::new(&mut pb.scope("scatb"), cfg.n_scatb, c, cfg.heads, cfg.window)?,
            cab: Fuse::new(&mut pb.scope("cab"), c, cfg.use_cab),
        })
    }

    /// Returns the fused half-resolution feature and the raw LL band.
    pub fn forward(&self, tape: &mut Tape<'_>, img: Var) -> Result<(Var, Var)> {
        let [ll, lh, hl, hh] = tape.dwt2(img)?;
        let flh = self.lift_lh.forward(tape, lh)?;
        let fhl = self.lift_hl.forward(tape, hl)?;
        let fhh = self.lift_hh.forward(tape, hh)?;
        let f_f = self.afb.forward(tape, flh, fhl, fhh)?;
        let fll = self.lift_ll.forward(tape, ll)?;
        let f_s = self.blocks.forward(tape, fll)?;
        let f_sf = self.cab.forward(tape, f_s, f_f)?;
        Ok((f_sf, ll))
    }
}

/// The network structure; weights live in a separate [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub head: Conv2d,
    pub backbone: ScatbStack,
    pub lhfib1: Option<Lhfib>,
    pub lhfib2: Option<Lhfib>,
    pub fuse_half: Option<Fuse>,
    pub fuse_full: Option<Fuse>,
    pub tail: Conv2d,
    pub scale: usize,
    pub pad_multiple: usize,
}

impl Network {
    pub fn new(pb: &mut ParamBuilder<'_>, cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.width;
        let head = pb.conv("head", 3, c, 3, ConvSpec::same(3), false);
        let backbone = ScatbStack::new(&mut pb.scope("backbone"), cfg.n_scatb, c, cfg.heads, cfg.window)?;
        let (mut lhfib1, mut lhfib2, mut fuse_half, mut fuse_full) = (None, None, None, None);
        if cfg.use_lhfib {
            lhfib1 = Some(Lhfib::new(&mut pb.scope("lhfib1"), cfg)?);
            if cfg.dwt_levels == 2 {
                lhfib2 = Some(Lhfib::new(&mut pb.scope("lhfib2"), cfg)?);
                fuse_half = Some(Fuse::new(&mut pb.scope("fuse_half"), c, cfg.use_cab));
            }
            fuse_full = Some(Fuse::new(&mut pb.scope("fuse_full"), c, cfg.use_cab));
        }
        let tail = pb.conv("tail", c, 3 * cfg.scale * cfg.scale, 3, ConvSpec::same(3), true);
        Ok(Network {
            head,
            backbone,
            lhfib1,
            lhfib2,
            fuse_half,
            fuse_full,
            tail,
            scale: cfg.scale,
            pad_multiple: cfg.pad_multiple(),
        })
    }

    /// Record a full forward pass of `(b, 3, h, w)` images in `[0, 1]`,
    /// producing `(b, 3, s·h, s·w)`.
    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let [_, ch, h, w] = tape.shape(x).0;
        ensure!(ch == 3, "expected 3 input channels, got {ch}");
        ensure!(
            h >= MIN_INPUT_SIDE && w >= MIN_INPUT_SIDE,
            "input {h}x{w} is smaller than the minimum {MIN_INPUT_SIDE}x{MIN_INPUT_SIDE}"
        );
        let s = self.scale;
        let (ph, pw) = (round_up(h, self.pad_multiple), round_up(w, self.pad_multiple));
        let xp = if (ph, pw) == (h, w) {
            x
        } else {
            tape.pad_replicate(x, ph, pw)?
        };

        let f0 = self.head.forward(tape, xp)?;
        let mut f = self.backbone.forward(tape, f0)?;
        if let (Some(l1), Some(fuse_full)) = (&self.lhfib1, &self.fuse_full) {
            let (mut f1, ll1) = l1.forward(tape, xp)?;
            if let (Some(l2), Some(fuse_half)) = (&self.lhfib2, &self.fuse_half) {
                let (f2, _) = l2.forward(tape, ll1)?;
                let up = resize(tape, f2, ph / 2, pw / 2)?;
                f1 = fuse_half.forward(tape, f1, up)?;
            }
            let up = resize(tape, f1, ph, pw)?;
            f = fuse_full.forward(tape, f, up)?;
        }

        let t = self.tail.forward(tape, f)?;
        let t = tape.pixel_shuffle(t, s)?;
        let t = tape.crop(t, s * h, s * w)?;
        let skip = resize(tape, x, s * h, s * w)?;
        tape.add(t, skip)
    }
}

fn resize(tape: &mut Tape<'_>, x: Var, h: usize, w: usize) -> Result<Var> {
    let sh = tape.shape(x);
    let plan = ResizePlan::new(Filter::Bicubic, sh.h(), sh.w(), h, w)?;
    tape.resize(x, Rc::new(plan))
}

/// A network together with its configuration and weights.
#[derive(Clone, Debug)]
pub struct MlCraist {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub net: Network,
}

impl MlCraist {
    /// Build with deterministic initialization from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let net = Network::new(&mut ParamBuilder::new(&mut store, &mut rng), &config)?;
        Ok(MlCraist { config, store, net })
    }

    pub fn scale(&self) -> usize {
        self.config.scale
    }

    /// Inference on a `(b, 3, h, w)` batch.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::with_params(&self.store);
        let xv = tape.constant(x.clone());
        let y = self.net.forward(&mut tape, xv)?;
        Ok(tape.value(y).clone())
    }

    pub fn param_count(&self) -> usize {
        self.store.count()
    }

    /// Scalar counts per top-level module, in construction order, for the
    /// modules present in this configuration.
    pub fn module_counts(&self) -> Vec<(&'static str, usize)> {
        ["head", "backbone", "lhfib1", "lhfib2", "fuse_half", "fuse_full", "tail"]
            .into_iter()
            .map(|m| (m, self.store.count_prefix(&format!("{m}."))))
            .filter(|&(_, n)| n > 0)
            .collect()
    }
}

/// Scalars in the reconstruction conv for width `c` and scale `s`.
pub fn tail_params(width: usize, scale: usize) -> usize {
    (9 * width + 1) * 3 * scale * scale
}

/// Change in parameter count when moving from scale `s_a` to `s_b`; only
/// the reconstruction conv depends on the scale.
pub fn param_delta(s_a: usize, s_b: usize, width: usize) -> i64 {
    tail_params(width, s_b) as i64 - tail_params(width, s_a) as i64
}

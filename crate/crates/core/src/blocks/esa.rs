use std::rc::Rc;

use super::layers::{Conv2d, ParamBuilder};
use crate::error::{ensure, Result};
use crate::ops::{ConvSpec, Filter, ResizePlan};
use crate::tape::{Tape, Var};

pub const POOL_KERNEL: usize = 7;
pub const POOL_STRIDE: usize = 3;
pub const MIN_SIDE: usize = 4;

/// Enhanced spatial attention: a cheap large-receptive-field path that ends
/// in a sigmoid mask multiplied onto the input.
///
/// ```text
/// c1 = 1x1(x)            c -> c/4
/// d  = 3x3/s2(c1)        no padding
/// p  = maxpool7/s3(d)    kernel clipped to the map
/// u  = bilinear(3x3(p)) -> h x w
/// m  = sigmoid(1x1(u + 1x1(c1)))   c/4 -> c
/// y  = x * m
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct Esa {
    pub reduce: Conv2d,
    pub down: Conv2d,
    pub mid: Conv2d,
    pub shortcut: Conv2d,
    pub expand: Conv2d,
}

impl Esa {
    pub fn new(pb: &mut ParamBuilder<'_>, c: usize) -> Self {
        let f = (c / 4).max(1);
        Esa {
            reduce: pb.pointwise("reduce", c, f, false),
            down: pb.conv("down", f, f, 3, ConvSpec::new(2, 0, 1), false),
            mid: pb.conv("mid", f, f, 3, ConvSpec::same(3), false),
            shortcut: pb.pointwise("shortcut", f, f, false),
            expand: pb.pointwise("expand", f, c, true),
        }
    }

    /// The sigmoid mask, same shape as `x`.
    pub fn gate(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let shape = tape.shape(x);
        let (h, w) = (shape.h(), shape.w());
        ensure!(
            h >= MIN_SIDE && w >= MIN_SIDE,
            "spatial attention needs at least {MIN_SIDE}x{MIN_SIDE}, got {h}x{w}"
        );
        let c1 = self.reduce.forward(tape, x)?;
        let d = self.down.forward(tape, c1)?;
        let p = tape.max_pool2d(d, POOL_KERNEL, POOL_STRIDE)?;
        let m = self.mid.forward(tape, p)?;
        let ms = tape.shape(m);
        let plan = Rc::new(ResizePlan::new(Filter::Bilinear, ms.h(), ms.w(), h, w)?);
        let u = tape.resize(m, plan)?;
        let s = self.shortcut.forward(tape, c1)?;
        let u = tape.add(u, s)?;
        let e = self.expand.forward(tape, u)?;
        Ok(tape.sigmoid(e))
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let g = self.gate(tape, x)?;
        tape.mul(x, g)
    }
}

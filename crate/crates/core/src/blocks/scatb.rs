use super::esa::Esa;
use super::layers::{Conv2d, ParamBuilder};
use super::lcb::Lcb;
use crate::error::{ensure, Result};
use crate::ops::Windows;
use crate::tape::{Tape, Var};
use crate::tensor::Shape;

/// Intermediate attention maps of one OSA pass.
#[derive(Clone, Copy, Debug)]
pub struct OsaTrace {
    /// `(b * windows, heads, win², win²)`
    pub spatial: Var,
    /// `(b, heads, c / heads, c / heads)`
    pub channel: Var,
    pub output: Var,
}

/// Spatial-channel attention transformer block.
#[derive(Clone, Debug, PartialEq)]
pub struct Scatb {
    pub lcb: Lcb,
    pub qkv_pw: Conv2d,
    pub qkv_dw: Conv2d,
    pub proj: Conv2d,
    pub esa: Esa,
    pub windows: Windows,
}

impl Scatb {
    pub fn new(pb: &mut ParamBuilder<'_>, c: usize, heads: usize, win: usize) -> Result<Self> {
        ensure!(heads >= 1 && c % heads == 0, "width {c} is not divisible by {heads} heads");
        ensure!(win >= 1, "window size must be positive");
        Ok(Scatb {
            lcb: Lcb::new(&mut pb.scope("lcb"), c),
            qkv_pw: pb.pointwise("qkv.pw", c, 3 * c, false),
            qkv_dw: pb.depthwise3("qkv.dw", 3 * c),
            proj: pb.pointwise("proj", c, c, true),
            esa: Esa::new(&mut pb.scope("esa"), c),
            windows: Windows { heads, win },
        })
    }

    /// Windowed spatial attention followed by global channel attention.
    pub fn osa_trace(&self, tape: &mut Tape<'_>, x: Var) -> Result<OsaTrace> {
        let shape = tape.shape(x);
        let [b, c, h, w] = shape.0;
        let heads = self.windows.heads;
        let d = c / heads;
        // Validates divisibility before any work.
        self.windows.partitioned_shape(shape)?;

        let f = self.lcb.forward(tape, x)?;
        let qkv = self.qkv_pw.forward(tape, f)?;
        let qkv = self.qkv_dw.forward(tape, qkv)?;
        let parts = tape.chunk_channels(qkv, 3)?;
        let (q, k, v) = (parts[0], parts[1], parts[2]);

        let qs = tape.window_partition(q, self.windows)?;
        let ks = tape.window_partition(k, self.windows)?;
        let vs = tape.window_partition(v, self.windows)?;
        let logits = tape.matmul_ex(qs, false, ks, true)?;
        let logits = tape.scale(logits, 1.0 / (d as f32).sqrt());
        let spatial = tape.softmax(logits);
        let j = tape.matmul(spatial, vs)?;
        let j = tape.window_merge(j, self.windows, shape)?;

        let per_head = Shape::new(b, heads, d, h * w);
        let qc = tape.reshape(q, per_head)?;
        let kc = tape.reshape(k, per_head)?;
        let vc = tape.reshape(j, per_head)?;
        let logits = tape.matmul_ex(qc, false, kc, true)?;
        let logits = tape.scale(logits, 1.0 / ((h * w) as f32).sqrt());
        let channel = tape.softmax(logits);
        let o = tape.matmul(channel, vc)?;
        let o = tape.reshape(o, shape)?;
        let output = self.proj.forward(tape, o)?;
        Ok(OsaTrace {
            spatial,
            channel,
            output,
        })
    }

    pub fn osa(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        Ok(self.osa_trace(tape, x)?.output)
    }

    /// `esa(x + osa(x))`
    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let a = self.osa(tape, x)?;
        let y = tape.add(x, a)?;
        self.esa.forward(tape, y)
    }
}

/// A chain of SCATBs named `0`, `1`, ...
#[derive(Clone, Debug, PartialEq)]
pub struct ScatbStack {
    pub blocks: Vec<Scatb>,
}

impl ScatbStack {
    pub fn new(pb: &mut ParamBuilder<'_>, n: usize, c: usize, heads: usize, win: usize) -> Result<Self> {
        let blocks = (0..n)
            .map(|i| Scatb::new(&mut pb.scope(i.to_string()), c, heads, win))
            .collect::<Result<_>>()?;
        Ok(ScatbStack { blocks })
    }

    pub fn forward(&self, tape: &mut Tape<'_>, mut x: Var) -> Result<Var> {
        for block in &self.blocks {
            x = block.forward(tape, x)?;
        }
        Ok(x)
    }
}

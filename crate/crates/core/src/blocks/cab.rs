use super::layers::{Conv2d, ParamBuilder, Projection};
use crate::error::{ensure, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Shape;

/// Channel-wise cross attention. Queries come from `f_q`, keys and values
/// from `f_kv`; the residual flows from `f_q`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cab {
    pub q: Projection,
    pub kv: Projection,
    pub out: Conv2d,
}

impl Cab {
    pub fn new(pb: &mut ParamBuilder<'_>, c: usize) -> Self {
        Cab {
            q: Projection::new(&mut pb.scope("q"), c, c),
            kv: Projection::new(&mut pb.scope("kv"), c, 2 * c),
            out: pb.pointwise("out", c, c, true),
        }
    }

    /// Returns the output and the `(b, 1, c, c)` attention map.
    pub fn forward_trace(&self, tape: &mut Tape<'_>, f_q: Var, f_kv: Var) -> Result<(Var, Var)> {
        let shape = tape.shape(f_q);
        ensure!(
            tape.shape(f_kv) == shape,
            "cross attention inputs differ in shape: {} vs {}",
            shape,
            tape.shape(f_kv)
        );
        let [b, c, h, w] = shape.0;
        let flat = Shape::new(b, 1, c, h * w);
        let q = self.q.forward(tape, f_q)?;
        let q = tape.reshape(q, flat)?;
        let kv = self.kv.forward(tape, f_kv)?;
        let parts = tape.chunk_channels(kv, 2)?;
        let k = tape.reshape(parts[0], flat)?;
        let v = tape.reshape(parts[1], flat)?;
        let logits = tape.matmul_ex(q, false, k, true)?;
        let map = tape.softmax(logits);
        let o = tape.matmul(map, v)?;
        let o = tape.reshape(o, shape)?;
        let o = self.out.forward(tape, o)?;
        Ok((tape.add(o, f_q)?, map))
    }

    pub fn forward(&self, tape: &mut Tape<'_>, f_q: Var, f_kv: Var) -> Result<Var> {
        Ok(self.forward_trace(tape, f_q, f_kv)?.0)
    }
}

/// Merge of two equally shaped streams: cross attention, or the plain sum
/// used when cross attention is disabled.
#[derive(Clone, Debug, PartialEq)]
pub enum Fuse {
    Cross(Cab),
    Add,
}

impl Fuse {
    pub fn new(pb: &mut ParamBuilder<'_>, c: usize, cross: bool) -> Self {
        if cross {
            Fuse::Cross(Cab::new(pb, c))
        } else {
            Fuse::Add
        }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, f_q: Var, f_kv: Var) -> Result<Var> {
        match self {
            Fuse::Cross(cab) => cab.forward(tape, f_q, f_kv),
            Fuse::Add => tape.add(f_q, f_kv),
        }
    }
}

use serde::{Deserialize, Serialize};

use super::layers::{Conv2d, ParamBuilder, Projection};
use crate::error::{ensure, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Shape;

/// How the three high-frequency sub-band features are merged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AfbMode {
    /// Channel attention from LH/HL applied to HH, plus a 1x1 over the
    /// concatenated bands.
    #[default]
    Attention,
    /// Plain sum `LH + HL + HH`.
    Add,
    /// 1x1 over the concatenated bands only.
    Concat,
}

impl std::str::FromStr for AfbMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "attention" => Ok(AfbMode::Attention),
            "add" => Ok(AfbMode::Add),
            "concat" => Ok(AfbMode::Concat),
            other => Err(format!("unknown fusion mode `{other}` (attention, add, concat)")),
        }
    }
}

impl std::fmt::Display for AfbMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AfbMode::Attention => "attention",
            AfbMode::Add => "add",
            AfbMode::Concat => "concat",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AfbAttention {
    pub lh: Projection,
    pub hl: Projection,
    pub hh: Projection,
    pub out: Conv2d,
}

/// Attention-based fusion of the LH, HL and HH features.
#[derive(Clone, Debug, PartialEq)]
pub struct Afb {
    pub attention: Option<AfbAttention>,
    pub merge: Option<Conv2d>,
}

impl Afb {
    pub fn new(pb: &mut ParamBuilder<'_>, c: usize, mode: AfbMode) -> Self {
        let attention = (mode == AfbMode::Attention).then(|| AfbAttention {
            lh: Projection::new(&mut pb.scope("lh"), c, c),
            hl: Projection::new(&mut pb.scope("hl"), c, c),
            hh: Projection::new(&mut pb.scope("hh"), c, c),
            out: pb.pointwise("out", c, c, true),
        });
        let merge = (mode != AfbMode::Add).then(|| pb.pointwise("merge", 3 * c, c, false));
        Afb { attention, merge }
    }

    pub fn mode(&self) -> AfbMode {
        match (&self.attention, &self.merge) {
            (Some(_), _) => AfbMode::Attention,
            (None, Some(_)) => AfbMode::Concat,
            (None, None) => AfbMode::Add,
        }
    }

    /// Returns the fused feature and, in attention mode, the `(b, 1, c, c)`
    /// attention map.
    pub fn forward_trace(&self, tape: &mut Tape<'_>, lh: Var, hl: Var, hh: Var) -> Result<(Var, Option<Var>)> {
        let shape = tape.shape(lh);
        ensure!(
            tape.shape(hl) == shape && tape.shape(hh) == shape,
            "sub-band features differ in shape: {} {} {}",
            shape,
            tape.shape(hl),
            tape.shape(hh)
        );
        let Some(merge) = &self.merge else {
            let s = tape.add(lh, hl)?;
            return Ok((tape.add(s, hh)?, None));
        };
        let cat = tape.concat_channels(&[lh, hl, hh])?;
        let merged = merge.forward(tape, cat)?;
        let Some(att) = &self.attention else {
            return Ok((merged, None));
        };
        let [b, c, h, w] = shape.0;
        let flat = Shape::new(b, 1, c, h * w);
        let a = att.lh.forward(tape, lh)?;
        let a = tape.reshape(a, flat)?;
        let bb = att.hl.forward(tape, hl)?;
        let bb = tape.reshape(bb, flat)?;
        let v = att.hh.forward(tape, hh)?;
        let v = tape.reshape(v, flat)?;
        let logits = tape.matmul_ex(a, false, bb, true)?;
        let map = tape.softmax(logits);
        let o = tape.matmul(map, v)?;
        let o = tape.reshape(o, shape)?;
        let o = att.out.forward(tape, o)?;
        Ok((tape.add(merged, o)?, Some(map)))
    }

    pub fn forward(&self, tape: &mut Tape<'_>, lh: Var, hl: Var, hh: Var) -> Result<Var> {
        Ok(self.forward_trace(tape, lh, hl, hh)?.0)
    }
}

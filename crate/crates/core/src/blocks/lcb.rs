use super::layers::{Conv2d, ParamBuilder};
use crate::error::Result;
use crate::tape::{Tape, Var};

/// Local context block: expand 1x1 (c -> 2c), 3x3 depthwise, GELU,
/// project 1x1 (2c -> c), plus the input. The projection starts at zero, so
/// a fresh block is the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Lcb {
    pub expand: Conv2d,
    pub depthwise: Conv2d,
    pub project: Conv2d,
}

impl Lcb {
    pub fn new(pb: &mut ParamBuilder<'_>, c: usize) -> Self {
        Lcb {
            expand: pb.pointwise("expand", c, 2 * c, false),
            depthwise: pb.depthwise3("dw", 2 * c),
            project: pb.pointwise("project", 2 * c, c, true),
        }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let y = self.expand.forward(tape, x)?;
        let y = self.depthwise.forward(tape, y)?;
        let y = tape.gelu(y);
        let y = self.project.forward(tape, y)?;
        tape.add(y, x)
    }
}

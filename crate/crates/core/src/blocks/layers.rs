use rand::RngCore;

use crate::error::Result;
use crate::ops::ConvSpec;
use crate::param::{Init, ParamId, ParamStore};
use crate::tape::{Tape, Var};

/// Registers parameters under a dot-separated name prefix.
pub struct ParamBuilder<'a> {
    store: &'a mut ParamStore,
    rng: &'a mut dyn RngCore,
    prefix: String,
}

impl<'a> ParamBuilder<'a> {
    pub fn new(store: &'a mut ParamStore, rng: &'a mut dyn RngCore) -> Self {
        ParamBuilder {
            store,
            rng,
            prefix: String::new(),
        }
    }

    /// A builder whose names are nested under `name`.
    pub fn scope(&mut self, name: impl AsRef<str>) -> ParamBuilder<'_> {
        ParamBuilder {
            prefix: self.path(name.as_ref()),
            store: self.store,
            rng: self.rng,
        }
    }

    fn path(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        }
    }

    pub fn param(&mut self, name: &str, dims: &[usize], init: Init) -> ParamId {
        let full = self.path(name);
        self.store.add(full, dims, init, &mut *self.rng)
    }

    /// A biased convolution. Weights are Kaiming-uniform unless `zero`.
    pub fn conv(&mut self, name: &str, in_c: usize, out_c: usize, kernel: usize, spec: ConvSpec, zero: bool) -> Conv2d {
        let icg = in_c / spec.groups;
        let init = if zero {
            Init::Zeros
        } else {
            Init::KaimingUniform {
                fan_in: icg * kernel * kernel,
            }
        };
        let mut scope = self.scope(name);
        let weight = scope.param("weight", &[out_c, icg, kernel, kernel], init);
        let bias = scope.param("bias", &[out_c], Init::Zeros);
        Conv2d {
            weight,
            bias: Some(bias),
            spec,
        }
    }

    /// 1x1 convolution.
    pub fn pointwise(&mut self, name: &str, in_c: usize, out_c: usize, zero: bool) -> Conv2d {
        self.conv(name, in_c, out_c, 1, ConvSpec::new(1, 0, 1), zero)
    }

    /// 3x3 depthwise convolution, padding 1.
    pub fn depthwise3(&mut self, name: &str, c: usize) -> Conv2d {
        self.conv(name, c, c, 3, ConvSpec::new(1, 1, c), false)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub spec: ConvSpec,
}

impl Conv2d {
    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let w = tape.param(self.weight);
        let b = self.bias.map(|b| tape.param(b));
        tape.conv2d(x, w, b, self.spec)
    }

    pub fn params(&self) -> impl Iterator<Item = ParamId> {
        std::iter::once(self.weight).chain(self.bias)
    }
}

/// 1x1 convolution followed by a 3x3 depthwise convolution, the projection
/// used for every query/key/value stream.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub pointwise: Conv2d,
    pub depthwise: Conv2d,
}

impl Projection {
    pub fn new(pb: &mut ParamBuilder<'_>, in_c: usize, out_c: usize) -> Self {
        Projection {
            pointwise: pb.pointwise("pw", in_c, out_c, false),
            depthwise: pb.depthwise3("dw", out_c),
        }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let y = self.pointwise.forward(tape, x)?;
        self.depthwise.forward(tape, y)
    }
}

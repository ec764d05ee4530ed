use serde::{Deserialize, Serialize};

use crate::blocks::AfbMode;
use crate::error::{Error, Result};

/// Smallest accepted low-resolution side.
pub const MIN_INPUT_SIDE: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub scale: usize,
    pub width: usize,
    pub n_scatb: usize,
    pub heads: usize,
    pub window: usize,
    pub afb_mode: AfbMode,
    pub use_cab: bool,
    pub use_lhfib: bool,
    pub dwt_levels: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::full(4)
    }
}

/// Named structural variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ablation {
    None,
    /// High-frequency bands merged by summation.
    AfbAdd,
    /// High-frequency bands merged by a 1x1 over their concatenation.
    AfbConcat,
    /// Cross attention replaced by element-wise addition.
    NoCab,
    /// Backbone and reconstruction only.
    NoLhfib,
    /// A single wavelet level.
    DwtLevel1,
}

impl std::str::FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "none" => Ablation::None,
            "afb-add" | "no-afb-add" => Ablation::AfbAdd,
            "afb-concat" | "no-afb-concat" => Ablation::AfbConcat,
            "no-cab" => Ablation::NoCab,
            "no-lhfib" => Ablation::NoLhfib,
            "dwt-level1" | "dwt1" => Ablation::DwtLevel1,
            other => {
                return Err(format!(
                    "unknown ablation `{other}` (none, afb-add, afb-concat, no-cab, no-lhfib, dwt-level1)"
                ))
            }
        })
    }
}

impl ModelConfig {
    /// 64 channels, 5 blocks, 4 heads, window 8.
    pub fn full(scale: usize) -> Self {
        ModelConfig {
            scale,
            width: 64,
            n_scatb: 5,
            heads: 4,
            window: 8,
            afb_mode: AfbMode::Attention,
            use_cab: true,
            use_lhfib: true,
            dwt_levels: 2,
        }
    }

    /// The 48-channel variant.
    pub fn lite(scale: usize) -> Self {
        ModelConfig {
            width: 48,
            ..ModelConfig::full(scale)
        }
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        match ablation {
            Ablation::None => {}
            Ablation::AfbAdd => self.afb_mode = AfbMode::Add,
            Ablation::AfbConcat => self.afb_mode = AfbMode::Concat,
            Ablation::NoCab => self.use_cab = false,
            Ablation::NoLhfib => self.use_lhfib = false,
            Ablation::DwtLevel1 => self.dwt_levels = 1,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(2..=4).contains(&self.scale) {
            return fail(format!("scale must be 2, 3 or 4, got {}", self.scale));
        }
        if self.width == 0 || self.heads == 0 || self.width % self.heads != 0 {
            return fail(format!("width {} must be a positive multiple of heads {}", self.width, self.heads));
        }
        if self.width % 4 != 0 {
            return fail(format!("width {} must be a multiple of 4", self.width));
        }
        if self.n_scatb == 0 {
            return fail("at least one attention block is required".into());
        }
        if self.window == 0 {
            return fail("window size must be positive".into());
        }
        if !(1..=2).contains(&self.dwt_levels) {
            return fail(format!("dwt_levels must be 1 or 2, got {}", self.dwt_levels));
        }
        if self.use_lhfib && self.pad_multiple() >> self.dwt_levels < crate::blocks::ESA_MIN_SIDE {
            return fail(format!(
                "window {} is too small for {} wavelet levels (coarsest band would be under {} pixels)",
                self.window,
                self.dwt_levels,
                crate::blocks::ESA_MIN_SIDE
            ));
        }
        Ok(())
    }

    /// Spatial multiple every input is padded to: two wavelet halvings,
    /// then whole attention windows.
    pub fn pad_multiple(&self) -> usize {
        4 * self.window
    }
}

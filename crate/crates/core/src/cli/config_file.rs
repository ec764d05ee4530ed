//! Flat `key = value` configuration files. Blank lines and lines starting
//! with `#` are ignored.
//!
//! | key | meaning |
//! |-----|---------|
//! | `scale`, `width`, `n_scatb`, `heads`, `window`, `dwt_levels` | model shape |
//! | `afb_mode` | `attention`, `add` or `concat` |
//! | `use_cab`, `use_lhfib` | `true` / `false` |
//! | `ablation` | a named variant, applied after the keys above |
//! | `batch_size`, `iters`, `patch_size`, `seed`, `log_every` | training loop |
//! | `lr`, `lr_halving_period`, `beta1`, `beta2`, `eps` | optimizer |

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Ablation, ModelConfig};
use crate::train::TrainConfig;

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got `{line}`", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text)
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| Error::Config(format!("bad value `{v}` for `{key}`: {e}")))
}

/// Apply entries on top of the given configurations.
pub fn apply(entries: &[(String, String)], model: &mut ModelConfig, train: &mut TrainConfig) -> Result<()> {
    let mut ablation = None;
    for (k, v) in entries {
        match k.as_str() {
            "scale" => model.scale = value(k, v)?,
            "width" => model.width = value(k, v)?,
            "n_scatb" => model.n_scatb = value(k, v)?,
            "heads" => model.heads = value(k, v)?,
            "window" => model.window = value(k, v)?,
            "dwt_levels" => model.dwt_levels = value(k, v)?,
            "afb_mode" => model.afb_mode = value(k, v)?,
            "use_cab" => model.use_cab = value(k, v)?,
            "use_lhfib" => model.use_lhfib = value(k, v)?,
            "ablation" => ablation = Some(value::<Ablation>(k, v)?),
            "batch_size" => train.batch_size = value(k, v)?,
            "iters" => train.total_iters = value(k, v)?,
            "patch_size" => train.patch_size = value(k, v)?,
            "seed" => train.seed = value(k, v)?,
            "log_every" => train.log_every = value(k, v)?,
            "lr" => train.base_lr = value(k, v)?,
            "lr_halving_period" => train.lr_halving_period = Some(value(k, v)?),
            "beta1" => train.adam.beta1 = value(k, v)?,
            "beta2" => train.adam.beta2 = value(k, v)?,
            "eps" => train.adam.eps = value(k, v)?,
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
    }
    if let Some(a) = ablation {
        *model = model.clone().with_ablation(a);
    }
    Ok(())
}

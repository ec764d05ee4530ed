use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step_all, AdamConfig};
use super::data::Dataset;
use super::loss::l1;
use super::schedule::{default_period, lr_at};
use crate::error::{Error, Result};
use crate::model::MlCraist;
use crate::tape::Tape;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub total_iters: u64,
    pub base_lr: f64,
    /// Defaults to a fifth of `total_iters`.
    pub lr_halving_period: Option<u64>,
    /// Low-resolution patch side.
    pub patch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// A log line every this many iterations (and always on the last).
    pub log_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            total_iters: 1_000_000,
            base_lr: 1e-4,
            lr_halving_period: None,
            patch_size: 64,
            seed: 0,
            adam: AdamConfig::default(),
            log_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn halving_period(&self) -> u64 {
        self.lr_halving_period.unwrap_or_else(|| default_period(self.total_iters))
    }

    pub fn lr_at(&self, iter: u64) -> f64 {
        lr_at(iter, self.base_lr, self.halving_period())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.into()));
        if self.batch_size == 0 {
            return fail("batch size must be at least 1");
        }
        if self.patch_size == 0 {
            return fail("patch size must be positive");
        }
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return fail("learning rate must be positive");
        }
        if self.lr_halving_period == Some(0) {
            return fail("halving period must be positive");
        }
        if self.log_every == 0 {
            return fail("log interval must be positive");
        }
        Ok(())
    }
}

/// One training iteration's record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub iter: u64,
    pub loss: f64,
    pub lr: f64,
}

impl StepRecord {
    /// `iter <n> loss <float> lr <float>`
    pub fn log_line(&self) -> String {
        format!("iter {} loss {:.8} lr {:e}", self.iter, self.loss, self.lr)
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    /// Every iteration's loss, in order.
    pub losses: Vec<f64>,
    /// The lines emitted to the log sink.
    pub log: Vec<String>,
}

impl TrainReport {
    /// Mean loss over the first and last `fraction` of iterations.
    pub fn head_tail_means(&self, fraction: f64) -> (f64, f64) {
        let n = self.losses.len();
        let k = ((n as f64 * fraction).round() as usize).clamp(1, n.max(1));
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len().max(1) as f64;
        (mean(&self.losses[..k.min(n)]), mean(&self.losses[n - k.min(n)..]))
    }
}

/// Train in place with L1 loss and Adam. `sink` receives each log line as it
/// is produced.
pub fn train(
    model: &mut MlCraist,
    data: &Dataset,
    cfg: &TrainConfig,
    mut sink: impl FnMut(&str) -> Result<()>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.scale() != model.scale() {
        return Err(Error::Config(format!(
            "dataset prepared for scale {} but the model upscales by {}",
            data.scale(),
            model.scale()
        )));
    }
    data.check_patch(cfg.patch_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = TrainReport::default();
    for iter in 0..cfg.total_iters {
        let lr = cfg.lr_at(iter);
        let (lr_batch, hr_batch) = data.batch(&mut rng, cfg.batch_size, cfg.patch_size)?;
        let (loss, grads) = {
            let mut tape = Tape::with_params(&model.store);
            let x = tape.constant(lr_batch);
            let y = model.net.forward(&mut tape, x)?;
            let loss = l1(tape.value(y), &hr_batch)?;
            let root = tape.l1_loss(y, &hr_batch)?;
            (loss, tape.backward(root)?)
        };
        model.store.zero_grad();
        grads.accumulate_into(&mut model.store);
        if !loss.is_finite() {
            return Err(non_finite(model, iter, loss));
        }
        if let Some(p) = model.store.iter().find(|p| !p.grad.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of `{}` at iteration {iter}", p.name)));
        }
        adam_step_all(&mut model.store, lr, cfg.adam);
        if let Some(p) = model.store.iter().find(|p| !p.value.is_finite()) {
            return Err(Error::NonFinite(format!("value of `{}` after iteration {iter}", p.name)));
        }
        report.losses.push(loss);
        if iter % cfg.log_every == 0 || iter + 1 == cfg.total_iters {
            let line = StepRecord { iter, loss, lr }.log_line();
            sink(&line)?;
            report.log.push(line);
        }
    }
    Ok(report)
}

fn non_finite(model: &MlCraist, iter: u64, loss: f64) -> Error {
    let culprit = model
        .store
        .iter()
        .find(|p| !p.value.is_finite())
        .map(|p| format!("value of `{}`", p.name))
        .or_else(|| {
            model
                .store
                .iter()
                .find(|p| !p.grad.is_finite())
                .map(|p| format!("gradient of `{}`", p.name))
        })
        .unwrap_or_else(|| "the input batch".into());
    Error::NonFinite(format!("loss {loss} at iteration {iter}; first offending tensor: {culprit}"))
}

use serde::{Deserialize, Serialize};

use crate::param::{Param, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of a single parameter from its `grad`.
pub fn adam_step(p: &mut Param, lr: f64, cfg: AdamConfig) {
    p.step += 1;
    let t = p.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let Param { value, grad, m, v, .. } = p;
    let it = value
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
    for ((w, &g), (m, v)) in it {
        let g = g as f64;
        let mn = cfg.beta1 * *m as f64 + (1.0 - cfg.beta1) * g;
        let vn = cfg.beta2 * *v as f64 + (1.0 - cfg.beta2) * g * g;
        *m = mn as f32;
        *v = vn as f32;
        let update = lr * (mn / bc1) / ((vn / bc2).sqrt() + cfg.eps);
        *w = (*w as f64 - update) as f32;
    }
}

/// Update every parameter in the store.
pub fn adam_step_all(store: &mut ParamStore, lr: f64, cfg: AdamConfig) {
    for p in store.iter_mut() {
        adam_step(p, lr, cfg);
    }
}

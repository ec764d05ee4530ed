/// Step decay: `base · 0.5^⌊iter / period⌋`.
pub fn lr_at(iter: u64, base_lr: f64, halving_period: u64) -> f64 {
    let halvings = iter / halving_period.max(1);
    base_lr * 0.5f64.powi(halvings.min(i32::MAX as u64) as i32)
}

/// The halving period for a run of `total_iters`: five phases.
pub fn default_period(total_iters: u64) -> u64 {
    (total_iters / 5).max(1)
}

use crate::error::{ensure, Result};
use crate::tensor::Tensor;

/// Mean absolute error, accumulated in `f64`.
pub fn l1(pred: &Tensor, target: &Tensor) -> Result<f64> {
    ensure!(
        pred.shape() == target.shape(),
        "l1 loss shape mismatch: {} vs {}",
        pred.shape(),
        target.shape()
    );
    let n = pred.numel().max(1);
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| (p as f64 - t as f64).abs())
        .sum();
    Ok(sum / n as f64)
}

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// `sum((pred - target)^2) / (2 * batch)` and its gradient `(pred - target) / batch`.
///
/// `batch` is the number of images the caller sums over, so the per-image
/// losses of one minibatch add up to the minibatch loss.
pub fn euclidean_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>, batch: usize) -> Result<(f64, Tensor<T>)> {
    if pred.shape() != target.shape() {
        let axis = pred
            .shape()
            .iter()
            .zip(target.shape())
            .position(|(a, b)| a != b)
            .unwrap_or(pred.shape().len().min(target.shape().len()));
        let dim = |s: &[usize]| s.get(axis).copied().unwrap_or(0);
        return Err(Error::shape(
            "euclidean loss",
            format!("axis {axis}"),
            dim(target.shape()),
            dim(pred.shape()),
        ));
    }
    if batch == 0 {
        return Err(Error::config("loss batch size must be positive"));
    }
    let inv = T::lit(1.0 / batch as f64);
    let mut sum = 0.0f64;
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            sum += d.as_f64() * d.as_f64();
            d * inv
        })
        .collect();
    Ok((sum / (2.0 * batch as f64), Tensor::new(pred.shape().to_vec(), grad)?))
}

use crate::error::{bail, Result};
use crate::nn::{Scalar, Tensor};

/// Mean over the batch of half the Euclidean distance between predicted and
/// true `(x, y)`. Returns the loss and its gradient with respect to `pred`.
///
/// At exactly zero error the gradient is taken as 0.
pub fn euclidean_loss<T: Scalar>(pred: &Tensor<T>, truth: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    let n = match pred.shape() {
        [n, 2] => *n,
        other => bail!(Shape, "euclidean loss expects [N, 2] predictions, got {:?}", other),
    };
    truth.ensure_shape(pred.shape(), "euclidean loss truth")?;
    if n == 0 {
        bail!(Shape, "euclidean loss on an empty batch");
    }
    let half = T::lit(0.5);
    let inv_n = T::one() / T::lit(n as f64);
    let mut total = T::zero();
    let mut grad = vec![T::zero(); 2 * n];
    for (i, (p, t)) in pred.data().chunks(2).zip(truth.data().chunks(2)).enumerate() {
        let dx = p[0] - t[0];
        let dy = p[1] - t[1];
        let dist = (dx * dx + dy * dy).sqrt();
        total += half * dist;
        if dist > T::zero() {
            grad[2 * i] = half * inv_n * dx / dist;
            grad[2 * i + 1] = half * inv_n * dy / dist;
        }
    }
    Ok((total * inv_n, Tensor::from_vec(pred.shape(), grad)?))
}

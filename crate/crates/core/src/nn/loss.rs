use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn rows<T: Scalar>(logits: &Tensor<T>) -> Result<(usize, usize)> {
    match logits.shape() {
        &[b, k] if b > 0 && k > 0 => Ok((b, k)),
        s => Err(Error::dim("loss", format!("logits must be [batch, classes], got {s:?}"))),
    }
}

/// Row-wise softmax using the max-shift for stability.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, k) = rows(logits)?;
    let mut out = Vec::with_capacity(b * k);
    for r in logits.data().chunks(k) {
        let m = r.iter().copied().fold(T::neg_infinity(), T::max);
        let e: Vec<T> = r.iter().map(|&z| (z - m).exp()).collect();
        let s: T = e.iter().copied().sum();
        out.extend(e.into_iter().map(|v| v / s));
    }
    Tensor::new(vec![b, k], out)
}

/// Mean softmax cross-entropy over the batch and its gradient
/// `(softmax - one_hot) / batch`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    let (b, k) = rows(logits)?;
    if labels.len() != b {
        return Err(Error::dim("loss", format!("{} labels for a batch of {b}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Label { label: bad, classes: k });
    }
    let inv_b = T::one() / T::from_usize_lossy(b);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(b * k);
    for (r, &label) in logits.data().chunks(k).zip(labels) {
        let m = r.iter().copied().fold(T::neg_infinity(), T::max);
        let s: T = r.iter().map(|&z| (z - m).exp()).sum();
        let lse = m + s.ln();
        loss += lse - r[label];
        for (j, &z) in r.iter().enumerate() {
            let p = (z - lse).exp();
            let t = if j == label { T::one() } else { T::zero() };
            grad.push((p - t) * inv_b);
        }
    }
    Ok((loss * inv_b, Tensor::new(vec![b, k], grad)?))
}

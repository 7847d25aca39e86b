use crate::error::{precondition, Result};
use crate::{Real, Tensor};

/// Row-wise softmax of `[n,K,1,1]` logits.
pub fn softmax<T: Real>(logits: &Tensor<T>) -> Tensor<T> {
    let k = logits.sample_len();
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Mean negative log-likelihood of `labels` under `softmax(logits)`,
/// with gradient `(softmax − onehot)/n`.
pub fn softmax_cross_entropy<T: Real>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(T, Tensor<T>)> {
    let n = logits.n();
    let k = logits.sample_len();
    if labels.len() != n {
        return precondition(
            "softmax_cross_entropy",
            format!("{} labels for {n} rows", labels.len()),
        );
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return precondition(
            "softmax_cross_entropy",
            format!("label {bad} out of range for {k} classes"),
        );
    }
    let mut grad = softmax(logits);
    let mut loss = 0.0f64;
    let inv_n = T::one() / T::from_usize(n).expect("batch size");
    for ((row, logit_row), &y) in grad
        .data_mut()
        .chunks_mut(k)
        .zip(logits.data().chunks(k))
        .zip(labels)
    {
        // log-sum-exp on the raw logits keeps saturated rows exact
        let max = logit_row
            .iter()
            .copied()
            .fold(T::neg_infinity(), T::max)
            .to_f64_lossy();
        let lse = max
            + logit_row
                .iter()
                .map(|v| (v.to_f64_lossy() - max).exp())
                .sum::<f64>()
                .ln();
        loss += lse - logit_row[y].to_f64_lossy();
        row[y] -= T::one();
        row.iter_mut().for_each(|v| *v *= inv_n);
    }
    Ok((T::from_f64_lossy(loss / n as f64), grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Tensor::<f64>::zeros([3, 4, 1, 1]);
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 1, 3]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_correct_prediction_has_near_zero_loss() {
        let logits = Tensor::<f32>::new([1, 4, 1, 1], vec![0.0, 50.0, 0.0, 0.0]).unwrap();
        let (loss, grad) = softmax_cross_entropy(&logits, &[1]).unwrap();
        assert!(loss.abs() < 1e-6);
        assert!(grad.all_finite());
    }

    #[test]
    fn out_of_range_label_is_rejected() {
        let logits = Tensor::<f32>::zeros([1, 4, 1, 1]);
        assert!(softmax_cross_entropy(&logits, &[4]).is_err());
        assert!(softmax_cross_entropy(&logits, &[0, 1]).is_err());
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let logits =
            Tensor::<f32>::new([2, 3, 1, 1], vec![1.0, 2.0, 3.0, -100.0, 0.0, 100.0]).unwrap();
        let s = softmax(&logits);
        for row in s.data().chunks(3) {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        }
    }
}

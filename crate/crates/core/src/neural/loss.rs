use crate::error::{Error, Result};

/// Tolerance on the total probability mass accepted by [`loss_xent`].
const PROBABILITY_SUM_TOLERANCE: f64 = 1e-6;

/// Root mean square error over all entries.
pub fn loss_rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Empty("loss_rmse"));
    }
    let sq: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok((sq / pred.len() as f64).sqrt())
}

/// `−ln probs[label]` for a normalized probability vector.
pub fn loss_xent(probs: &[f64], label: usize) -> Result<f64> {
    if label >= probs.len() {
        return Err(Error::Shape(format!(
            "label {label} outside {} classes",
            probs.len()
        )));
    }
    let sum: f64 = probs.iter().sum();
    if probs.iter().any(|&p| !(0.0..=1.0).contains(&p))
        || (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE
    {
        return Err(Error::InvalidArgument(format!(
            "probabilities are not normalized (sum {sum})"
        )));
    }
    Ok(-probs[label].ln())
}

/// Numerically stable softmax, in place.
pub fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v /= sum;
    }
}

/// RMSE of a minibatch and its gradient with respect to the predictions.
/// At zero error the gradient is defined as zero.
pub(crate) fn rmse_with_grad(pred: &[f64], target: &[f64], grad: &mut [f64]) -> f64 {
    let n = pred.len() as f64;
    let mut sq = 0.0;
    for (p, t) in pred.iter().zip(target) {
        sq += (p - t) * (p - t);
    }
    let rmse = (sq / n).sqrt();
    for ((g, p), t) in grad.iter_mut().zip(pred).zip(target) {
        *g = if rmse > 0.0 { (p - t) / (n * rmse) } else { 0.0 };
    }
    rmse
}

/// Mean cross-entropy of a minibatch of logits (B × C) and its gradient
/// with respect to the logits.
pub(crate) fn xent_with_grad(
    logits: &[f64],
    labels: &[usize],
    classes: usize,
    grad: &mut [f64],
) -> f64 {
    let batch = labels.len();
    let mut total = 0.0;
    for (b, &label) in labels.iter().enumerate() {
        let row = &mut grad[b * classes..(b + 1) * classes];
        row.copy_from_slice(&logits[b * classes..(b + 1) * classes]);
        softmax_in_place(row);
        total -= row[label].max(f64::MIN_POSITIVE).ln();
        row[label] -= 1.0;
        for g in row.iter_mut() {
            *g /= batch as f64;
        }
    }
    total / batch as f64
}

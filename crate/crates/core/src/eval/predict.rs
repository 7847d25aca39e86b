use crate::arch::Model;
use crate::data::Dataset;
use crate::error::{precondition, Result};
use crate::layers::Module;
use crate::ops::softmax;
use crate::Tensor;

use super::ConfusionMatrix;

pub const EVAL_BATCH: usize = 64;

/// Index of the largest entry; exact ties go to the lowest index.
pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Eval-mode logits for every sample, `[N, classes, 1, 1]`.
pub fn predict_logits(model: &Model<f32>, data: &Dataset) -> Result<Tensor<f32>> {
    if data.is_empty() {
        return precondition("evaluate", "empty sample list");
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut parts = Vec::new();
    for chunk in idx.chunks(EVAL_BATCH) {
        let (x, _) = data.batch(chunk)?;
        parts.push(model.forward_eval(&x)?);
    }
    let refs: Vec<&Tensor<f32>> = parts.iter().collect();
    Tensor::stack(&refs)
}

pub fn predict_classes(model: &Model<f32>, data: &Dataset) -> Result<Vec<usize>> {
    let logits = predict_logits(model, data)?;
    Ok((0..logits.n()).map(|i| argmax(logits.sample(i))).collect())
}

/// Softmax probabilities per sample.
pub fn predict_probs(model: &Model<f32>, data: &Dataset) -> Result<Tensor<f32>> {
    Ok(softmax(&predict_logits(model, data)?))
}

/// Summary of one evaluation run.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
}

pub fn evaluate(model: &Model<f32>, data: &Dataset) -> Result<EvalReport> {
    let pred = predict_classes(model, data)?;
    let confusion = ConfusionMatrix::from_pairs(&data.labels(), &pred)?;
    Ok(EvalReport {
        accuracy: confusion.accuracy(),
        confusion,
    })
}

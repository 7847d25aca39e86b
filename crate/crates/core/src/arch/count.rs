use super::Model;
use crate::Real;

/// Learnable scalar totals, grouped by top-level block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamCount {
    pub total: usize,
    pub bytes_f32: usize,
    /// `(block, scalars)` in graph order: `stem`, `layer1..3`, `fusion`,
    /// `attn_b`, `classifier`.
    pub blocks: Vec<(String, usize)>,
}

impl ParamCount {
    pub fn block(&self, name: &str) -> Option<usize> {
        self.blocks.iter().find(|(n, _)| n == name).map(|(_, c)| *c)
    }
}

/// Counts conv/fc weights and biases, BN affine terms and PReLU
/// coefficients. Running statistics are not parameters.
pub fn count_parameters<T: Real>(model: &Model<T>) -> ParamCount {
    let mut blocks: Vec<(String, usize)> = Vec::new();
    for p in model.params() {
        let block = p.name.split('.').next().unwrap_or_default();
        match blocks.last_mut() {
            Some((name, n)) if name == block => *n += p.numel(),
            _ => blocks.push((block.to_string(), p.numel())),
        }
    }
    let total = blocks.iter().map(|(_, n)| n).sum();
    ParamCount {
        total,
        bytes_f32: total * std::mem::size_of::<f32>(),
        blocks,
    }
}

use crate::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    /// Updated by the optimizer and counted as a model parameter.
    Learnable,
    /// Batch-norm running mean/variance: persisted, never optimized.
    RunningStat,
}

/// A named tensor with its gradient accumulator.
///
/// `dims` is the logical shape (`[c]` for biases, `[out, in]` for
/// fully-connected weights); `value` stores it padded to rank 4.
#[derive(Clone, Debug)]
pub struct Param<T = f32> {
    pub name: String,
    pub dims: Vec<usize>,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub kind: ParamKind,
}

impl<T: Real> Param<T> {
    pub fn new(name: impl Into<String>, dims: &[usize], fill: T, kind: ParamKind) -> Self {
        assert!(
            !dims.is_empty() && dims.len() <= 4,
            "param rank must be 1..=4"
        );
        let mut shape = [1usize; 4];
        shape[..dims.len()].copy_from_slice(dims);
        Self {
            name: name.into(),
            dims: dims.to_vec(),
            value: Tensor::full(shape, fill),
            grad: Tensor::zeros(shape),
            kind,
        }
    }

    pub fn learnable(name: impl Into<String>, dims: &[usize], fill: T) -> Self {
        Self::new(name, dims, fill, ParamKind::Learnable)
    }

    pub fn numel(&self) -> usize {
        self.value.len()
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().fill(T::zero());
    }

    /// Adds `g` into the gradient accumulator.
    pub fn accumulate(&mut self, g: &[T]) {
        debug_assert_eq!(g.len(), self.numel(), "gradient size for {}", self.name);
        for (a, &b) in self.grad.data_mut().iter_mut().zip(g) {
            *a += b;
        }
    }

    pub fn cast<U: Real>(&self) -> Param<U> {
        Param {
            name: self.name.clone(),
            dims: self.dims.clone(),
            value: self.value.cast(),
            grad: self.grad.cast(),
            kind: self.kind,
        }
    }
}

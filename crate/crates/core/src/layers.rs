//! Stateful wrappers around the primitives: each owns its parameters and the
//! activations saved by its last train-mode forward.

use crate::error::{precondition, Result};
use crate::ops::{self, BatchNorm};
use crate::param::Param;
use crate::{Mode, Real, Tensor};

/// A differentiable block with named parameters.
///
/// `forward_train` saves what `backward` needs; `forward_eval` borrows the
/// block immutably and is a pure function of input and parameters.
pub trait Module<T: Real>: Send + Sync {
    fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>>;
    fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>>;
    /// Accumulates parameter gradients and returns the input gradient.
    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>>;
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>));
    fn visit_bn_mut(&mut self, _f: &mut dyn FnMut(&mut BatchNorm<T>)) {}
    fn visit_bn(&self, _f: &mut dyn FnMut(&BatchNorm<T>)) {}
    fn clear_cache(&mut self) {}

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        match mode {
            Mode::Train => self.forward_train(x),
            Mode::Eval => self.forward_eval(x),
        }
    }
}

fn saved<'a, T>(slot: &'a Option<Tensor<T>>, op: &'static str) -> Result<&'a Tensor<T>> {
    match slot {
        Some(t) => Ok(t),
        None => precondition(op, "backward called without a train-mode forward"),
    }
}

#[derive(Clone, Debug)]
pub struct Conv2d<T = f32> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    pad: usize,
    input: Option<Tensor<T>>,
}

impl<T: Real> Conv2d<T> {
    pub fn new(prefix: &str, cin: usize, cout: usize, kernel: usize) -> Self {
        Self {
            weight: Param::learnable(
                format!("{prefix}.weight"),
                &[cout, cin, kernel, kernel],
                T::zero(),
            ),
            bias: Param::learnable(format!("{prefix}.bias"), &[cout], T::zero()),
            pad: (kernel - 1) / 2,
            input: None,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dims[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dims[0]
    }

    pub fn kernel(&self) -> usize {
        self.weight.dims[2]
    }
}

impl<T: Real> Module<T> for Conv2d<T> {
    fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.forward_eval(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        ops::conv2d_forward(x, &self.weight.value, self.bias.value.data(), self.pad)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let x = saved(&self.input, "conv2d_backward")?;
        let g = ops::conv2d_backward(grad, x, &self.weight.value, self.pad)?;
        self.weight.accumulate(g.weight.data());
        self.bias.accumulate(&g.bias);
        Ok(g.input)
    }

    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }

    fn clear_cache(&mut self) {
        self.input = None;
    }
}

impl<T: Real> Module<T> for BatchNorm<T> {
    fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        BatchNorm::forward_train(self, x)
    }

    fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        BatchNorm::forward_eval(self, x)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        BatchNorm::backward(self, grad)
    }

    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        f(&self.gamma);
        f(&self.beta);
        f(&self.running_mean);
        f(&self.running_var);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.gamma);
        f(&mut self.beta);
        f(&mut self.running_mean);
        f(&mut self.running_var);
    }

    fn visit_bn_mut(&mut self, f: &mut dyn FnMut(&mut BatchNorm<T>)) {
        f(self);
    }

    fn visit_bn(&self, f: &mut dyn FnMut(&BatchNorm<T>)) {
        f(self);
    }

    fn clear_cache(&mut self) {
        BatchNorm::clear_cache(self);
    }
}

/// PReLU coefficients start at 0.25.
pub const PRELU_INIT: f64 = 0.25;

#[derive(Clone, Debug)]
pub struct PRelu<T = f32> {
    pub coeff: Param<T>,
    input: Option<Tensor<T>>,
}

impl<T: Real> PRelu<T> {
    pub fn new(prefix: &str, channels: usize) -> Self {
        Self {
            coeff: Param::learnable(
                format!("{prefix}.coeff"),
                &[channels],
                T::from_f64_lossy(PRELU_INIT),
            ),
            input: None,
        }
    }
}

impl<T: Real> Module<T> for PRelu<T> {
    fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.forward_eval(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        ops::prelu_forward(x, self.coeff.value.data())
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let x = saved(&self.input, "prelu_backward")?;
        let (gx, gc) = ops::prelu_backward(grad, x, self.coeff.value.data())?;
        self.coeff.accumulate(&gc);
        Ok(gx)
    }

    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        f(&self.coeff);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.coeff);
    }

    fn clear_cache(&mut self) {
        self.input = None;
    }
}

#[derive(Clone, Debug)]
pub struct Linear<T = f32> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    input: Option<Tensor<T>>,
}

impl<T: Real> Linear<T> {
    pub fn new(prefix: &str, din: usize, dout: usize) -> Self {
        Self {
            weight: Param::learnable(format!("{prefix}.weight"), &[dout, din], T::zero()),
            bias: Param::learnable(format!("{prefix}.bias"), &[dout], T::zero()),
            input: None,
        }
    }

    pub fn out_features(&self) -> usize {
        self.weight.dims[0]
    }

    pub fn in_features(&self) -> usize {
        self.weight.dims[1]
    }
}

impl<T: Real> Module<T> for Linear<T> {
    fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.forward_eval(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        ops::fully_connected(
            x,
            self.weight.value.data(),
            self.bias.value.data(),
            self.out_features(),
        )
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let x = saved(&self.input, "fully_connected_backward")?;
        let g =
            ops::fully_connected_backward(grad, x, self.weight.value.data(), self.out_features())?;
        self.weight.accumulate(&g.weight);
        self.bias.accumulate(&g.bias);
        Ok(g.input)
    }

    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }

    fn clear_cache(&mut self) {
        self.input = None;
    }
}

/// Adds two equally shaped gradients in place.
pub(crate) fn add_into<T: Real>(acc: &mut Tensor<T>, other: &Tensor<T>) {
    debug_assert_eq!(acc.shape(), other.shape());
    for (a, &b) in acc.data_mut().iter_mut().zip(other.data()) {
        *a += b;
    }
}

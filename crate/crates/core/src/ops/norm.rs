//! Batch normalization over the `(n, h, w)` axes of each channel.

use crate::error::{shape_err, Error, Result};
use crate::param::{Param, ParamKind};
use crate::{Mode, Real, Tensor};

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Clone, Debug)]
struct BnCache<T> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
}

/// Per-channel affine normalization with running statistics.
#[derive(Clone, Debug)]
pub struct BatchNorm<T = f32> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Param<T>,
    pub running_var: Param<T>,
    /// Weight of the old running value in the update.
    pub momentum: f64,
    pub epsilon: f64,
    stats_ready: bool,
    cache: Option<BnCache<T>>,
}

impl<T: Real> BatchNorm<T> {
    pub fn new(prefix: &str, channels: usize) -> Self {
        Self {
            gamma: Param::learnable(format!("{prefix}.gamma"), &[channels], T::one()),
            beta: Param::learnable(format!("{prefix}.beta"), &[channels], T::zero()),
            running_mean: Param::new(
                format!("{prefix}.running_mean"),
                &[channels],
                T::zero(),
                ParamKind::RunningStat,
            ),
            running_var: Param::new(
                format!("{prefix}.running_var"),
                &[channels],
                T::one(),
                ParamKind::RunningStat,
            ),
            momentum: BN_MOMENTUM,
            epsilon: BN_EPSILON,
            stats_ready: false,
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.numel()
    }

    pub fn stats_ready(&self) -> bool {
        self.stats_ready
    }

    /// Resets running statistics to mean 0 / variance 1 and marks them usable.
    pub fn reset_running_stats(&mut self) {
        self.running_mean.value.data_mut().fill(T::zero());
        self.running_var.value.data_mut().fill(T::one());
        self.stats_ready = true;
    }

    /// Marks externally loaded running statistics as usable.
    pub fn mark_stats_ready(&mut self) {
        self.stats_ready = true;
    }

    fn check(&self, input: &Tensor<T>) -> Result<()> {
        if input.c() != self.channels() {
            return shape_err(
                "batchnorm",
                format!("[n,{},h,w]", self.channels()),
                input.shape(),
            );
        }
        Ok(())
    }

    pub fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        match mode {
            Mode::Train => self.forward_train(input),
            Mode::Eval => self.forward_eval(input),
        }
    }

    /// Normalizes with the running statistics; a pure function of input and state.
    pub fn forward_eval(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(input)?;
        if !self.stats_ready {
            return Err(Error::UninitializedStats(self.gamma.name.clone()));
        }
        let eps = T::from_f64_lossy(self.epsilon);
        let plane = input.plane();
        let c = input.c();
        let scale: Vec<T> = (0..c)
            .map(|ch| {
                self.gamma.value.data()[ch] / (self.running_var.value.data()[ch] + eps).sqrt()
            })
            .collect();
        let mut out = input.clone();
        for (i, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
            let ch = i % c;
            let (m, s, b) = (
                self.running_mean.value.data()[ch],
                scale[ch],
                self.beta.value.data()[ch],
            );
            chunk.iter_mut().for_each(|v| *v = (*v - m) * s + b);
        }
        Ok(out)
    }

    /// Normalizes with biased batch statistics and folds them into the running stats.
    pub fn forward_train(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(input)?;
        let [n, c, _, _] = input.shape();
        let plane = input.plane();
        let count = (n * plane) as f64;
        let mut mean = vec![0.0f64; c];
        let mut var = vec![0.0f64; c];
        for (i, chunk) in input.data().chunks(plane).enumerate() {
            mean[i % c] += chunk.iter().map(|v| v.to_f64_lossy()).sum::<f64>();
        }
        mean.iter_mut().for_each(|m| *m /= count);
        for (i, chunk) in input.data().chunks(plane).enumerate() {
            let m = mean[i % c];
            var[i % c] += chunk
                .iter()
                .map(|v| {
                    let d = v.to_f64_lossy() - m;
                    d * d
                })
                .sum::<f64>();
        }
        var.iter_mut().for_each(|v| *v /= count);

        let inv_std: Vec<T> = var
            .iter()
            .map(|&v| T::from_f64_lossy(1.0 / (v + self.epsilon).sqrt()))
            .collect();
        let mean_t: Vec<T> = mean.iter().map(|&m| T::from_f64_lossy(m)).collect();
        let mut xhat = input.clone();
        let mut out = input.clone();
        for (i, (xh, o)) in xhat
            .data_mut()
            .chunks_mut(plane)
            .zip(out.data_mut().chunks_mut(plane))
            .enumerate()
        {
            let ch = i % c;
            let (g, b) = (self.gamma.value.data()[ch], self.beta.value.data()[ch]);
            for (a, y) in xh.iter_mut().zip(o.iter_mut()) {
                *a = (*a - mean_t[ch]) * inv_std[ch];
                *y = g * *a + b;
            }
        }

        let mom = self.momentum;
        for ch in 0..c {
            let rm = &mut self.running_mean.value.data_mut()[ch];
            *rm = T::from_f64_lossy(mom * rm.to_f64_lossy() + (1.0 - mom) * mean[ch]);
            let rv = &mut self.running_var.value.data_mut()[ch];
            *rv = T::from_f64_lossy(mom * rv.to_f64_lossy() + (1.0 - mom) * var[ch]);
        }
        self.stats_ready = true;
        self.cache = Some(BnCache { xhat, inv_std });
        Ok(out)
    }

    /// Backpropagates through the last train-mode forward; accumulates
    /// gamma/beta gradients and returns the input gradient.
    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let Some(cache) = self.cache.as_ref() else {
            return Err(Error::Precondition {
                op: "batchnorm_backward",
                msg: format!("{} has no saved train-mode forward", self.gamma.name),
            });
        };
        grad.expect_shape("batchnorm_backward", cache.xhat.shape())?;
        let [n, c, _, _] = grad.shape();
        let plane = grad.plane();
        let m = (n * plane) as f64;
        let mut sum_dy = vec![0.0f64; c];
        let mut sum_dy_xhat = vec![0.0f64; c];
        for (i, (g, xh)) in grad
            .data()
            .chunks(plane)
            .zip(cache.xhat.data().chunks(plane))
            .enumerate()
        {
            let ch = i % c;
            for (&gv, &xv) in g.iter().zip(xh) {
                sum_dy[ch] += gv.to_f64_lossy();
                sum_dy_xhat[ch] += (gv * xv).to_f64_lossy();
            }
        }
        let mut out = grad.clone();
        for (i, (o, xh)) in out
            .data_mut()
            .chunks_mut(plane)
            .zip(cache.xhat.data().chunks(plane))
            .enumerate()
        {
            let ch = i % c;
            let k = self.gamma.value.data()[ch] * cache.inv_std[ch];
            let mean_dy = T::from_f64_lossy(sum_dy[ch] / m);
            let mean_dy_xhat = T::from_f64_lossy(sum_dy_xhat[ch] / m);
            for (g, &xv) in o.iter_mut().zip(xh) {
                *g = k * (*g - mean_dy - xv * mean_dy_xhat);
            }
        }
        let dg: Vec<T> = sum_dy_xhat.iter().map(|&v| T::from_f64_lossy(v)).collect();
        let db: Vec<T> = sum_dy.iter().map(|&v| T::from_f64_lossy(v)).collect();
        self.gamma.accumulate(&dg);
        self.beta.accumulate(&db);
        Ok(out)
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    pub fn cast<U: Real>(&self) -> BatchNorm<U> {
        BatchNorm {
            gamma: self.gamma.cast(),
            beta: self.beta.cast(),
            running_mean: self.running_mean.cast(),
            running_var: self.running_var.cast(),
            momentum: self.momentum,
            epsilon: self.epsilon,
            stats_ready: self.stats_ready,
            cache: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo(shape: [usize; 4]) -> Tensor<f64> {
        let len: usize = shape.iter().product();
        Tensor::new(
            shape,
            (0..len)
                .map(|i| ((i * 7919 % 101) as f64) / 13.0 - 3.0)
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn eval_with_unit_stats_is_near_identity() {
        let mut bn = BatchNorm::<f64>::new("bn", 2);
        bn.reset_running_stats();
        let x = pseudo([2, 2, 3, 3]);
        let y = bn.forward_eval(&x).unwrap();
        for (a, b) in x.data().iter().zip(y.data()) {
            assert!((a - b).abs() <= 1e-5 * a.abs().max(1.0));
        }
    }

    #[test]
    fn constant_channel_normalizes_to_zero() {
        let mut bn = BatchNorm::<f32>::new("bn", 1);
        let y = bn.forward_train(&Tensor::full([3, 1, 2, 2], 4.5)).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn train_output_is_standardized() {
        let mut bn = BatchNorm::<f32>::new("bn", 2);
        let x: Tensor<f32> = pseudo([4, 2, 3, 3]).cast();
        let y = bn.forward_train(&x).unwrap();
        for ch in 0..2 {
            let vals: Vec<f64> = (0..4)
                .flat_map(|n| y.sample(n)[ch * 9..(ch + 1) * 9].to_vec())
                .map(f64::from)
                .collect();
            let mean = vals.iter().sum::<f64>() / 36.0;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 36.0;
            assert!(mean.abs() < 1e-5, "mean {mean}");
            assert!((var - 1.0).abs() < 1e-4, "var {var}");
        }
    }

    #[test]
    fn running_stats_follow_momentum_rule() {
        let mut bn = BatchNorm::<f64>::new("bn", 1);
        bn.reset_running_stats();
        let x = Tensor::new([1, 1, 1, 2], vec![1.0, 3.0]).unwrap();
        bn.forward_train(&x).unwrap();
        assert!((bn.running_mean.value.data()[0] - 0.2).abs() < 1e-12);
        // biased variance of {1,3} is 1
        assert!((bn.running_var.value.data()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eval_without_stats_is_rejected() {
        let bn = BatchNorm::<f32>::new("fresh", 2);
        let err = bn.forward_eval(&Tensor::zeros([1, 2, 2, 2])).unwrap_err();
        assert!(matches!(err, Error::UninitializedStats(_)));
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let mut bn = BatchNorm::<f32>::new("bn", 3);
        assert!(bn.forward_train(&Tensor::zeros([1, 2, 2, 2])).is_err());
    }
}

use crate::error::{Error, Result};
use crate::layers::Module;
use crate::param::ParamKind;
use crate::Real;

/// SGD with classical momentum: `v ← μ·v + g + λ·w`, `w ← w − lr·v`.
#[derive(Clone, Debug)]
pub struct Sgd<T = f32> {
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<Vec<T>>,
}

impl<T: Real> Sgd<T> {
    pub fn new(momentum: f64, weight_decay: f64) -> Self {
        Self {
            momentum,
            weight_decay,
            velocity: Vec::new(),
        }
    }

    /// Applies one update to every learnable parameter, then zeroes all
    /// gradients. Aborts before touching any weight if a gradient is not finite.
    pub fn step<M: Module<T> + ?Sized>(&mut self, model: &mut M, lr: f64) -> Result<()> {
        let mut bad: Option<String> = None;
        model.visit_params(&mut |p| {
            if bad.is_none() && p.kind == ParamKind::Learnable && !p.grad.all_finite() {
                bad = Some(p.name.clone());
            }
        });
        if let Some(name) = bad {
            return Err(Error::NonFinite(format!(
                "gradient of `{name}`; optimizer step aborted"
            )));
        }
        let (mu, wd, lr) = (
            T::from_f64_lossy(self.momentum),
            T::from_f64_lossy(self.weight_decay),
            T::from_f64_lossy(lr),
        );
        let velocity = &mut self.velocity;
        let mut idx = 0;
        let mut shape_error = None;
        model.visit_params_mut(&mut |p| {
            if p.kind != ParamKind::Learnable {
                return;
            }
            if velocity.len() == idx {
                velocity.push(vec![T::zero(); p.numel()]);
            }
            let v = &mut velocity[idx];
            if v.len() != p.numel() && shape_error.is_none() {
                shape_error = Some(p.name.clone());
            }
            idx += 1;
            let (w, g) = (p.value.data_mut(), p.grad.data());
            for ((vi, wi), &gi) in v.iter_mut().zip(w.iter_mut()).zip(g) {
                *vi = mu * *vi + gi + wd * *wi;
                *wi -= lr * *vi;
            }
            p.zero_grad();
        });
        if let Some(name) = shape_error {
            return Err(Error::Precondition {
                op: "sgd_momentum_step",
                msg: format!("velocity buffer does not match `{name}`"),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Linear;

    fn unit() -> Linear<f64> {
        Linear::new("fc", 1, 1)
    }

    fn set_grad(m: &mut Linear<f64>, g: f64) {
        m.weight.grad.data_mut()[0] = g;
        m.bias.grad.data_mut()[0] = g;
    }

    #[test]
    fn hand_computed_recurrence() {
        let mut m = unit();
        let mut opt = Sgd::new(0.9, 0.0);
        set_grad(&mut m, 1.0);
        opt.step(&mut m, 0.1).unwrap();
        assert!((m.weight.value.data()[0] + 0.1).abs() < 1e-12);
        assert_eq!(m.weight.grad.data()[0], 0.0);
        set_grad(&mut m, 1.0);
        opt.step(&mut m, 0.1).unwrap();
        assert!((m.weight.value.data()[0] + 0.29).abs() < 1e-12);
    }

    #[test]
    fn zero_momentum_is_plain_descent() {
        let mut m = unit();
        let mut opt = Sgd::new(0.0, 0.0);
        for _ in 0..2 {
            set_grad(&mut m, 1.0);
            opt.step(&mut m, 0.1).unwrap();
        }
        assert!((m.weight.value.data()[0] + 0.2).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut m = unit();
        m.weight.value.data_mut()[0] = 0.7;
        let mut opt = Sgd::new(0.9, 0.0);
        opt.step(&mut m, 0.1).unwrap();
        assert_eq!(m.weight.value.data()[0], 0.7);
    }

    #[test]
    fn nan_gradient_aborts_without_update() {
        let mut m = unit();
        m.weight.value.data_mut()[0] = 0.5;
        m.weight.grad.data_mut()[0] = f64::NAN;
        let mut opt = Sgd::new(0.9, 0.0);
        assert!(matches!(opt.step(&mut m, 0.1), Err(Error::NonFinite(_))));
        assert_eq!(m.weight.value.data()[0], 0.5);
    }
}

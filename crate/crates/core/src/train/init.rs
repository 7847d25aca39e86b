use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::arch::Model;
use crate::layers::{Module, PRELU_INIT};
use crate::param::ParamKind;
use crate::Real;

/// He (Kaiming) normal initialization, deterministic in `seed`.
///
/// Weights of convolutions and fully-connected layers are drawn from
/// `N(0, 2/fan_in)`; biases and BN shifts are 0, BN scales 1, PReLU
/// coefficients 0.25, running statistics reset to mean 0 / variance 1.
pub fn he_init<T: Real>(model: &mut Model<T>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    model.visit_params_mut(&mut |p| {
        if p.kind == ParamKind::RunningStat {
            return;
        }
        let suffix = p.name.rsplit('.').next().unwrap_or_default();
        let fill = match suffix {
            "weight" => {
                let fan_in: usize = p.dims[1..].iter().product();
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
                for v in p.value.data_mut() {
                    *v = T::from_f64_lossy(normal.sample(&mut rng));
                }
                None
            }
            "gamma" => Some(T::one()),
            "coeff" => Some(T::from_f64_lossy(PRELU_INIT)),
            _ => Some(T::zero()),
        };
        if let Some(v) = fill {
            p.value.data_mut().fill(v);
        }
        p.zero_grad();
    });
    model.reset_running_stats();
}

use crate::error::{Error, Result};

/// Training protocol settings.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    /// Fractions of `epochs` at which the rate is multiplied by `lr_factor`.
    pub lr_drop_fractions: Vec<f64>,
    pub lr_factor: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 64,
            base_lr: 0.1,
            lr_drop_fractions: vec![0.4, 0.7, 0.9],
            lr_factor: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
            seed: 0,
            augment: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, msg: String| Err(Error::HyperParam { field, msg });
        if self.epochs == 0 {
            return bad("epochs", "must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be >= 1".into());
        }
        if !(self.base_lr > 0.0) {
            return bad("base_lr", format!("{} must be positive", self.base_lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum", format!("{} is outside [0, 1)", self.momentum));
        }
        if self.weight_decay < 0.0 {
            return bad("weight_decay", "must be >= 0".into());
        }
        let mut prev = 0.0;
        for &f in &self.lr_drop_fractions {
            if !(f > prev && f < 1.0) {
                return bad(
                    "lr_drop_fractions",
                    format!(
                        "{:?} must be strictly increasing inside (0, 1)",
                        self.lr_drop_fractions
                    ),
                );
            }
            prev = f;
        }
        Ok(())
    }

    /// Epoch indices at which the rate drops: `floor(f·epochs)`, never
    /// before epoch 1.
    pub fn lr_breakpoints(&self) -> Vec<usize> {
        self.lr_drop_fractions
            .iter()
            .map(|f| ((f * self.epochs as f64 + 1e-9).floor() as usize).max(1))
            .collect()
    }
}

/// Piecewise-constant learning rate for a 0-based epoch.
pub fn lr_at_epoch(cfg: &TrainConfig, epoch: usize) -> f64 {
    let drops = cfg.lr_breakpoints().iter().filter(|&&b| epoch >= b).count();
    cfg.base_lr * cfg.lr_factor.powi(drops as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs()
    }

    #[test]
    fn short_runs_start_at_the_base_rate() {
        let one = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        assert_eq!(one.lr_breakpoints(), vec![1, 1, 1]);
        assert!(close(lr_at_epoch(&one, 0), 0.1));
        let two = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        assert!(close(lr_at_epoch(&two, 1), 1e-4));
    }

    #[test]
    fn default_schedule_breakpoints() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.lr_breakpoints(), vec![120, 210, 270]);
        assert!(close(lr_at_epoch(&cfg, 0), 0.1));
        assert!(close(lr_at_epoch(&cfg, 119), 0.1));
        assert!(close(lr_at_epoch(&cfg, 120), 0.01));
        assert!(close(lr_at_epoch(&cfg, 210), 0.001));
        assert!(close(lr_at_epoch(&cfg, 270), 0.0001));
        assert!(close(lr_at_epoch(&cfg, 299), 0.0001));
    }

    #[test]
    fn schedule_is_non_increasing() {
        for epochs in [1, 3, 10, 37, 300] {
            let cfg = TrainConfig {
                epochs,
                ..Default::default()
            };
            for e in 1..epochs {
                assert!(lr_at_epoch(&cfg, e) <= lr_at_epoch(&cfg, e - 1));
            }
        }
    }

    #[test]
    fn rejects_unordered_fractions() {
        let cfg = TrainConfig {
            lr_drop_fractions: vec![0.7, 0.4],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig {
            lr_drop_fractions: vec![0.4, 1.0],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        TrainConfig::default().validate().unwrap();
    }
}

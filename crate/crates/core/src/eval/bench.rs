use std::time::Instant;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::arch::Model;
use crate::error::{precondition, Result};
use crate::layers::Module;
use crate::Tensor;

/// Real-time limit of the sorting line.
pub const BUDGET_MS_PER_IMAGE: f64 = 4.0;
pub const MIN_ITERATIONS: usize = 10;
pub const MIN_WARMUP: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub arch: String,
    pub input_hw: (usize, usize),
    pub batch_size: usize,
    pub iterations: usize,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    pub ms_per_image: f64,
    pub budget_pass: bool,
}

pub fn budget_verdict(ms_per_image: f64) -> bool {
    ms_per_image < BUDGET_MS_PER_IMAGE
}

impl BenchReport {
    /// Builds a report from per-batch wall times in milliseconds.
    pub fn from_timings(
        arch: &str,
        input_hw: (usize, usize),
        batch_size: usize,
        times_ms: &[f64],
    ) -> Self {
        let mean_ms = times_ms.iter().sum::<f64>() / times_ms.len() as f64;
        let ms_per_image = mean_ms / batch_size as f64;
        Self {
            arch: arch.to_string(),
            input_hw,
            batch_size,
            iterations: times_ms.len(),
            mean_ms,
            min_ms: times_ms.iter().copied().fold(f64::INFINITY, f64::min),
            max_ms: times_ms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ms_per_image,
            budget_pass: budget_verdict(ms_per_image),
        }
    }

    pub const CSV_HEADER: &'static str =
        "arch,input,batch,iterations,mean_ms,min_ms,max_ms,ms_per_image,budget_pass";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{}x{},{},{},{:.4},{:.4},{:.4},{:.4},{}",
            self.arch,
            self.input_hw.0,
            self.input_hw.1,
            self.batch_size,
            self.iterations,
            self.mean_ms,
            self.min_ms,
            self.max_ms,
            self.ms_per_image,
            self.budget_pass
        )
    }
}

impl std::fmt::Display for BenchReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} @ {}x{}, batch {}: {:.3} ms/batch (min {:.3}, max {:.3}, {} iters), {:.3} ms/image, budget {} ms/image: {}",
            self.arch,
            self.input_hw.0,
            self.input_hw.1,
            self.batch_size,
            self.mean_ms,
            self.min_ms,
            self.max_ms,
            self.iterations,
            self.ms_per_image,
            BUDGET_MS_PER_IMAGE,
            if self.budget_pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Times `run` on a fixed random batch; the first `warmup` calls are discarded.
pub fn benchmark_with<F>(
    model: &Model<f32>,
    batch_size: usize,
    iterations: usize,
    warmup: usize,
    mut run: F,
) -> Result<BenchReport>
where
    F: FnMut(&Model<f32>, &Tensor<f32>) -> Result<()>,
{
    if iterations < MIN_ITERATIONS || warmup < MIN_WARMUP {
        return precondition(
            "benchmark",
            format!("need iterations >= {MIN_ITERATIONS} and warmup >= {MIN_WARMUP}, got {iterations}/{warmup}"),
        );
    }
    if batch_size == 0 {
        return precondition("benchmark", "batch size must be positive");
    }
    let (h, w) = model.hparams().input_hw;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let data: Vec<f32> = (0..batch_size * 3 * h * w)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let x = Tensor::new([batch_size, 3, h, w], data)?;
    for _ in 0..warmup {
        run(model, &x)?;
    }
    let mut times = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let t = Instant::now();
        run(model, &x)?;
        times.push(t.elapsed().as_secs_f64() * 1e3);
    }
    Ok(BenchReport::from_timings(
        &model.hparams().display_name(),
        (h, w),
        batch_size,
        &times,
    ))
}

/// Times eval-mode forwards of `batch_size` images.
pub fn benchmark(
    model: &Model<f32>,
    batch_size: usize,
    iterations: usize,
    warmup: usize,
) -> Result<BenchReport> {
    benchmark_with(model, batch_size, iterations, warmup, |m, x| {
        m.forward_eval(x).map(|_| ())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_arithmetic() {
        let r = BenchReport::from_timings("x", (32, 32), 5, &[10.0, 20.0, 30.0]);
        assert_eq!(r.mean_ms, 20.0);
        assert_eq!(r.ms_per_image, 4.0);
        assert!(r.min_ms <= r.mean_ms && r.mean_ms <= r.max_ms);
        assert!(!r.budget_pass);
        assert!(BenchReport::from_timings("x", (32, 32), 5, &[19.9]).budget_pass);
    }
}

use crate::error::{precondition, Result};
use crate::Tensor;

use super::Dataset;

/// Per-channel statistics of [0, 1]-scaled training images.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormStats {
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl Default for NormStats {
    fn default() -> Self {
        Self {
            mean: [0.0; 3],
            std: [1.0; 3],
        }
    }
}

const MIN_STD: f64 = 1e-6;

impl NormStats {
    /// Statistics of raw [0, 255] images after the 1/255 scaling.
    pub fn compute(raw: &Dataset) -> Result<Self> {
        if raw.is_empty() {
            return precondition("norm_stats", "empty training set");
        }
        let mut sum = [0.0f64; 3];
        let mut sq = [0.0f64; 3];
        let mut count = 0usize;
        for s in &raw.samples {
            let plane = s.image.plane();
            for c in 0..3 {
                for &v in &s.image.data()[c * plane..(c + 1) * plane] {
                    let v = v as f64 / 255.0;
                    sum[c] += v;
                    sq[c] += v * v;
                }
            }
            count += plane;
        }
        let mut out = Self::default();
        for c in 0..3 {
            let m = sum[c] / count as f64;
            let var = (sq[c] / count as f64 - m * m).max(0.0);
            out.mean[c] = m as f32;
            out.std[c] = var.sqrt().max(MIN_STD) as f32;
        }
        Ok(out)
    }

    /// `(x/255 − mean) / std`, per channel.
    pub fn normalize(&self, raw: &Tensor<f32>) -> Tensor<f32> {
        self.per_channel(raw, |c, v| (v / 255.0 - self.mean[c]) / self.std[c])
    }

    /// Inverse of [`normalize`](Self::normalize), back to [0, 255].
    pub fn denormalize(&self, x: &Tensor<f32>) -> Tensor<f32> {
        self.per_channel(x, |c, v| (v * self.std[c] + self.mean[c]) * 255.0)
    }

    pub fn normalize_dataset(&self, raw: &mut Dataset) {
        for s in &mut raw.samples {
            s.image = self.normalize(&s.image);
        }
    }

    fn per_channel(&self, x: &Tensor<f32>, f: impl Fn(usize, f32) -> f32) -> Tensor<f32> {
        let mut out = x.clone();
        let plane = x.plane();
        let c_count = x.c();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v = f((i / plane) % c_count, *v);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn black_image_maps_to_negative_mean_over_std() {
        let st = NormStats {
            mean: [0.5, 0.25, 0.1],
            std: [0.2, 0.5, 0.1],
        };
        let y = st.normalize(&Tensor::zeros([1, 3, 2, 2]));
        for c in 0..3 {
            assert!((y.at(0, c, 1, 1) + st.mean[c] / st.std[c]).abs() < 1e-6);
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let st = NormStats {
            mean: [0.4, 0.3, 0.2],
            std: [0.21, 0.17, 0.3],
        };
        let x = Tensor::new([2, 3, 2, 2], (0..24).map(|v| v as f32 * 10.0).collect()).unwrap();
        let back = st.denormalize(&st.normalize(&x));
        for (a, b) in x.data().iter().zip(back.data()) {
            assert!((a / 255.0 - b / 255.0).abs() < 1e-5);
        }
    }
}

use mvanet::ops::{
    avg_pool_2x2, concat_channels, conv2d_forward, fully_connected, global_avg_pool, softmax,
    split_channels, BatchNorm,
};
use mvanet::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Textbook zero-padded cross-correlation, written out index by index.
fn naive_conv(x: &Tensor<f64>, w: &Tensor<f64>, b: &[f64]) -> Tensor<f64> {
    let [n, cin, h, wd] = x.shape();
    let [cout, _, k, _] = w.shape();
    let r = (k / 2) as isize;
    let mut out = Tensor::zeros([n, cout, h, wd]);
    for s in 0..n {
        for o in 0..cout {
            for y in 0..h as isize {
                for xx in 0..wd as isize {
                    let mut acc = b[o];
                    for i in 0..cin {
                        for dy in -r..=r {
                            for dx in -r..=r {
                                let (sy, sx) = (y + dy, xx + dx);
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= wd as isize {
                                    continue;
                                }
                                acc += x.at(s, i, sy as usize, sx as usize)
                                    * w.at(o, i, (dy + r) as usize, (dx + r) as usize);
                            }
                        }
                    }
                    out.set(s, o, y as usize, xx as usize, acc);
                }
            }
        }
    }
    out
}

#[test]
fn conv_matches_naive_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (k, cin, cout, h, w) in [
        (1, 5, 7, 6, 4),
        (3, 4, 6, 5, 7),
        (3, 1, 1, 1, 1),
        (3, 9, 3, 8, 8),
    ] {
        let x = random([2, cin, h, w], &mut rng);
        let wt = random([cout, cin, k, k], &mut rng);
        let b: Vec<f64> = (0..cout).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = conv2d_forward(&x, &wt, &b, k / 2).unwrap();
        let slow = naive_conv(&x, &wt, &b);
        for (a, e) in fast.data().iter().zip(slow.data()) {
            assert!((a - e).abs() < 1e-12, "k={k}: {a} vs {e}");
        }
    }
}

#[test]
fn fully_connected_matches_dot_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random([3, 2, 2, 2], &mut rng);
    let w: Vec<f64> = (0..5 * 8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..5).map(|i| i as f64).collect();
    let y = fully_connected(&x, &w, &b, 5).unwrap();
    for s in 0..3 {
        for o in 0..5 {
            let want: f64 = b[o] + (0..8).map(|j| w[o * 8 + j] * x.sample(s)[j]).sum::<f64>();
            assert!((y.sample(s)[o] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn batch_norm_train_output_is_standardized() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random([4, 3, 5, 5], &mut rng).map(|v| 3.0 * v + 7.0);
    let mut bn = BatchNorm::<f64>::new("bn", 3);
    let y = bn.forward_train(&x).unwrap();
    for c in 0..3 {
        let vals: Vec<f64> = (0..4)
            .flat_map(|s| y.sample(s)[c * 25..(c + 1) * 25].to_vec())
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!(
            mean.abs() < 1e-9 && (var - 1.0).abs() < 1e-3,
            "c{c}: {mean} {var}"
        );
    }
}

proptest! {
    #[test]
    fn concat_then_split_is_identity(widths in prop::collection::vec(1usize..5, 1..4), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let parts: Vec<Tensor<f64>> = widths.iter().map(|&c| random([2, c, 3, 2], &mut rng)).collect();
        let refs: Vec<&Tensor<f64>> = parts.iter().collect();
        let joined = concat_channels(&refs).unwrap();
        prop_assert_eq!(joined.c(), widths.iter().sum::<usize>());
        let back = split_channels(&joined, &widths).unwrap();
        prop_assert_eq!(back, parts);
    }

    #[test]
    fn softmax_rows_are_distributions(vals in prop::collection::vec(-50.0f64..50.0, 4..=4)) {
        let p = softmax(&Tensor::new([1, 4, 1, 1], vals.clone()).unwrap());
        let sum: f64 = p.data().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
        let top = vals.iter().position(|&v| v == hi).unwrap();
        prop_assert!(p.data().iter().all(|&q| q <= p.data()[top]));
    }

    #[test]
    fn pooling_preserves_the_mean(h in 1usize..5, w in 1usize..5, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random([1, 2, 2 * h, 2 * w], &mut rng);
        let pooled = avg_pool_2x2(&x).unwrap();
        prop_assert_eq!(pooled.shape(), [1, 2, h, w]);
        let a = global_avg_pool(&x);
        let b = global_avg_pool(&pooled);
        for (u, v) in a.data().iter().zip(b.data()) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }
}

//! Stride-1, size-preserving 2-D convolution (1×1 and 3×3 kernels).
//!
//! The fast path lowers each sample to a matrix product: 1×1 kernels are a
//! plain `W·X`, 3×3 kernels go through im2col. [`conv2d_direct`] is the
//! reference the fast path is checked against.

use crate::error::{precondition, shape_err, Result};
use crate::parallel::{for_each_chunk_mut, map_range, ordered_sum, REDUCE_CHUNK};
use crate::{Real, Tensor};

/// Gradients of a convolution with respect to its three inputs.
#[derive(Clone, Debug)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
}

fn check<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias_len: usize,
    pad: usize,
) -> Result<()> {
    let [cout, cin, kh, kw] = weight.shape();
    if cin != input.c() {
        return shape_err(
            "conv2d",
            format!("input [n,{cin},h,w] for weight {:?}", weight.shape()),
            input.shape(),
        );
    }
    if kh != kw || !(kh == 1 || kh == 3) {
        return precondition(
            "conv2d",
            format!("kernel must be 1x1 or 3x3, got {kh}x{kw}"),
        );
    }
    if pad != (kh - 1) / 2 {
        return precondition(
            "conv2d",
            format!("pad {pad} does not preserve spatial size for a {kh}x{kh} kernel"),
        );
    }
    if bias_len != cout {
        return shape_err("conv2d", format!("bias [{cout}]"), [bias_len]);
    }
    Ok(())
}

/// Lowers one `[c,h,w]` sample to a `[c·9, h·w]` patch matrix (3×3, pad 1).
fn im2col<T: Real>(x: &[T], c: usize, h: usize, w: usize, col: &mut [T]) {
    let hw = h * w;
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut col[((ci * 9) + ky * 3 + kx) * hw..][..hw];
                let dx = kx as isize - 1;
                let x0 = if dx < 0 { 1 } else { 0 };
                let x1 = if dx > 0 { w - 1 } else { w };
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    let out = &mut row[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        out.fill(T::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * w..][..w];
                    out[..x0].fill(T::zero());
                    out[x1..].fill(T::zero());
                    for xx in x0..x1 {
                        out[xx] = src[(xx as isize + dx) as usize];
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the image.
fn col2im<T: Real>(col: &[T], c: usize, h: usize, w: usize, x: &mut [T]) {
    let hw = h * w;
    x.fill(T::zero());
    for ci in 0..c {
        let plane = &mut x[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &col[((ci * 9) + ky * 3 + kx) * hw..][..hw];
                let dx = kx as isize - 1;
                let x0 = if dx < 0 { 1 } else { 0 };
                let x1 = if dx > 0 { w - 1 } else { w };
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let g = &row[y * w..(y + 1) * w];
                    let dst = &mut plane[sy as usize * w..][..w];
                    for xx in x0..x1 {
                        dst[(xx as isize + dx) as usize] += g[xx];
                    }
                }
            }
        }
    }
}

/// `output[o] = bias[o] + Σ input ⋆ weight[o]`, spatial size preserved.
pub fn conv2d_forward<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &[T],
    pad: usize,
) -> Result<Tensor<T>> {
    check(input, weight, bias.len(), pad)?;
    let [n, cin, h, w] = input.shape();
    let [cout, _, k, _] = weight.shape();
    let hw = h * w;
    let mut out = Tensor::zeros([n, cout, h, w]);
    for_each_chunk_mut(out.data_mut(), cout * hw, |i, o| {
        for (oc, b) in bias.iter().enumerate() {
            o[oc * hw..(oc + 1) * hw].fill(*b);
        }
        let x = input.sample(i);
        if k == 1 {
            T::gemm(cout, cin, hw, weight.data(), false, x, false, T::one(), o);
        } else {
            let mut col = vec![T::zero(); cin * 9 * hw];
            im2col(x, cin, h, w, &mut col);
            T::gemm(
                cout,
                cin * 9,
                hw,
                weight.data(),
                false,
                &col,
                false,
                T::one(),
                o,
            );
        }
    });
    Ok(out)
}

/// Backpropagates `grad_out` through [`conv2d_forward`].
pub fn conv2d_backward<T: Real>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    weight: &Tensor<T>,
    pad: usize,
) -> Result<ConvGrads<T>> {
    let [cout, cin, k, _] = weight.shape();
    check(input, weight, cout, pad)?;
    let [n, _, h, w] = input.shape();
    grad_out.expect_shape("conv2d_backward", [n, cout, h, w])?;
    let hw = h * w;
    let kk = cin * k * k;

    let mut grad_input = Tensor::zeros(input.shape());
    for_each_chunk_mut(grad_input.data_mut(), cin * hw, |i, gx| {
        let g = grad_out.sample(i);
        if k == 1 {
            T::gemm(cin, cout, hw, weight.data(), true, g, false, T::zero(), gx);
        } else {
            let mut col = vec![T::zero(); kk * hw];
            T::gemm(
                kk,
                cout,
                hw,
                weight.data(),
                true,
                g,
                false,
                T::zero(),
                &mut col,
            );
            col2im(&col, cin, h, w, gx);
        }
    });

    let chunks = n.div_ceil(REDUCE_CHUNK);
    let partials = map_range(chunks, |ch| {
        let mut gw = vec![T::zero(); cout * kk];
        let mut gb = vec![T::zero(); cout];
        let mut col = if k == 1 {
            Vec::new()
        } else {
            vec![T::zero(); kk * hw]
        };
        for i in ch * REDUCE_CHUNK..((ch + 1) * REDUCE_CHUNK).min(n) {
            let g = grad_out.sample(i);
            let patches = if k == 1 {
                input.sample(i)
            } else {
                im2col(input.sample(i), cin, h, w, &mut col);
                &col
            };
            T::gemm(cout, hw, kk, g, false, patches, true, T::one(), &mut gw);
            for (oc, b) in gb.iter_mut().enumerate() {
                *b += g[oc * hw..(oc + 1) * hw].iter().copied().sum::<T>();
            }
        }
        let mut packed = gw;
        packed.extend(gb);
        packed
    });
    let mut packed = vec![T::zero(); cout * kk + cout];
    ordered_sum(partials, &mut packed);
    let bias = packed.split_off(cout * kk);
    Ok(ConvGrads {
        input: grad_input,
        weight: Tensor::new(weight.shape(), packed)?,
        bias,
    })
}

/// Direct nested-loop convolution; the reference for the lowered fast path.
pub fn conv2d_direct<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &[T],
    pad: usize,
) -> Result<Tensor<T>> {
    check(input, weight, bias.len(), pad)?;
    let [n, cin, h, w] = input.shape();
    let [cout, _, k, _] = weight.shape();
    let mut out = Tensor::zeros([n, cout, h, w]);
    let p = pad as isize;
    for b in 0..n {
        for o in 0..cout {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = bias[o];
                    for c in 0..cin {
                        for ky in 0..k {
                            for kx in 0..k {
                                let sy = y as isize + ky as isize - p;
                                let sx = x as isize + kx as isize - p;
                                if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
                                    acc += input.at(b, c, sy as usize, sx as usize)
                                        * weight.at(o, c, ky, kx);
                                }
                            }
                        }
                    }
                    out.set(b, o, y, x, acc);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(shape: [usize; 4], seed: f64) -> Tensor<f64> {
        let len: usize = shape.iter().product();
        let data: Vec<f64> = (0..len)
            .map(|i| ((i as f64 + seed) * 0.731).sin())
            .collect();
        Tensor::new(shape, data).unwrap()
    }

    #[test]
    fn identity_kernel_is_identity() {
        let x = ramp([2, 3, 4, 5], 0.0);
        let mut wdata = vec![0.0; 9];
        for i in 0..3 {
            wdata[i * 3 + i] = 1.0;
        }
        let w = Tensor::new([3, 3, 1, 1], wdata).unwrap();
        let y = conv2d_forward(&x, &w, &[0.0; 3], 0).unwrap();
        assert_eq!(y, x);
        let g = conv2d_backward(&x, &x, &w, 0).unwrap();
        assert_eq!(g.input, x);
    }

    #[test]
    fn hand_evaluated_all_ones_kernel() {
        let x = Tensor::<f32>::new([1, 1, 3, 3], (1..=9).map(|v| v as f32).collect()).unwrap();
        let w = Tensor::full([1, 1, 3, 3], 1.0f32);
        let y = conv2d_forward(&x, &w, &[0.0], 1).unwrap();
        assert_eq!(y.at(0, 0, 1, 1), 45.0);
        assert_eq!(y.at(0, 0, 0, 0), 12.0);
    }

    #[test]
    fn fast_path_matches_direct_reference() {
        for k in [1, 3] {
            let x = ramp([2, 3, 5, 4], 1.0);
            let w = ramp([4, 3, k, k], 7.0);
            let b = [0.1, -0.2, 0.3, 0.0];
            let fast = conv2d_forward(&x, &w, &b, (k - 1) / 2).unwrap();
            let slow = conv2d_direct(&x, &w, &b, (k - 1) / 2).unwrap();
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let x = ramp([2, 2, 3, 3], 0.5);
        let w = ramp([3, 2, 3, 3], 2.0);
        let g = conv2d_backward(&Tensor::zeros([2, 3, 3, 3]), &x, &w, 1).unwrap();
        assert!(g.input.data().iter().all(|&v| v == 0.0));
        assert!(g.weight.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_mismatched_shapes_and_kernels() {
        let x = ramp([1, 2, 3, 3], 0.0);
        let err = conv2d_forward(&x, &ramp([1, 3, 3, 3], 0.0), &[0.0], 1).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("[1, 2, 3, 3]") && msg.contains("[1, 3, 3, 3]"),
            "{msg}"
        );
        assert!(conv2d_forward(&x, &ramp([1, 2, 3, 3], 0.0), &[0.0], 0).is_err());
        assert!(conv2d_forward(&x, &ramp([1, 2, 5, 5], 0.0), &[0.0], 2).is_err());
        assert!(conv2d_forward(&x, &ramp([1, 2, 1, 1], 0.0), &[0.0, 1.0], 0).is_err());
    }
}

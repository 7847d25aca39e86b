use crate::error::{precondition, shape_err, Result};
use crate::{Real, Tensor};

/// Channel-wise union of feature maps, preserving input order.
pub fn concat_channels<T: Real>(inputs: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let Some(first) = inputs.first() else {
        return precondition("concat_channels", "needs at least one input");
    };
    let [n, _, h, w] = first.shape();
    for t in inputs {
        if t.n() != n || t.h() != h || t.w() != w {
            return shape_err("concat_channels", format!("[{n}, _, {h}, {w}]"), t.shape());
        }
    }
    if inputs.len() == 1 {
        return Ok((*first).clone());
    }
    let total: usize = inputs.iter().map(|t| t.c()).sum();
    let mut data = Vec::with_capacity(n * total * h * w);
    for b in 0..n {
        for t in inputs {
            data.extend_from_slice(t.sample(b));
        }
    }
    Tensor::new([n, total, h, w], data)
}

/// Inverse of [`concat_channels`]: slices `grad` into pieces of the given widths.
pub fn split_channels<T: Real>(grad: &Tensor<T>, widths: &[usize]) -> Result<Vec<Tensor<T>>> {
    let [n, c, h, w] = grad.shape();
    if widths.iter().sum::<usize>() != c || widths.contains(&0) {
        return shape_err("split_channels", format!("widths summing to {c}"), widths);
    }
    let plane = h * w;
    let mut parts: Vec<Vec<T>> = widths
        .iter()
        .map(|&k| Vec::with_capacity(n * k * plane))
        .collect();
    for b in 0..n {
        let s = grad.sample(b);
        let mut off = 0;
        for (part, &k) in parts.iter_mut().zip(widths) {
            part.extend_from_slice(&s[off * plane..(off + k) * plane]);
            off += k;
        }
    }
    parts
        .into_iter()
        .zip(widths)
        .map(|(d, &k)| Tensor::new([n, k, h, w], d))
        .collect()
}

/// `output[n,c,·,·] = weights[n,c]·input[n,c,·,·]`; `weights` is `[n,c,1,1]`.
pub fn channel_scale<T: Real>(input: &Tensor<T>, weights: &Tensor<T>) -> Result<Tensor<T>> {
    weights.expect_shape("channel_scale", [input.n(), input.c(), 1, 1])?;
    let mut out = input.clone();
    for (chunk, &s) in out.data_mut().chunks_mut(input.plane()).zip(weights.data()) {
        chunk.iter_mut().for_each(|v| *v *= s);
    }
    Ok(out)
}

/// Returns `(grad_input, grad_weights)`.
pub fn channel_scale_backward<T: Real>(
    grad: &Tensor<T>,
    input: &Tensor<T>,
    weights: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    grad.expect_shape("channel_scale_backward", input.shape())?;
    let gx = channel_scale(grad, weights)?;
    let plane = input.plane();
    let gw = grad
        .data()
        .chunks(plane)
        .zip(input.data().chunks(plane))
        .map(|(g, x)| g.iter().zip(x).map(|(&a, &b)| a * b).sum::<T>())
        .collect();
    Ok((gx, Tensor::new(weights.shape(), gw)?))
}

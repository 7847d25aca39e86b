use crate::error::{precondition, Result};
use crate::{Real, Tensor};

/// Mean over disjoint 2×2 windows; halves both spatial dimensions.
pub fn avg_pool_2x2<T: Real>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, h, w] = input.shape();
    if h % 2 != 0 || w % 2 != 0 || h < 2 || w < 2 {
        return precondition("avg_pool_2x2", format!("spatial size {h}x{w} is not even"));
    }
    let (oh, ow) = (h / 2, w / 2);
    let quarter = T::from_f64_lossy(0.25);
    let mut out = Tensor::zeros([n, c, oh, ow]);
    for (o, x) in out
        .data_mut()
        .chunks_mut(oh * ow)
        .zip(input.data().chunks(h * w))
    {
        for y in 0..oh {
            let r0 = &x[2 * y * w..][..w];
            let r1 = &x[(2 * y + 1) * w..][..w];
            for xx in 0..ow {
                o[y * ow + xx] =
                    (r0[2 * xx] + r0[2 * xx + 1] + r1[2 * xx] + r1[2 * xx + 1]) * quarter;
            }
        }
    }
    Ok(out)
}

/// Spreads each output gradient uniformly (÷4) over its window.
pub fn avg_pool_2x2_backward<T: Real>(
    grad: &Tensor<T>,
    input_shape: [usize; 4],
) -> Result<Tensor<T>> {
    let [n, c, h, w] = input_shape;
    grad.expect_shape("avg_pool_2x2_backward", [n, c, h / 2, w / 2])?;
    let (oh, ow) = (h / 2, w / 2);
    let quarter = T::from_f64_lossy(0.25);
    let mut gx = Tensor::zeros(input_shape);
    for (x, g) in gx
        .data_mut()
        .chunks_mut(h * w)
        .zip(grad.data().chunks(oh * ow))
    {
        for y in 0..h {
            for xx in 0..w {
                x[y * w + xx] = g[(y / 2) * ow + xx / 2] * quarter;
            }
        }
    }
    Ok(gx)
}

/// Per-channel spatial mean, `[n,c,h,w] → [n,c,1,1]`.
pub fn global_avg_pool<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    let [n, c, _, _] = input.shape();
    let inv = T::one() / T::from_usize(input.plane()).expect("plane size");
    let data = input
        .data()
        .chunks(input.plane())
        .map(|p| p.iter().copied().sum::<T>() * inv)
        .collect();
    Tensor::new([n, c, 1, 1], data).expect("pooled shape")
}

pub fn global_avg_pool_backward<T: Real>(
    grad: &Tensor<T>,
    input_shape: [usize; 4],
) -> Result<Tensor<T>> {
    let [n, c, h, w] = input_shape;
    grad.expect_shape("global_avg_pool_backward", [n, c, 1, 1])?;
    let inv = T::one() / T::from_usize(h * w).expect("plane size");
    let mut gx = Tensor::zeros(input_shape);
    for (x, &g) in gx.data_mut().chunks_mut(h * w).zip(grad.data()) {
        x.fill(g * inv);
    }
    Ok(gx)
}

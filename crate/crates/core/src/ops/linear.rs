use crate::error::{shape_err, Result};
use crate::{Real, Tensor};

/// Gradients of a fully-connected layer.
#[derive(Clone, Debug)]
pub struct LinearGrads<T> {
    pub input: Tensor<T>,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

fn check<T: Real>(input: &Tensor<T>, weight: &[T], bias: &[T], dout: usize) -> Result<usize> {
    let din = input.sample_len();
    if weight.len() != dout * din {
        return shape_err(
            "fully_connected",
            format!("weight [{dout}, {din}] for input {:?}", input.shape()),
            format!("{} weights", weight.len()),
        );
    }
    if bias.len() != dout {
        return shape_err("fully_connected", format!("bias [{dout}]"), [bias.len()]);
    }
    Ok(din)
}

/// Row-wise affine map. Each sample of `input` is flattened to `din`
/// features; `weight` is row-major `[dout, din]`. Output is `[n,dout,1,1]`.
pub fn fully_connected<T: Real>(
    input: &Tensor<T>,
    weight: &[T],
    bias: &[T],
    dout: usize,
) -> Result<Tensor<T>> {
    let din = check(input, weight, bias, dout)?;
    let n = input.n();
    let mut out = Vec::with_capacity(n * dout);
    for _ in 0..n {
        out.extend_from_slice(bias);
    }
    T::gemm(
        n,
        din,
        dout,
        input.data(),
        false,
        weight,
        true,
        T::one(),
        &mut out,
    );
    Tensor::new([n, dout, 1, 1], out)
}

pub fn fully_connected_backward<T: Real>(
    grad: &Tensor<T>,
    input: &Tensor<T>,
    weight: &[T],
    dout: usize,
) -> Result<LinearGrads<T>> {
    let n = input.n();
    let din = input.sample_len();
    if weight.len() != dout * din {
        return shape_err("fully_connected_backward", [dout, din], weight.len());
    }
    grad.expect_shape("fully_connected_backward", [n, dout, 1, 1])?;
    let mut gx = vec![T::zero(); n * din];
    T::gemm(
        n,
        dout,
        din,
        grad.data(),
        false,
        weight,
        false,
        T::zero(),
        &mut gx,
    );
    let mut gw = vec![T::zero(); dout * din];
    T::gemm(
        dout,
        n,
        din,
        grad.data(),
        true,
        input.data(),
        false,
        T::zero(),
        &mut gw,
    );
    let mut gb = vec![T::zero(); dout];
    for row in grad.data().chunks(dout) {
        for (b, &g) in gb.iter_mut().zip(row) {
            *b += g;
        }
    }
    Ok(LinearGrads {
        input: Tensor::new(input.shape(), gx)?,
        weight: gw,
        bias: gb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_bias_only() {
        let x = Tensor::<f32>::new([2, 3, 1, 1], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let mut eye = vec![0.0f32; 9];
        for i in 0..3 {
            eye[i * 4] = 1.0;
        }
        assert_eq!(
            fully_connected(&x, &eye, &[0.0; 3], 3).unwrap().data(),
            x.data()
        );
        let y = fully_connected(&x, &[0.0; 6], &[7.0, -1.0], 2).unwrap();
        assert_eq!(y.data(), &[7.0, -1.0, 7.0, -1.0]);
    }

    #[test]
    fn rejects_bad_dimensions() {
        let x = Tensor::<f32>::zeros([2, 3, 1, 1]);
        let err = fully_connected(&x, &[0.0; 5], &[0.0; 2], 2)
            .unwrap_err()
            .to_string();
        assert!(
            err.contains("[2, 3]") && err.contains("[2, 3, 1, 1]"),
            "{err}"
        );
        assert!(fully_connected(&x, &[0.0; 6], &[0.0; 3], 2).is_err());
    }
}

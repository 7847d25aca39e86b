use crate::error::{shape_err, Result};
use crate::{Real, Tensor};

fn check_coeff<T: Real>(op: &'static str, input: &Tensor<T>, coeff: &[T]) -> Result<()> {
    if coeff.len() != input.c() {
        return shape_err(op, format!("{} coefficients", input.c()), coeff.len());
    }
    Ok(())
}

/// `x` where `x ≥ 0`, `coeff[c]·x` otherwise.
pub fn prelu_forward<T: Real>(input: &Tensor<T>, coeff: &[T]) -> Result<Tensor<T>> {
    check_coeff("prelu", input, coeff)?;
    let c = input.c();
    let mut out = input.clone();
    for (i, chunk) in out.data_mut().chunks_mut(input.plane()).enumerate() {
        let a = coeff[i % c];
        for v in chunk {
            if *v < T::zero() {
                *v *= a;
            }
        }
    }
    Ok(out)
}

/// Returns `(grad_input, grad_coeff)`.
pub fn prelu_backward<T: Real>(
    grad: &Tensor<T>,
    input: &Tensor<T>,
    coeff: &[T],
) -> Result<(Tensor<T>, Vec<T>)> {
    check_coeff("prelu_backward", input, coeff)?;
    grad.expect_shape("prelu_backward", input.shape())?;
    let c = input.c();
    let plane = input.plane();
    let mut gc = vec![T::zero(); c];
    let mut gx = grad.clone();
    for (i, (g, x)) in gx
        .data_mut()
        .chunks_mut(plane)
        .zip(input.data().chunks(plane))
        .enumerate()
    {
        let ch = i % c;
        let mut acc = T::zero();
        for (gv, &xv) in g.iter_mut().zip(x) {
            if xv < T::zero() {
                acc += *gv * xv;
                *gv *= coeff[ch];
            }
        }
        gc[ch] += acc;
    }
    Ok((gx, gc))
}

fn sigmoid_scalar<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    input.map(sigmoid_scalar)
}

/// Gradient through a sigmoid given its forward output `s`: `g·s(1−s)`.
pub fn sigmoid_backward<T: Real>(grad: &Tensor<T>, output: &Tensor<T>) -> Result<Tensor<T>> {
    grad.expect_shape("sigmoid_backward", output.shape())?;
    let mut g = grad.clone();
    for (gv, &s) in g.data_mut().iter_mut().zip(output.data()) {
        *gv *= s * (T::one() - s);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prelu_definition() {
        let x = Tensor::<f32>::new([1, 2, 1, 2], vec![1.0, 0.0, -2.0, 3.0]).unwrap();
        let y = prelu_forward(&x, &[0.1, 0.25]).unwrap();
        assert_eq!(y.data(), &[1.0, 0.0, -0.5, 3.0]);
        let pos = Tensor::<f32>::full([2, 2, 2, 2], 0.7);
        assert_eq!(prelu_forward(&pos, &[0.25, 0.25]).unwrap(), pos);
        assert!(prelu_forward(&pos, &[0.25]).is_err());
    }

    #[test]
    fn prelu_coeff_gradient_is_sum_of_negative_inputs() {
        let x = Tensor::<f64>::new([1, 1, 1, 3], vec![-1.0, -2.0, 5.0]).unwrap();
        let g = Tensor::full([1, 1, 1, 3], 1.0);
        let (gx, gc) = prelu_backward(&g, &x, &[0.5]).unwrap();
        assert_eq!(gc, vec![-3.0]);
        assert_eq!(gx.data(), &[0.5, 0.5, 1.0]);
    }

    #[test]
    fn sigmoid_values() {
        let x = Tensor::<f32>::new([1, 3, 1, 1], vec![0.0, 80.0, -80.0]).unwrap();
        let y = sigmoid(&x);
        assert_eq!(y.data()[0], 0.5);
        assert!((y.data()[1] - 1.0).abs() < 1e-6);
        assert!(y.data()[2] >= 0.0 && y.data()[2] < 1e-6);
        assert!(y.all_finite());
    }
}

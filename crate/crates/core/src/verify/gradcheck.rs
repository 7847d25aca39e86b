use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arch::{
    build_model, ArchHyperParams, AttentionLayer, Model, SeGate, StemBranch, VisualLayer,
    VisualReceptor,
};
use crate::error::Result;
use crate::layers::{Conv2d, Linear, Module, PRelu};
use crate::ops::{self, BatchNorm};
use crate::param::ParamKind;
use crate::train::he_init;
use crate::Tensor;

use super::{Check, SuiteReport};

pub const PRIMITIVE_TOLERANCE: f64 = 1e-3;
pub const E2E_TOLERANCE: f64 = 1e-2;
/// Central-difference step in f64.
const STEP: f64 = 1e-5;
/// Smaller step for the whole network, where ~10^6 PReLU inputs sit near a kink.
const E2E_STEP: f64 = 1e-7;
/// Magnitudes below this are compared absolutely.
const ERR_FLOOR: f64 = 1e-6;
const COORDS_PER_TENSOR: usize = 24;
const E2E_SAMPLES: usize = 20;

/// Largest relative error between analytic and numeric derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub op: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }

    fn to_check(&self) -> Check {
        Check::new(
            &self.op,
            self.passed(),
            format!(
                "max rel err {:.3e} over {} coords (tol {:.0e})",
                self.max_rel_err, self.checked, self.tolerance
            ),
        )
    }
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(ERR_FLOOR)
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: [usize; 4]) -> Tensor<f64> {
    let len = shape.iter().product();
    Tensor::new(
        shape,
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .expect("shape")
}

/// Values bounded away from zero so no PReLU kink sits within the step.
fn off_kink(rng: &mut ChaCha8Rng, shape: [usize; 4]) -> Tensor<f64> {
    random_tensor(rng, shape).map(|v| if v < 0.0 { v - 0.1 } else { v + 0.1 })
}

fn sample_coords(rng: &mut ChaCha8Rng, len: usize, k: usize) -> Vec<usize> {
    if len <= k {
        (0..len).collect()
    } else {
        (0..k).map(|_| rng.random_range(0..len)).collect()
    }
}

fn weighted(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn randomize<M: Module<f64> + ?Sized>(m: &mut M, rng: &mut ChaCha8Rng) {
    m.visit_params_mut(&mut |p| {
        if p.kind != ParamKind::Learnable {
            return;
        }
        let (lo, hi) = match p.name.rsplit('.').next() {
            Some("gamma") => (0.5, 1.5),
            Some("coeff") => (0.1, 0.4),
            _ => (-0.5, 0.5),
        };
        for v in p.value.data_mut() {
            *v = rng.random_range(lo..hi);
        }
    });
}

fn param_value<M: Module<f64> + ?Sized>(m: &mut M, tensor: usize, idx: usize, delta: f64) {
    let mut t = 0;
    m.visit_params_mut(&mut |p| {
        if p.kind == ParamKind::Learnable {
            if t == tensor {
                p.value.data_mut()[idx] += delta;
            }
            t += 1;
        }
    });
}

/// Checks input and parameter gradients of a module under `Σ R ⊙ f(x)`.
fn check_module<M: Module<f64>>(
    op: &str,
    m: &mut M,
    x: Tensor<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<GradCheck> {
    let y = m.forward_train(&x)?;
    let r = random_tensor(rng, y.shape());
    m.visit_params_mut(&mut |p| p.zero_grad());
    let gx = m.backward(&r)?;
    let mut grads = Vec::new();
    m.visit_params(&mut |p| {
        if p.kind == ParamKind::Learnable {
            grads.push(p.grad.data().to_vec())
        }
    });
    let loss =
        |m: &mut M, x: &Tensor<f64>| -> Result<f64> { Ok(weighted(&m.forward_train(x)?, &r)) };
    let mut worst = 0.0f64;
    let mut checked = 0;
    for i in sample_coords(rng, x.len(), COORDS_PER_TENSOR) {
        let mut xp = x.clone();
        xp.data_mut()[i] += STEP;
        let mut xm = x.clone();
        xm.data_mut()[i] -= STEP;
        let n = (loss(m, &xp)? - loss(m, &xm)?) / (2.0 * STEP);
        worst = worst.max(rel_err(gx.data()[i], n));
        checked += 1;
    }
    for (t, g) in grads.iter().enumerate() {
        for i in sample_coords(rng, g.len(), COORDS_PER_TENSOR) {
            param_value(m, t, i, STEP);
            let lp = loss(m, &x)?;
            param_value(m, t, i, -2.0 * STEP);
            let lm = loss(m, &x)?;
            param_value(m, t, i, STEP);
            worst = worst.max(rel_err(g[i], (lp - lm) / (2.0 * STEP)));
            checked += 1;
        }
    }
    m.clear_cache();
    Ok(GradCheck {
        op: op.to_string(),
        checked,
        max_rel_err: worst,
        tolerance: PRIMITIVE_TOLERANCE,
    })
}

/// Checks a stateless map given its forward and vector-Jacobian product.
fn check_fn(
    op: &str,
    x: Tensor<f64>,
    rng: &mut ChaCha8Rng,
    f: impl Fn(&Tensor<f64>) -> Result<Tensor<f64>>,
    vjp: impl Fn(&Tensor<f64>, &Tensor<f64>) -> Result<Tensor<f64>>,
) -> Result<GradCheck> {
    let y = f(&x)?;
    let r = random_tensor(rng, y.shape());
    let gx = vjp(&x, &r)?;
    let mut worst = 0.0f64;
    let coords = sample_coords(rng, x.len(), COORDS_PER_TENSOR);
    for &i in &coords {
        let mut xp = x.clone();
        xp.data_mut()[i] += STEP;
        let mut xm = x.clone();
        xm.data_mut()[i] -= STEP;
        let n = (weighted(&f(&xp)?, &r) - weighted(&f(&xm)?, &r)) / (2.0 * STEP);
        worst = worst.max(rel_err(gx.data()[i], n));
    }
    Ok(GradCheck {
        op: op.to_string(),
        checked: coords.len(),
        max_rel_err: worst,
        tolerance: PRIMITIVE_TOLERANCE,
    })
}

/// Finite-difference checks of every primitive and composite block in f64.
pub fn primitive_gradchecks(seed: u64) -> Result<Vec<GradCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rng = &mut rng;
    let mut out = Vec::new();

    for k in [1, 3] {
        let mut conv = Conv2d::<f64>::new("conv", 3, 4, k);
        randomize(&mut conv, rng);
        let x = random_tensor(rng, [2, 3, 5, 5]);
        out.push(check_module(&format!("conv2d {k}x{k}"), &mut conv, x, rng)?);
    }
    let mut bn = BatchNorm::<f64>::new("bn", 3);
    randomize(&mut bn, rng);
    let x = random_tensor(rng, [3, 3, 4, 4]);
    out.push(check_module("batchnorm (train)", &mut bn, x, rng)?);

    let mut prelu = PRelu::<f64>::new("prelu", 3);
    randomize(&mut prelu, rng);
    let x = off_kink(rng, [2, 3, 3, 3]);
    out.push(check_module("prelu", &mut prelu, x, rng)?);

    let mut fc = Linear::<f64>::new("fc", 12, 5);
    randomize(&mut fc, rng);
    let x = random_tensor(rng, [3, 3, 2, 2]);
    out.push(check_module("fully_connected", &mut fc, x, rng)?);

    out.push(sigmoid_check(rng)?);

    let x = random_tensor(rng, [2, 3, 4, 6]);
    let shape = x.shape();
    out.push(check_fn(
        "avg_pool_2x2",
        x,
        rng,
        ops::avg_pool_2x2,
        move |_, r| ops::avg_pool_2x2_backward(r, shape),
    )?);

    let x = random_tensor(rng, [2, 3, 3, 5]);
    let shape = x.shape();
    out.push(check_fn(
        "global_avg_pool",
        x,
        rng,
        |x| Ok(ops::global_avg_pool(x)),
        move |_, r| ops::global_avg_pool_backward(r, shape),
    )?);

    let x = random_tensor(rng, [2, 5, 2, 2]);
    out.push(check_fn(
        "concat/split channels",
        x,
        rng,
        |x| {
            let parts = ops::split_channels(x, &[2, 3])?;
            ops::concat_channels(&[&parts[1], &parts[0]])
        },
        |_, r| {
            let parts = ops::split_channels(r, &[3, 2])?;
            ops::concat_channels(&[&parts[1], &parts[0]])
        },
    )?);

    let w = random_tensor(rng, [2, 3, 1, 1]);
    let x = random_tensor(rng, [2, 3, 3, 3]);
    {
        let wc = w.clone();
        out.push(check_fn(
            "channel_scale (input)",
            x.clone(),
            rng,
            |x| ops::channel_scale(x, &wc),
            |x, r| Ok(ops::channel_scale_backward(r, x, &wc)?.0),
        )?);
        let xc = x.clone();
        out.push(check_fn(
            "channel_scale (weights)",
            w,
            rng,
            |w| ops::channel_scale(&xc, w),
            |w, r| Ok(ops::channel_scale_backward(r, &xc, w)?.1),
        )?);
    }

    let logits = random_tensor(rng, [4, 4, 1, 1]).map(|v| 3.0 * v);
    let labels = [0usize, 3, 1, 2];
    out.push(cross_entropy_check(logits, &labels)?);

    let mut gate = SeGate::<f64>::new("gate", 6, 2);
    randomize(&mut gate, rng);
    let x = random_tensor(rng, [2, 6, 3, 3]);
    out.push(check_module("se_gate", &mut gate, x, rng)?);

    for attention in [true, false] {
        let mut layer = AttentionLayer::<f64>::new("attn", 4, 6, 2, attention);
        randomize(&mut layer, rng);
        let x = random_tensor(rng, [2, 4, 4, 4]);
        let name = if attention {
            "attention layer"
        } else {
            "transition layer"
        };
        out.push(check_module(name, &mut layer, x, rng)?);
    }

    let mut receptor = VisualReceptor::<f64>::new("vr", 5, 3, 2);
    randomize(&mut receptor, rng);
    let x = random_tensor(rng, [2, 5, 4, 4]);
    out.push(check_module("visual receptor", &mut receptor, x, rng)?);

    let mut layer = VisualLayer::<f64>::new("vl", 2, 5, 3, 2);
    randomize(&mut layer, rng);
    let x = random_tensor(rng, [2, 5, 4, 4]);
    out.push(check_module("visual layer", &mut layer, x, rng)?);

    let mut stem = StemBranch::<f64>::new("stem", 3, 4, 3, 1, true);
    randomize(&mut stem, rng);
    let x = random_tensor(rng, [2, 3, 4, 4]);
    out.push(check_module("stem branch", &mut stem, x, rng)?);

    Ok(out)
}

fn sigmoid_check(rng: &mut ChaCha8Rng) -> Result<GradCheck> {
    let x = random_tensor(rng, [2, 3, 3, 3]).map(|v| 4.0 * v);
    check_fn(
        "sigmoid",
        x,
        rng,
        |x| Ok(ops::sigmoid(x)),
        |x, r| ops::sigmoid_backward(r, &ops::sigmoid(x)),
    )
}

fn cross_entropy_check(logits: Tensor<f64>, labels: &[usize]) -> Result<GradCheck> {
    let (_, g) = ops::softmax_cross_entropy(&logits, labels)?;
    let mut worst = 0.0f64;
    for i in 0..logits.len() {
        let mut p = logits.clone();
        p.data_mut()[i] += STEP;
        let mut m = logits.clone();
        m.data_mut()[i] -= STEP;
        let n = (ops::softmax_cross_entropy(&p, labels)?.0
            - ops::softmax_cross_entropy(&m, labels)?.0)
            / (2.0 * STEP);
        worst = worst.max(rel_err(g.data()[i], n));
    }
    Ok(GradCheck {
        op: "softmax_cross_entropy".into(),
        checked: logits.len(),
        max_rel_err: worst,
        tolerance: PRIMITIVE_TOLERANCE,
    })
}

fn tiny_batch(seed: u64) -> Result<(Model<f64>, Tensor<f64>, Vec<usize>)> {
    let hp = ArchHyperParams::preset("tiny")?;
    let mut model: Model<f64> = build_model(&hp)?;
    he_init(&mut model, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let (h, w) = hp.input_hw;
    let x = random_tensor(&mut rng, [4, 3, h, w]);
    let labels = (0..4).map(|i| i % hp.num_classes).collect();
    Ok((model, x, labels))
}

/// Cross-entropy gradient of the whole tiny network, batch 4 at its native
/// input size, against central differences on sampled parameters.
pub fn end_to_end_gradcheck(seed: u64) -> Result<GradCheck> {
    let (mut model, x, labels) = tiny_batch(seed)?;
    let logits = model.forward_train(&x)?;
    let (_, g) = ops::softmax_cross_entropy(&logits, &labels)?;
    model.zero_grad();
    model.backward(&g)?;
    let grads: Vec<Vec<f64>> = model
        .params()
        .iter()
        .map(|p| p.grad.data().to_vec())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfd);
    let loss = |m: &mut Model<f64>| -> Result<f64> {
        Ok(ops::softmax_cross_entropy(&m.forward_train(&x)?, &labels)?.0)
    };
    let mut worst = 0.0f64;
    for _ in 0..E2E_SAMPLES {
        let t = rng.random_range(0..grads.len());
        let i = rng.random_range(0..grads[t].len());
        param_value(&mut model, t, i, E2E_STEP);
        let lp = loss(&mut model)?;
        param_value(&mut model, t, i, -2.0 * E2E_STEP);
        let lm = loss(&mut model)?;
        param_value(&mut model, t, i, E2E_STEP);
        worst = worst.max(rel_err(grads[t][i], (lp - lm) / (2.0 * E2E_STEP)));
    }
    Ok(GradCheck {
        op: "end-to-end tiny (f64)".into(),
        checked: E2E_SAMPLES,
        max_rel_err: worst,
        tolerance: E2E_TOLERANCE,
    })
}

/// Agreement of the single-precision backward pass with the f64 one on the
/// same network and batch, measured as the relative L2 distance.
pub fn precision_agreement(seed: u64) -> Result<GradCheck> {
    let (mut m64, x, labels) = tiny_batch(seed)?;
    let mut m32: Model<f32> = m64.cast();
    let logits = m64.forward_train(&x)?;
    m64.zero_grad();
    m64.backward(&ops::softmax_cross_entropy(&logits, &labels)?.1)?;
    let x32: Tensor<f32> = x.cast();
    let logits = m32.forward_train(&x32)?;
    m32.zero_grad();
    m32.backward(&ops::softmax_cross_entropy(&logits, &labels)?.1)?;
    let (mut diff, mut norm) = (0.0f64, 0.0f64);
    for (a, b) in m64.params().iter().zip(m32.params()) {
        for (&u, &v) in a.grad.data().iter().zip(b.grad.data()) {
            diff += (u - v as f64).powi(2);
            norm += u * u;
        }
    }
    Ok(GradCheck {
        op: "end-to-end tiny f32 vs f64".into(),
        checked: m64.params().iter().map(|p| p.numel()).sum(),
        max_rel_err: (diff / norm.max(f64::MIN_POSITIVE)).sqrt(),
        tolerance: E2E_TOLERANCE,
    })
}

pub fn gradcheck_suite(seed: u64) -> SuiteReport {
    let mut checks = Vec::new();
    match primitive_gradchecks(seed) {
        Ok(v) => checks.extend(v.iter().map(GradCheck::to_check)),
        Err(e) => checks.push(Check::new("primitives", false, e.to_string())),
    }
    for r in [end_to_end_gradcheck(seed), precision_agreement(seed)] {
        match r {
            Ok(g) => checks.push(g.to_check()),
            Err(e) => checks.push(Check::new("end-to-end", false, e.to_string())),
        }
    }
    SuiteReport {
        suite: "gradcheck",
        checks,
    }
}

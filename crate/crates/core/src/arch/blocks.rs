//! The composite blocks: squeeze-and-excitation gate, attention (transition)
//! layer, visual receptor, visual layer and stem branch.

use crate::error::{precondition, Result};
use crate::layers::{add_into, Conv2d, Linear, Module, PRelu};
use crate::ops::{self, BatchNorm};
use crate::param::Param;
use crate::{Real, Tensor};

/// Bias that saturates the gate sigmoid to exactly 1 in both precisions.
const UNIT_GATE_BIAS: f64 = 40.0;

#[derive(Clone, Debug)]
struct GateCache<T> {
    input: Tensor<T>,
    gate: Tensor<T>,
}

/// Channel gate: global pool → fc (PReLU) → fc (sigmoid) → per-channel scale.
#[derive(Clone, Debug)]
pub struct SeGate<T = f32> {
    pub fc1: Linear<T>,
    pub act: PRelu<T>,
    pub fc2: Linear<T>,
    cache: Option<GateCache<T>>,
}

impl<T: Real> SeGate<T> {
    pub fn new(prefix: &str, channels: usize, reduction: usize) -> Self {
        Self {
            fc1: Linear::new(&format!("{prefix}.fc1"), channels, reduction),
            act: PRelu::new(&format!("{prefix}.act"), reduction),
            fc2: Linear::new(&format!("{prefix}.fc2"), reduction, channels),
            cache: None,
        }
    }

    /// Per-sample channel weights in (0, 1), shape `[n,c,1,1]`.
    pub fn weights(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let pooled = ops::global_avg_pool(x);
        let h = self.act.forward_eval(&self.fc1.forward_eval(&pooled)?)?;
        Ok(ops::sigmoid(&self.fc2.forward_eval(&h)?))
    }

    /// Zeroes the second projection and saturates its bias so every gate is 1.
    pub fn force_unit(&mut self) {
        self.fc2.weight.value.data_mut().fill(T::zero());
        self.fc2
            .bias
            .value
            .data_mut()
            .fill(T::from_f64_lossy(UNIT_GATE_BIAS));
    }
}

impl<T: Real> Module<T> for SeGate<T> {
    fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let pooled = ops::global_avg_pool(x);
        let h = self.fc1.forward_train(&pooled)?;
        let h = self.act.forward_train(&h)?;
        let gate = ops::sigmoid(&self.fc2.forward_train(&h)?);
        let y = ops::channel_scale(x, &gate)?;
        self.cache = Some(GateCache {
            input: x.clone(),
            gate,
        });
        Ok(y)
    }

    fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        ops::channel_scale(x, &self.weights(x)?)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let Some(cache) = self.cache.as_ref() else {
            return precondition("se_gate_backward", "no saved train-mode forward");
        };
        let (mut gx, gs) = ops::channel_scale_backward(grad, &cache.input, &cache.gate)?;
        let gz = ops::sigmoid_backward(&gs, &cache.gate)?;
        let in_shape = cache.input.shape();
        let gh = self.fc2.backward(&gz)?;
        let gh = self.act.backward(&gh)?;
        let gp = self.fc1.backward(&gh)?;
        add_into(&mut gx, &ops::global_avg_pool_backward(&gp, in_shape)?);
        Ok(gx)
    }

    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        self.fc1.visit_params(f);
        self.act.visit_params(f);
        self.fc2.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.fc1.visit_params_mut(f);
        self.act.visit_params_mut(f);
        self.fc2.visit_params_mut(f);
    }

    fn clear_cache(&mut self) {
        self.cache = None;
        self.fc1.clear_cache();
        self.act.clear_cache();
        self.fc2.clear_cache();
    }
}

/// BN → PReLU → 1×1 conv → [gate] → 2×2 average pool.
///
/// With `gate == None` this is the plain transition layer of MvTNet.
#[derive(Clone, Debug)]
pub struct AttentionLayer<T = f32> {
    pub bn: BatchNorm<T>,
    pub act: PRelu<T>,
    pub conv: Conv2d<T>,
    pub gate: Option<SeGate<T>>,
    pool_in: Option<[usize; 4]>,
}

impl<T: Real> AttentionLayer<T> {
    pub fn new(prefix: &str, c_in: usize, c_out: usize, reduction: usize, attention: bool) -> Self {
        Self {
            bn: BatchNorm::new(&format!("{prefix}.bn"), c_in),
            act: PRelu::new(&format!("{prefix}.act"), c_in),
            conv: Conv2d::new(&format!("{prefix}.conv"), c_in, c_out, 1),
            gate: attention.then(|| SeGate::new(&format!("{prefix}.gate"), c_out, reduction)),
            pool_in: None,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.conv.out_channels()
    }
}

impl<T: Real> Module<T> for AttentionLayer<T> {
    fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.bn.forward_train(x)?;
        let y = self.act.forward_train(&y)?;
        let mut y = self.conv.forward_train(&y)?;
        if let Some(g) = self.gate.as_mut() {
            y = g.forward_train(&y)?;
        }
        self.pool_in = Some(y.shape());
        ops::avg_pool_2x2(&y)
    }

    fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.bn.forward_eval(x)?;
        let y = self.act.forward_eval(&y)?;
        let mut y = self.conv.forward_eval(&y)?;
        if let Some(g) = self.gate.as_ref() {
            y = g.forward_eval(&y)?;
        }
        ops::avg_pool_2x2(&y)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let Some(shape) = self.pool_in else {
            return precondition("attention_backward", "no saved train-mode forward");
        };
        let mut g = ops::avg_pool_2x2_backward(grad, shape)?;
        if let Some(gate) = self.gate.as_mut() {
            g = gate.backward(&g)?;
        }
        let g = self.conv.backward(&g)?;
        let g = self.act.backward(&g)?;
        self.bn.backward(&g)
    }

    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        self.bn.visit_params(f);
        self.act.visit_params(f);
        self.conv.visit_params(f);
        if let Some(g) = &self.gate {
            g.visit_params(f);
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.bn.visit_params_mut(f);
        self.act.visit_params_mut(f);
        self.conv.visit_params_mut(f);
        if let Some(g) = &mut self.gate {
            g.visit_params_mut(f);
        }
    }

    fn visit_bn_mut(&mut self, f: &mut dyn FnMut(&mut BatchNorm<T>)) {
        f(&mut self.bn);
    }

    fn visit_bn(&self, f: &mut dyn FnMut(&BatchNorm<T>)) {
        f(&self.bn);
    }

    fn clear_cache(&mut self) {
        self.pool_in = None;
        self.bn.clear_cache();
        self.act.clear_cache();
        self.conv.clear_cache();
        if let Some(g) = &mut self.gate {
            g.clear_cache();
        }
    }
}

/// Bottleneck unit: BN → PReLU → 1×1 conv → BN → PReLU → 3×3 conv.
#[derive(Clone, Debug)]
pub struct VisualReceptor<T = f32> {
    pub bn1: BatchNorm<T>,
    pub act1: PRelu<T>,
    pub conv1: Conv2d<T>,
    pub bn2: BatchNorm<T>,
    pub act2: PRelu<T>,
    pub conv2: Conv2d<T>,
}

impl<T: Real> VisualReceptor<T> {
    pub fn new(prefix: &str, c_in: usize, bottleneck: usize, growth: usize) -> Self {
        Self {
            bn1: BatchNorm::new(&format!("{prefix}.bn1"), c_in),
            act1: PRelu::new(&format!("{prefix}.act1"), c_in),
            conv1: Conv2d::new(&format!("{prefix}.conv1"), c_in, bottleneck, 1),
            bn2: BatchNorm::new(&format!("{prefix}.bn2"), bottleneck),
            act2: PRelu::new(&format!("{prefix}.act2"), bottleneck),
            conv2: Conv2d::new(&format!("{prefix}.conv2"), bottleneck, growth, 3),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.conv2.out_channels()
    }

    fn children_mut(&mut self) -> [&mut dyn Module<T>; 6] {
        [
            &mut self.bn1,
            &mut self.act1,
            &mut self.conv1,
            &mut self.bn2,
            &mut self.act2,
            &mut self.conv2,
        ]
    }

    fn children(&self) -> [&dyn Module<T>; 6] {
        [
            &self.bn1,
            &self.act1,
            &self.conv1,
            &self.bn2,
            &self.act2,
            &self.conv2,
        ]
    }
}

impl<T: Real> Module<T> for VisualReceptor<T> {
    fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut y = x.clone();
        for m in self.children_mut() {
            y = m.forward_train(&y)?;
        }
        Ok(y)
    }

    fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut y = self.bn1.forward_eval(x)?;
        for m in &self.children()[1..] {
            y = m.forward_eval(&y)?;
        }
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = grad.clone();
        for m in self.children_mut().into_iter().rev() {
            g = m.backward(&g)?;
        }
        Ok(g)
    }

    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        self.bn1.visit_params(f);
        self.act1.visit_params(f);
        self.conv1.visit_params(f);
        self.bn2.visit_params(f);
        self.act2.visit_params(f);
        self.conv2.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        for m in self.children_mut() {
            m.visit_params_mut(f);
        }
    }

    fn visit_bn_mut(&mut self, f: &mut dyn FnMut(&mut BatchNorm<T>)) {
        f(&mut self.bn1);
        f(&mut self.bn2);
    }

    fn visit_bn(&self, f: &mut dyn FnMut(&BatchNorm<T>)) {
        f(&self.bn1);
        f(&self.bn2);
    }

    fn clear_cache(&mut self) {
        for m in self.children_mut() {
            m.clear_cache();
        }
    }
}

/// `p` receptors sharing one input; outputs concatenated in receptor order.
#[derive(Clone, Debug)]
pub struct VisualLayer<T = f32> {
    pub receptors: Vec<VisualReceptor<T>>,
}

impl<T: Real> VisualLayer<T> {
    pub fn new(prefix: &str, p: usize, c_in: usize, bottleneck: usize, growth: usize) -> Self {
        Self {
            receptors: (0..p)
                .map(|i| VisualReceptor::new(&format!("{prefix}.vr{i}"), c_in, bottleneck, growth))
                .collect(),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.receptors.iter().map(|r| r.out_channels()).sum()
    }

    /// Per-receptor outputs (before concatenation) in eval mode.
    pub fn receptor_outputs(&self, x: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        self.receptors.iter().map(|r| r.forward_eval(x)).collect()
    }

    fn widths(&self) -> Vec<usize> {
        self.receptors.iter().map(|r| r.out_channels()).collect()
    }
}

impl<T: Real> Module<T> for VisualLayer<T> {
    fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let outs = self
            .receptors
            .iter_mut()
            .map(|r| r.forward_train(x))
            .collect::<Result<Vec<_>>>()?;
        ops::concat_channels(&outs.iter().collect::<Vec<_>>())
    }

    fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let outs = self.receptor_outputs(x)?;
        ops::concat_channels(&outs.iter().collect::<Vec<_>>())
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let parts = ops::split_channels(grad, &self.widths())?;
        let mut acc: Option<Tensor<T>> = None;
        for (r, g) in self.receptors.iter_mut().zip(&parts) {
            let gi = r.backward(g)?;
            match acc.as_mut() {
                Some(a) => add_into(a, &gi),
                None => acc = Some(gi),
            }
        }
        Ok(acc.expect("at least one receptor"))
    }

    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        for r in &self.receptors {
            r.visit_params(f);
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        for r in &mut self.receptors {
            r.visit_params_mut(f);
        }
    }

    fn visit_bn_mut(&mut self, f: &mut dyn FnMut(&mut BatchNorm<T>)) {
        for r in &mut self.receptors {
            r.visit_bn_mut(f);
        }
    }

    fn visit_bn(&self, f: &mut dyn FnMut(&BatchNorm<T>)) {
        for r in &self.receptors {
            r.visit_bn(f);
        }
    }

    fn clear_cache(&mut self) {
        for r in &mut self.receptors {
            r.clear_cache();
        }
    }
}

/// One stem branch: BN on the raw image → 3×3 conv → BN → PReLU → 1×1 conv
/// → attention layer A.
#[derive(Clone, Debug)]
pub struct StemBranch<T = f32> {
    pub bn_in: BatchNorm<T>,
    pub conv3: Conv2d<T>,
    pub bn: BatchNorm<T>,
    pub act: PRelu<T>,
    pub conv1: Conv2d<T>,
    pub attention: AttentionLayer<T>,
}

impl<T: Real> StemBranch<T> {
    pub fn new(
        prefix: &str,
        in_channels: usize,
        width: usize,
        attn_width: usize,
        reduction: usize,
        attention: bool,
    ) -> Self {
        Self {
            bn_in: BatchNorm::new(&format!("{prefix}.bn_in"), in_channels),
            conv3: Conv2d::new(&format!("{prefix}.conv3"), in_channels, width, 3),
            bn: BatchNorm::new(&format!("{prefix}.bn"), width),
            act: PRelu::new(&format!("{prefix}.act"), width),
            conv1: Conv2d::new(&format!("{prefix}.conv1"), width, width, 1),
            attention: AttentionLayer::new(
                &format!("{prefix}.attn"),
                width,
                attn_width,
                reduction,
                attention,
            ),
        }
    }

    fn children_mut(&mut self) -> [&mut dyn Module<T>; 6] {
        [
            &mut self.bn_in,
            &mut self.conv3,
            &mut self.bn,
            &mut self.act,
            &mut self.conv1,
            &mut self.attention,
        ]
    }

    fn children(&self) -> [&dyn Module<T>; 6] {
        [
            &self.bn_in,
            &self.conv3,
            &self.bn,
            &self.act,
            &self.conv1,
            &self.attention,
        ]
    }
}

impl<T: Real> Module<T> for StemBranch<T> {
    fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut y = x.clone();
        for m in self.children_mut() {
            y = m.forward_train(&y)?;
        }
        Ok(y)
    }

    fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut y = self.bn_in.forward_eval(x)?;
        for m in &self.children()[1..] {
            y = m.forward_eval(&y)?;
        }
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = grad.clone();
        for m in self.children_mut().into_iter().rev() {
            g = m.backward(&g)?;
        }
        Ok(g)
    }

    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        self.bn_in.visit_params(f);
        self.conv3.visit_params(f);
        self.bn.visit_params(f);
        self.act.visit_params(f);
        self.conv1.visit_params(f);
        self.attention.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        for m in self.children_mut() {
            m.visit_params_mut(f);
        }
    }

    fn visit_bn_mut(&mut self, f: &mut dyn FnMut(&mut BatchNorm<T>)) {
        f(&mut self.bn_in);
        f(&mut self.bn);
        self.attention.visit_bn_mut(f);
    }

    fn visit_bn(&self, f: &mut dyn FnMut(&BatchNorm<T>)) {
        f(&self.bn_in);
        f(&self.bn);
        self.attention.visit_bn(f);
    }

    fn clear_cache(&mut self) {
        for m in self.children_mut() {
            m.clear_cache();
        }
    }
}

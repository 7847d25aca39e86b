use super::blocks::{AttentionLayer, StemBranch, VisualLayer, VisualReceptor};
use super::plan::{channel_plan, ChannelPlan};
use super::ArchHyperParams;
use crate::error::{precondition, shape_err, Result};
use crate::layers::{add_into, Linear, Module};
use crate::ops::{self, BatchNorm};
use crate::param::{Param, ParamKind};
use crate::{Mode, Real, Tensor};

/// Input channels of the network (RGB).
pub const INPUT_CHANNELS: usize = 3;

/// Intermediate activations of one eval-mode forward pass.
#[derive(Clone, Debug)]
pub struct Trace<T = f32> {
    /// Output of each stem branch after its attention layer.
    pub stem: Vec<Tensor<T>>,
    /// `x_0`, the concatenated stem output.
    pub x0: Tensor<T>,
    /// Per visual layer, the output of each receptor.
    pub receptors: Vec<Vec<Tensor<T>>>,
    /// Dense concatenation `y_3` consumed by the fusion receptor.
    pub dense: Tensor<T>,
    pub fusion: Tensor<T>,
    pub attention_b: Tensor<T>,
    pub logits: Tensor<T>,
}

#[derive(Clone, Debug)]
struct ModelCache {
    pooled_from: [usize; 4],
}

/// The assembled network: stem, three densely wired visual layers, fusion
/// receptor, final attention layer and classifier.
#[derive(Clone, Debug)]
pub struct Model<T = f32> {
    hp: ArchHyperParams,
    plan: ChannelPlan,
    pub stem: Vec<StemBranch<T>>,
    pub layers: Vec<VisualLayer<T>>,
    pub fusion: VisualReceptor<T>,
    pub attention_b: AttentionLayer<T>,
    pub classifier: Linear<T>,
    cache: Option<ModelCache>,
}

/// Builds the graph for `hp`. Weights start at zero and batch-norm running
/// statistics are unset; run [`he_init`](crate::train::he_init) before use.
pub fn build_model<T: Real>(hp: &ArchHyperParams) -> Result<Model<T>> {
    let plan = channel_plan(hp)?;
    let stem = (0..plan.p)
        .map(|i| {
            StemBranch::new(
                &format!("stem.b{i}"),
                INPUT_CHANNELS,
                plan.stem_width,
                plan.attn_a_width,
                plan.attn_a_reduction,
                hp.attention,
            )
        })
        .collect();
    let layers = plan
        .layers
        .iter()
        .enumerate()
        .map(|(l, lp)| {
            VisualLayer::new(
                &format!("layer{}", l + 1),
                plan.p,
                lp.input,
                lp.bottleneck,
                lp.growth,
            )
        })
        .collect();
    let c3 = plan.layers[2].output;
    Ok(Model {
        fusion: VisualReceptor::new("fusion", c3, plan.fusion_bottleneck, plan.c4),
        attention_b: AttentionLayer::new(
            "attn_b",
            plan.c4,
            plan.c5,
            plan.attn_b_reduction,
            hp.attention,
        ),
        classifier: Linear::new("classifier", plan.c5, plan.num_classes),
        hp: hp.clone(),
        plan,
        stem,
        layers,
        cache: None,
    })
}

impl<T: Real> Model<T> {
    pub fn hparams(&self) -> &ArchHyperParams {
        &self.hp
    }

    pub fn plan(&self) -> &ChannelPlan {
        &self.plan
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let (h, w) = self.hp.input_hw;
        if x.c() != INPUT_CHANNELS || x.h() != h || x.w() != w {
            return shape_err(
                "model_forward",
                format!("[n, {INPUT_CHANNELS}, {h}, {w}]"),
                x.shape(),
            );
        }
        Ok(())
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        match mode {
            Mode::Train => self.forward_train(x),
            Mode::Eval => self.forward_eval(x),
        }
    }

    /// Eval-mode forward that keeps every intermediate activation.
    pub fn trace(&self, x: &Tensor<T>) -> Result<Trace<T>> {
        self.check_input(x)?;
        let stem = self
            .stem
            .iter()
            .map(|b| b.forward_eval(x))
            .collect::<Result<Vec<_>>>()?;
        let x0 = ops::concat_channels(&stem.iter().collect::<Vec<_>>())?;
        let mut feats = vec![x0.clone()];
        let mut receptors = Vec::with_capacity(3);
        for layer in &self.layers {
            let y = ops::concat_channels(&feats.iter().collect::<Vec<_>>())?;
            let outs = layer.receptor_outputs(&y)?;
            feats.push(ops::concat_channels(&outs.iter().collect::<Vec<_>>())?);
            receptors.push(outs);
        }
        let dense = ops::concat_channels(&feats.iter().collect::<Vec<_>>())?;
        let fusion = self.fusion.forward_eval(&dense)?;
        let attention_b = self.attention_b.forward_eval(&fusion)?;
        let logits = self
            .classifier
            .forward_eval(&ops::global_avg_pool(&attention_b))?;
        Ok(Trace {
            stem,
            x0,
            receptors,
            dense,
            fusion,
            attention_b,
            logits,
        })
    }

    /// Learnable parameters in stable order.
    pub fn params(&self) -> Vec<&Param<T>> {
        let mut out = Vec::new();
        self.visit_params(&mut |p| {
            if p.kind == ParamKind::Learnable {
                out.push(p)
            }
        });
        out
    }

    /// Every named tensor (parameters and running statistics) in stable order.
    pub fn tensors(&self) -> Vec<&Param<T>> {
        let mut out = Vec::new();
        self.visit_params(&mut |p| out.push(p));
        out
    }

    pub fn zero_grad(&mut self) {
        self.visit_params_mut(&mut |p| p.zero_grad());
    }

    pub fn reset_running_stats(&mut self) {
        self.visit_bn_mut(&mut |bn| bn.reset_running_stats());
    }

    /// Saturates every attention gate to exactly 1.
    pub fn force_unit_gates(&mut self) {
        for b in &mut self.stem {
            if let Some(g) = b.attention.gate.as_mut() {
                g.force_unit();
            }
        }
        if let Some(g) = self.attention_b.gate.as_mut() {
            g.force_unit();
        }
    }

    /// Copies values of every same-named, same-shaped tensor from `other`
    /// (including running statistics). Returns how many were copied.
    pub fn copy_params_from(&mut self, other: &Model<T>) -> usize {
        let source: std::collections::HashMap<&str, &Param<T>> = other
            .tensors()
            .into_iter()
            .map(|p| (p.name.as_str(), p))
            .collect();
        let mut copied = 0;
        self.visit_params_mut(&mut |p| {
            if let Some(src) = source.get(p.name.as_str()) {
                if src.dims == p.dims {
                    p.value = src.value.clone();
                    copied += 1;
                }
            }
        });
        let ready = other.bn_ready_flags();
        let mut i = 0;
        self.visit_bn_mut(&mut |bn| {
            if ready.get(i).copied().unwrap_or(false) {
                bn.mark_stats_ready();
            }
            i += 1;
        });
        copied
    }

    /// Same network in another precision (caches dropped).
    pub fn cast<U: Real>(&self) -> Model<U> {
        let mut out: Model<U> = build_model(&self.hp).expect("hyper-parameters already validated");
        let values: Vec<Tensor<U>> = self.tensors().iter().map(|p| p.value.cast()).collect();
        let mut it = values.into_iter();
        out.visit_params_mut(&mut |p| p.value = it.next().expect("same graph"));
        let ready = self.bn_ready_flags();
        let mut i = 0;
        out.visit_bn_mut(&mut |bn| {
            if ready[i] {
                bn.mark_stats_ready();
            }
            i += 1;
        });
        out
    }

    fn bn_ready_flags(&self) -> Vec<bool> {
        let mut v = Vec::new();
        self.visit_bn(&mut |bn| v.push(bn.stats_ready()));
        v
    }

    fn stem_widths(&self) -> Vec<usize> {
        self.stem
            .iter()
            .map(|b| b.attention.out_channels())
            .collect()
    }
}

impl<T: Real> Module<T> for Model<T> {
    fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let stem = self
            .stem
            .iter_mut()
            .map(|b| b.forward_train(x))
            .collect::<Result<Vec<_>>>()?;
        let mut feats = vec![ops::concat_channels(&stem.iter().collect::<Vec<_>>())?];
        drop(stem);
        for layer in &mut self.layers {
            let y = ops::concat_channels(&feats.iter().collect::<Vec<_>>())?;
            feats.push(layer.forward_train(&y)?);
        }
        let dense = ops::concat_channels(&feats.iter().collect::<Vec<_>>())?;
        drop(feats);
        let f = self.fusion.forward_train(&dense)?;
        let a = self.attention_b.forward_train(&f)?;
        self.cache = Some(ModelCache {
            pooled_from: a.shape(),
        });
        self.classifier.forward_train(&ops::global_avg_pool(&a))
    }

    fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.trace(x)?.logits)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let Some(cache) = self.cache.take() else {
            return precondition("model_backward", "no saved train-mode forward");
        };
        let g = self.classifier.backward(grad)?;
        let g = ops::global_avg_pool_backward(&g, cache.pooled_from)?;
        let g = self.attention_b.backward(&g)?;
        let g = self.fusion.backward(&g)?;

        let widths = self.plan.dense_widths();
        let growth: Vec<usize> = std::iter::once(widths[0])
            .chain(self.layers.iter().map(|l| l.out_channels()))
            .collect();
        let mut feat_grads = ops::split_channels(&g, &growth)?;
        for l in (0..self.layers.len()).rev() {
            let gl = feat_grads.pop().expect("one gradient per visual layer");
            let gin = self.layers[l].backward(&gl)?;
            let parts = ops::split_channels(&gin, &growth[..=l])?;
            for (acc, part) in feat_grads.iter_mut().zip(&parts) {
                add_into(acc, part);
            }
        }
        let g0 = feat_grads.pop().expect("stem gradient");
        let parts = ops::split_channels(&g0, &self.stem_widths())?;
        let mut gx: Option<Tensor<T>> = None;
        for (b, g) in self.stem.iter_mut().zip(&parts) {
            let gi = b.backward(g)?;
            match gx.as_mut() {
                Some(acc) => add_into(acc, &gi),
                None => gx = Some(gi),
            }
        }
        Ok(gx.expect("at least one stem branch"))
    }

    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        for b in &self.stem {
            b.visit_params(f);
        }
        for l in &self.layers {
            l.visit_params(f);
        }
        self.fusion.visit_params(f);
        self.attention_b.visit_params(f);
        self.classifier.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        for b in &mut self.stem {
            b.visit_params_mut(f);
        }
        for l in &mut self.layers {
            l.visit_params_mut(f);
        }
        self.fusion.visit_params_mut(f);
        self.attention_b.visit_params_mut(f);
        self.classifier.visit_params_mut(f);
    }

    fn visit_bn_mut(&mut self, f: &mut dyn FnMut(&mut BatchNorm<T>)) {
        for b in &mut self.stem {
            b.visit_bn_mut(f);
        }
        for l in &mut self.layers {
            l.visit_bn_mut(f);
        }
        self.fusion.visit_bn_mut(f);
        self.attention_b.visit_bn_mut(f);
    }

    fn visit_bn(&self, f: &mut dyn FnMut(&BatchNorm<T>)) {
        for b in &self.stem {
            b.visit_bn(f);
        }
        for l in &self.layers {
            l.visit_bn(f);
        }
        self.fusion.visit_bn(f);
        self.attention_b.visit_bn(f);
    }

    fn clear_cache(&mut self) {
        self.cache = None;
        for b in &mut self.stem {
            b.clear_cache();
        }
        for l in &mut self.layers {
            l.clear_cache();
        }
        self.fusion.clear_cache();
        self.attention_b.clear_cache();
        self.classifier.clear_cache();
    }
}

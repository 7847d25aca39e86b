//! Channel-width arithmetic. Every fractional width is floored.

use super::ArchHyperParams;
use crate::error::Result;

/// Slack absorbed before flooring so that products of decimal factors such
/// as `0.7·3` do not drop a whole channel to representation error.
const FLOOR_SLACK: f64 = 1e-9;

pub(crate) fn floor_width(x: f64) -> usize {
    (x + FLOOR_SLACK).floor().max(0.0) as usize
}

/// Offset added to the compression factor: `p(p+1)/20`.
pub fn alpha(p: usize) -> f64 {
    0.5 * (p * (p + 1)) as f64 / 10.0
}

/// `floor(c_in / (t + alpha(p)))`, never less than 1.
pub fn bottleneck_width(c_in: usize, t: f64, p: usize) -> usize {
    bottleneck_with(c_in, t, p, floor_width)
}

fn bottleneck_with(c_in: usize, t: f64, p: usize, floor: fn(f64) -> usize) -> usize {
    let w = floor(c_in as f64 / (t + alpha(p)));
    if w == 0 {
        log::warn!("bottleneck width for c_in={c_in}, t={t}, p={p} floors to 0; clamped to 1");
        1
    } else {
        w
    }
}

fn at_least_one(w: usize) -> usize {
    w.max(1)
}

/// One visual layer: `p` receptors of `bottleneck → growth` on a dense input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerPlan {
    /// Width of the dense concatenation consumed by every receptor.
    pub input: usize,
    pub bottleneck: usize,
    pub growth: usize,
    /// Dense width after this layer: `input + p·growth`.
    pub output: usize,
}

/// Every channel width of a configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelPlan {
    pub p: usize,
    /// Width of both stem convolutions, per branch.
    pub stem_width: usize,
    /// Stem attention output width per branch (`k0/p`).
    pub attn_a_width: usize,
    pub attn_a_reduction: usize,
    /// `C0`, the concatenated stem output.
    pub c0: usize,
    pub layers: [LayerPlan; 3],
    pub fusion_bottleneck: usize,
    /// `C4`, fusion receptor output.
    pub c4: usize,
    /// `C5`, final attention output and classifier input.
    pub c5: usize,
    pub attn_b_reduction: usize,
    pub num_classes: usize,
}

impl ChannelPlan {
    pub fn dense_widths(&self) -> [usize; 4] {
        [
            self.c0,
            self.layers[0].output,
            self.layers[1].output,
            self.layers[2].output,
        ]
    }
}

pub fn channel_plan(hp: &ArchHyperParams) -> Result<ChannelPlan> {
    channel_plan_with(hp, floor_width)
}

/// [`channel_plan`] with a substitute rounding rule for fractional widths.
pub fn channel_plan_with(hp: &ArchHyperParams, floor: fn(f64) -> usize) -> Result<ChannelPlan> {
    hp.validate()?;
    let p = hp.p;
    let [k0, k1, k2, k3] = hp.k;
    let stem_width = at_least_one(floor(k0 as f64 / (hp.a1 * p as f64)));
    let attn_a_width = k0 / p;
    let attn_a_reduction = at_least_one(floor(attn_a_width as f64 / 3.0));

    let mut dense = k0;
    let mut layers = [LayerPlan {
        input: 0,
        bottleneck: 0,
        growth: 0,
        output: 0,
    }; 3];
    for (plan, k) in layers.iter_mut().zip([k1, k2, k3]) {
        *plan = LayerPlan {
            input: dense,
            bottleneck: bottleneck_with(dense, hp.t, p, floor),
            growth: k / p,
            output: dense + k,
        };
        dense += k;
    }
    let fusion_bottleneck = bottleneck_with(dense, hp.t, p, floor);
    let c4 = at_least_one(dense / 2);
    let c5 = at_least_one(floor(hp.a2 * c4 as f64));
    let attn_b_reduction = at_least_one(c5 / 3);
    Ok(ChannelPlan {
        p,
        stem_width,
        attn_a_width,
        attn_a_reduction,
        c0: k0,
        layers,
        fusion_bottleneck,
        c4,
        c5,
        attn_b_reduction,
        num_classes: hp.num_classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn alpha_values() {
        assert!((alpha(1) - 0.1).abs() < 1e-15);
        assert!((alpha(2) - 0.3).abs() < 1e-15);
        assert!((alpha(3) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn bottleneck_cells() {
        assert_eq!(bottleneck_width(84, 1.7, 1), 46);
        assert_eq!(bottleneck_width(318, 1.5, 3), 151);
        assert_eq!(bottleneck_width(510, 1.5, 1), 318);
        assert_eq!(bottleneck_width(1, 5.0, 1), 1);
    }

    #[test]
    fn tiny_plan() {
        let plan = channel_plan(&ArchHyperParams::preset("tiny").unwrap()).unwrap();
        assert_eq!(plan.stem_width, 84);
        assert_eq!((plan.attn_a_width, plan.attn_a_reduction), (84, 28));
        assert_eq!(plan.dense_widths(), [84, 102, 126, 156]);
        let b: Vec<_> = plan.layers.iter().map(|l| l.bottleneck).collect();
        assert_eq!(b, [46, 56, 70]);
        assert_eq!((plan.fusion_bottleneck, plan.c4), (86, 78));
        assert_eq!((plan.c5, plan.attn_b_reduction), (62, 20));
    }

    #[test]
    fn mv3_plan() {
        let plan = channel_plan(&ArchHyperParams::preset("mv3").unwrap()).unwrap();
        assert_eq!(plan.stem_width, 40);
        assert_eq!((plan.attn_a_width, plan.attn_a_reduction), (28, 9));
        assert_eq!(plan.dense_widths(), [84, 180, 318, 510]);
        let bg: Vec<_> = plan
            .layers
            .iter()
            .map(|l| (l.bottleneck, l.growth))
            .collect();
        assert_eq!(bg, [(40, 32), (85, 46), (151, 64)]);
        assert_eq!(
            (
                plan.fusion_bottleneck,
                plan.c4,
                plan.c5,
                plan.attn_b_reduction
            ),
            (242, 255, 153, 51)
        );
    }

    fn arb_hp() -> impl Strategy<Value = ArchHyperParams> {
        (
            1usize..=4,
            1usize..=40,
            1usize..=40,
            1usize..=40,
            1usize..=40,
            0.2f64..=1.0,
            0.2f64..=1.0,
            0.5f64..=3.0,
        )
            .prop_map(|(p, m0, m1, m2, m3, a1, a2, t)| {
                let mut hp = ArchHyperParams::preset("tiny").unwrap();
                hp.name = "custom".into();
                hp.p = p;
                hp.k = [m0 * p, m1 * p, m2 * p, m3 * p];
                hp.a1 = a1;
                hp.a2 = a2;
                hp.t = t;
                hp
            })
    }

    proptest! {
        #[test]
        fn dense_accumulation(hp in arb_hp()) {
            let plan = channel_plan(&hp).unwrap();
            let widths = plan.dense_widths();
            for l in 0..3 {
                prop_assert_eq!(widths[l + 1] - widths[l], hp.k[l + 1]);
                prop_assert_eq!(plan.layers[l].growth * hp.p, hp.k[l + 1]);
                prop_assert_eq!(plan.layers[l].input, widths[l]);
            }
            prop_assert_eq!(plan.c4, (widths[3] / 2).max(1));
            prop_assert!(plan.stem_width >= 1 && plan.attn_a_reduction >= 1);
            prop_assert!(plan.fusion_bottleneck >= 1 && plan.c5 >= 1 && plan.attn_b_reduction >= 1);
            prop_assert!(plan.layers.iter().all(|l| l.bottleneck >= 1 && l.growth >= 1));
        }
    }
}

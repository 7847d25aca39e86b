use crate::arch::{channel_plan, ArchHyperParams, ChannelPlan, PRESETS};
use crate::error::Result;

use super::{Check, SuiteReport};

/// Every concrete width of the reference architecture table, in table order.
pub fn golden_cells(preset: &str) -> Vec<(&'static str, usize)> {
    let v: &[(&str, usize)] = match preset {
        "tiny" => &[
            ("stem.width", 84),
            ("attn_a.width", 84),
            ("attn_a.reduction", 28),
            ("c0", 84),
            ("layer1.bottleneck", 46),
            ("layer1.growth", 18),
            ("layer1.output", 102),
            ("layer2.bottleneck", 56),
            ("layer2.growth", 24),
            ("layer2.output", 126),
            ("layer3.bottleneck", 70),
            ("layer3.growth", 30),
            ("layer3.output", 156),
            ("fusion.bottleneck", 86),
            ("c4", 78),
            ("c5", 62),
            ("attn_b.reduction", 20),
            ("classes", 4),
        ],
        "mv1" => &[
            ("stem.width", 120),
            ("attn_a.width", 84),
            ("attn_a.reduction", 28),
            ("c0", 84),
            ("layer1.bottleneck", 52),
            ("layer1.growth", 96),
            ("layer1.output", 180),
            ("layer2.bottleneck", 112),
            ("layer2.growth", 138),
            ("layer2.output", 318),
            ("layer3.bottleneck", 198),
            ("layer3.growth", 192),
            ("layer3.output", 510),
            ("fusion.bottleneck", 318),
            ("c4", 255),
            ("c5", 153),
            ("attn_b.reduction", 51),
            ("classes", 4),
        ],
        "mv2" => &[
            ("stem.width", 60),
            ("attn_a.width", 42),
            ("attn_a.reduction", 14),
            ("c0", 84),
            ("layer1.bottleneck", 46),
            ("layer1.growth", 48),
            ("layer1.output", 180),
            ("layer2.bottleneck", 100),
            ("layer2.growth", 69),
            ("layer2.output", 318),
            ("layer3.bottleneck", 176),
            ("layer3.growth", 96),
            ("layer3.output", 510),
            ("fusion.bottleneck", 283),
            ("c4", 255),
            ("c5", 153),
            ("attn_b.reduction", 51),
            ("classes", 4),
        ],
        "mv3" => &[
            ("stem.width", 40),
            ("attn_a.width", 28),
            ("attn_a.reduction", 9),
            ("c0", 84),
            ("layer1.bottleneck", 40),
            ("layer1.growth", 32),
            ("layer1.output", 180),
            ("layer2.bottleneck", 85),
            // k2/p = 138/3
            ("layer2.growth", 46),
            ("layer2.output", 318),
            ("layer3.bottleneck", 151),
            ("layer3.growth", 64),
            ("layer3.output", 510),
            ("fusion.bottleneck", 242),
            ("c4", 255),
            ("c5", 153),
            ("attn_b.reduction", 51),
            ("classes", 4),
        ],
        _ => &[],
    };
    v.to_vec()
}

/// The same cells read off a computed plan.
pub fn plan_cells(plan: &ChannelPlan) -> Vec<(&'static str, usize)> {
    let l = &plan.layers;
    vec![
        ("stem.width", plan.stem_width),
        ("attn_a.width", plan.attn_a_width),
        ("attn_a.reduction", plan.attn_a_reduction),
        ("c0", plan.c0),
        ("layer1.bottleneck", l[0].bottleneck),
        ("layer1.growth", l[0].growth),
        ("layer1.output", l[0].output),
        ("layer2.bottleneck", l[1].bottleneck),
        ("layer2.growth", l[1].growth),
        ("layer2.output", l[1].output),
        ("layer3.bottleneck", l[2].bottleneck),
        ("layer3.growth", l[2].growth),
        ("layer3.output", l[2].output),
        ("fusion.bottleneck", plan.fusion_bottleneck),
        ("c4", plan.c4),
        ("c5", plan.c5),
        ("attn_b.reduction", plan.attn_b_reduction),
        ("classes", plan.num_classes),
    ]
}

pub fn plan_suite() -> SuiteReport {
    plan_suite_with(&channel_plan)
}

/// Compares `planner` against the golden cells of every preset. Each
/// preset's check names its first divergent cell.
pub fn plan_suite_with(planner: &dyn Fn(&ArchHyperParams) -> Result<ChannelPlan>) -> SuiteReport {
    let mut checks = Vec::new();
    for preset in PRESETS {
        let golden = golden_cells(preset);
        let hp = ArchHyperParams::preset(preset).expect("built-in preset");
        let check = match planner(&hp) {
            Err(e) => Check::new(preset, false, format!("planner failed: {e}")),
            Ok(plan) => {
                let got = plan_cells(&plan);
                match golden.iter().zip(&got).find(|(g, a)| g.1 != a.1) {
                    Some((g, a)) => Check::new(
                        preset,
                        false,
                        format!(
                            "first divergent cell {}: expected {}, got {}",
                            g.0, g.1, a.1
                        ),
                    ),
                    None => Check::new(preset, true, format!("{} cells match", golden.len())),
                }
            }
        };
        checks.push(check);
    }
    SuiteReport {
        suite: "plan",
        checks,
    }
}

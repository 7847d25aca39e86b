use crate::arch::{build_model, count_parameters, ArchHyperParams, ChannelPlan, PRESETS};

use super::{Check, SuiteReport};

/// Model sizes in KB quoted for the four presets.
pub const REPORTED_KB: [(&str, usize); 4] =
    [("tiny", 479), ("mv1", 6224), ("mv2", 5870), ("mv3", 5347)];

fn bn_prelu(c: usize) -> usize {
    3 * c
}

fn conv(cin: usize, cout: usize, k: usize) -> usize {
    cin * cout * k * k + cout
}

fn gate(c: usize, r: usize) -> usize {
    (c * r + r) + r + (r * c + c)
}

fn attention(cin: usize, cout: usize, r: usize, attention: bool) -> usize {
    bn_prelu(cin) + conv(cin, cout, 1) + if attention { gate(cout, r) } else { 0 }
}

fn receptor(cin: usize, b: usize, g: usize) -> usize {
    bn_prelu(cin) + conv(cin, b, 1) + bn_prelu(b) + conv(b, g, 3)
}

/// Closed-form learnable-scalar count from the widths alone.
pub fn enumerate_parameters(plan: &ChannelPlan, with_attention: bool) -> usize {
    let w = plan.stem_width;
    let stem_branch = 2 * 3
        + conv(3, w, 3)
        + bn_prelu(w)
        + conv(w, w, 1)
        + attention(w, plan.attn_a_width, plan.attn_a_reduction, with_attention);
    let layers: usize = plan
        .layers
        .iter()
        .map(|l| plan.p * receptor(l.input, l.bottleneck, l.growth))
        .sum();
    let fusion = receptor(plan.layers[2].output, plan.fusion_bottleneck, plan.c4);
    let attn_b = attention(plan.c4, plan.c5, plan.attn_b_reduction, with_attention);
    let classifier = plan.c5 * plan.num_classes + plan.num_classes;
    plan.p * stem_branch + layers + fusion + attn_b + classifier
}

/// Graph count vs closed form for every preset (with and without gates),
/// the size ordering, and computed f32 KB next to the quoted sizes.
pub fn params_suite() -> SuiteReport {
    let mut checks = Vec::new();
    let mut totals = Vec::new();
    for preset in PRESETS {
        for attn in [true, false] {
            let mut hp = ArchHyperParams::preset(preset).expect("built-in preset");
            if !attn {
                hp = hp.without_attention();
            }
            let model = build_model::<f32>(&hp).expect("valid preset");
            let counted = count_parameters(&model);
            let oracle = enumerate_parameters(model.plan(), attn);
            checks.push(Check::new(
                format!("{} count", hp.display_name()),
                counted.total == oracle,
                format!("graph {} vs enumeration {oracle}", counted.total),
            ));
            if attn {
                totals.push((preset, counted.total));
            }
        }
    }
    let of = |name: &str| {
        totals
            .iter()
            .find(|(p, _)| *p == name)
            .map(|(_, n)| *n)
            .unwrap_or(0)
    };
    let (tiny, mv1, mv2, mv3) = (of("tiny"), of("mv1"), of("mv2"), of("mv3"));
    checks.push(Check::new(
        "ordering tiny < mv3 < mv2 < mv1",
        tiny < mv3 && mv3 < mv2 && mv2 < mv1,
        format!("{tiny} < {mv3} < {mv2} < {mv1}"),
    ));
    for (preset, kb) in REPORTED_KB {
        let total = of(preset);
        checks.push(Check::new(
            format!("{preset} size"),
            true,
            format!(
                "{total} params = {:.1} KB as f32 (quoted {kb} KB, informational)",
                total as f64 * 4.0 / 1024.0
            ),
        ));
    }
    SuiteReport {
        suite: "params",
        checks,
    }
}

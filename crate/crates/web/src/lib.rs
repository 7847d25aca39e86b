//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export is a thin wrapper over a pure function that the native
//! tests call directly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use mvanet::arch::{build_model, count_parameters, mean_map_u8, ArchHyperParams, Model};
use mvanet::data::{
    render_frame, resize_bilinear, rgb_to_tensor, ClassLabel, JujubeSpec, NormStats,
};
use mvanet::train::he_init;

#[derive(Debug, Serialize)]
pub struct Stage {
    pub stage: String,
    pub output: String,
    pub units: String,
}

#[derive(Debug, Serialize)]
pub struct PlanView {
    pub name: String,
    pub stages: Vec<Stage>,
    pub parameters: usize,
    pub kilobytes: f64,
    pub blocks: Vec<(String, usize)>,
}

fn hparams(
    arch: &str,
    input_size: usize,
    attention: bool,
    overrides: &str,
) -> Result<ArchHyperParams, String> {
    let mut hp = ArchHyperParams::preset(arch)
        .map_err(|e| e.to_string())?
        .with_input(input_size);
    if !attention {
        hp = hp.without_attention();
    }
    for o in overrides.split([',', ' ']).filter(|s| !s.is_empty()) {
        hp.apply_override(o).map_err(|e| e.to_string())?;
    }
    hp.validate().map_err(|e| e.to_string())?;
    Ok(hp)
}

/// Stage table and parameter breakdown for a preset plus overrides like `k3=32`.
pub fn plan_view(
    arch: &str,
    input_size: usize,
    attention: bool,
    overrides: &str,
) -> Result<PlanView, String> {
    let hp = hparams(arch, input_size, attention, overrides)?;
    let model: Model<f32> = build_model(&hp).map_err(|e| e.to_string())?;
    let p = model.plan();
    let (h, w) = hp.input_hw;
    let gate = |c: usize, r: usize| {
        if hp.attention {
            format!(", gap, fc [{c}, {r}, {c}]")
        } else {
            String::new()
        }
    };
    let kind = if hp.attention {
        "attention"
    } else {
        "transition"
    };
    let mut stages = vec![
        Stage {
            stage: "simple visual layer".into(),
            output: format!("{h}x{w}, {} x{}", p.stem_width, p.p),
            units: format!("[3x3 {0}, 1x1 {0}] x{1}", p.stem_width, p.p),
        },
        Stage {
            stage: format!("{kind} layer A"),
            output: format!("{}x{}, {}", h / 2, w / 2, p.c0),
            units: format!(
                "[1x1 {}{}, 2x2 pool] x{}",
                p.attn_a_width,
                gate(p.attn_a_width, p.attn_a_reduction),
                p.p
            ),
        },
    ];
    for (i, l) in p.layers.iter().enumerate() {
        stages.push(Stage {
            stage: format!("visual layer {}", i + 1),
            output: format!("{}x{}, {}", h / 2, w / 2, l.output),
            units: format!("[1x1 {}, 3x3 {}] x{}", l.bottleneck, l.growth, p.p),
        });
    }
    stages.push(Stage {
        stage: "visual receptor".into(),
        output: format!("{}x{}, {}", h / 2, w / 2, p.c4),
        units: format!("[1x1 {}, 3x3 {}]", p.fusion_bottleneck, p.c4),
    });
    stages.push(Stage {
        stage: format!("{kind} layer B"),
        output: format!("{}x{}, {}", h / 4, w / 4, p.c5),
        units: format!("[1x1 {}{}, 2x2 pool]", p.c5, gate(p.c5, p.attn_b_reduction)),
    });
    stages.push(Stage {
        stage: "classification layer".into(),
        output: format!("1x1, {}", p.num_classes),
        units: format!("[gap, fc [{}, {}]]", p.c5, p.num_classes),
    });
    let count = count_parameters(&model);
    Ok(PlanView {
        name: hp.display_name(),
        stages,
        parameters: count.total,
        kilobytes: count.bytes_f32 as f64 / 1024.0,
        blocks: count.blocks,
    })
}

fn spec_for(class: u32, seed: u64) -> Result<JujubeSpec, String> {
    let class = ClassLabel::from_index(class as usize).map_err(|e| e.to_string())?;
    Ok(JujubeSpec::random(
        class,
        &mut ChaCha8Rng::seed_from_u64(seed),
    ))
}

/// One synthetic frame as RGBA bytes, `size`×`size`.
pub fn jujube_rgba(class: u32, seed: u64, frame: u32, size: u32) -> Result<Vec<u8>, String> {
    if !(8..=512).contains(&size) {
        return Err(format!("size {size} outside 8..=512"));
    }
    let rgb = render_frame(&spec_for(class, seed)?, frame as usize, size as usize);
    Ok(rgb
        .chunks_exact(3)
        .flat_map(|p| [p[0], p[1], p[2], 255])
        .collect())
}

/// Mean activation maps of a freshly initialized tiny network on one frame:
/// stem, the three visual layers and the fusion receptor, each 16×16,
/// returned as one 80×16 grayscale strip in RGBA.
pub fn feature_strip(class: u32, seed: u64, frame: u32, init_seed: u64) -> Result<Vec<u8>, String> {
    const SIDE: usize = 32;
    let rgb = render_frame(&spec_for(class, seed)?, frame as usize, 64);
    let img =
        resize_bilinear(&rgb_to_tensor(&rgb, 64, 64), SIDE, SIDE).map_err(|e| e.to_string())?;
    let norm = NormStats {
        mean: [0.25, 0.08, 0.07],
        std: [0.25, 0.08, 0.07],
    };
    let hp = ArchHyperParams::preset("tiny").map_err(|e| e.to_string())?;
    let mut model: Model<f32> = build_model(&hp).map_err(|e| e.to_string())?;
    he_init(&mut model, init_seed);
    let trace = model
        .trace(&norm.normalize(&img))
        .map_err(|e| e.to_string())?;
    let mut maps = vec![mean_map_u8(&trace.x0)];
    for layer in &trace.receptors {
        maps.push(mean_map_u8(&layer[0]));
    }
    maps.push(mean_map_u8(&trace.fusion));
    let (h, w) = (maps[0].0, maps[0].1);
    let width = w * maps.len();
    let mut out = vec![0u8; width * h * 4];
    for (k, (_, _, px)) in maps.iter().enumerate() {
        for y in 0..h {
            for x in 0..w {
                let v = px[y * w + x];
                let o = (y * width + k * w + x) * 4;
                out[o..o + 4].copy_from_slice(&[v, v, v, 255]);
            }
        }
    }
    Ok(out)
}

#[wasm_bindgen(js_name = planJson)]
pub fn plan_json(
    arch: &str,
    input_size: u32,
    attention: bool,
    overrides: &str,
) -> Result<String, JsValue> {
    let view = plan_view(arch, input_size as usize, attention, overrides)
        .map_err(|e| JsValue::from_str(&e))?;
    serde_json::to_string(&view).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = renderJujube)]
pub fn render_jujube(class: u32, seed: u32, frame: u32, size: u32) -> Result<Vec<u8>, JsValue> {
    jujube_rgba(class, seed as u64, frame, size).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = featureStrip)]
pub fn feature_strip_js(
    class: u32,
    seed: u32,
    frame: u32,
    init_seed: u32,
) -> Result<Vec<u8>, JsValue> {
    feature_strip(class, seed as u64, frame, init_seed as u64).map_err(|e| JsValue::from_str(&e))
}

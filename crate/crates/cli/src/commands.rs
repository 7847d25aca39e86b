use std::fmt;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use mvanet::arch::{build_model, count_parameters, dump_activations, ArchHyperParams, Model};
use mvanet::data::{
    load_dataset, read_rgb, resize_bilinear, save_weights, synth_generate, Checkpoint, Dataset,
    NormStats,
};
use mvanet::eval::{
    benchmark, evaluate, grade_all, jujube_accuracy, verdicts_csv, AggregationRule, BenchReport,
};
use mvanet::train::{
    he_init, log_csv, lr_at_epoch, train_with, TrainConfig, LOG_HEADER, VALIDATION_FRACTION,
};
use mvanet::verify::{gradcheck_suite, params_suite, plan_suite, SuiteReport};

use crate::args::{
    ArchSpec, BenchArgs, Command, DataArgs, DumpArgs, EvalArgs, GradeArgs, Rule, Suite, SynthArgs,
    TrainArgs,
};

/// An error caused by the invocation rather than by the work itself.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Runs one subcommand. `Ok(false)` means it ran but reported failures.
pub fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Arch(a) => cmd_arch(&a.spec),
        Command::Synth(a) => cmd_synth(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Grade(a) => cmd_grade(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Verify(a) => cmd_verify(a.suite, a.seed),
        Command::Dump(a) => cmd_dump(&a),
    }
}

fn hparams(spec: &ArchSpec) -> Result<ArchHyperParams> {
    let mut hp = ArchHyperParams::preset(&spec.arch)
        .map_err(|e| Usage(e.to_string()))?
        .with_input(spec.input_size);
    if spec.no_attention {
        hp = hp.without_attention();
    }
    for o in &spec.overrides {
        hp.apply_override(o).map_err(|e| Usage(e.to_string()))?;
    }
    hp.validate().map_err(|e| Usage(e.to_string()))?;
    Ok(hp)
}

fn describe(hp: &ArchHyperParams) -> Result<String> {
    use std::fmt::Write as _;
    let model: Model<f32> = build_model(hp)?;
    let plan = model.plan();
    let (h, w) = hp.input_hw;
    let (h2, w2, h4, w4) = (h / 2, w / 2, h / 4, w / 4);
    let gate = |c: usize, r: usize| {
        if hp.attention {
            format!(", global avg pool, fc [{c}, {r}, {c}]")
        } else {
            String::new()
        }
    };
    let attn = if hp.attention {
        "attention"
    } else {
        "transition"
    };
    let mut s = String::new();
    writeln!(s, "{hp}")?;
    writeln!(s, "{:<22} {:<16} units", "stage", "output")?;
    let row = |s: &mut String, stage: &str, out: String, units: String| {
        writeln!(s, "{stage:<22} {out:<16} {units}")
    };
    row(
        &mut s,
        "simple visual layer",
        format!("{h}x{w}, {} x{}", plan.stem_width, plan.p),
        format!("[3x3 {0} conv, 1x1 {0} conv] x{1}", plan.stem_width, plan.p),
    )?;
    row(
        &mut s,
        &format!("{attn} layer A"),
        format!("{h2}x{w2}, {}", plan.c0),
        format!(
            "[1x1 {} conv{}, 2x2 avg pool] x{}",
            plan.attn_a_width,
            gate(plan.attn_a_width, plan.attn_a_reduction),
            plan.p
        ),
    )?;
    for (i, l) in plan.layers.iter().enumerate() {
        row(
            &mut s,
            &format!("visual layer {}", i + 1),
            format!("{h2}x{w2}, {}", l.output),
            format!(
                "[1x1 {} conv, 3x3 {} conv] x{}",
                l.bottleneck, l.growth, plan.p
            ),
        )?;
    }
    row(
        &mut s,
        "visual receptor",
        format!("{h2}x{w2}, {}", plan.c4),
        format!(
            "[1x1 {} conv, 3x3 {} conv] x1",
            plan.fusion_bottleneck, plan.c4
        ),
    )?;
    row(
        &mut s,
        &format!("{attn} layer B"),
        format!("{h4}x{w4}, {}", plan.c5),
        format!(
            "[1x1 {} conv{}, 2x2 avg pool] x1",
            plan.c5,
            gate(plan.c5, plan.attn_b_reduction)
        ),
    )?;
    row(
        &mut s,
        "classification layer",
        format!("1x1, {}", plan.num_classes),
        format!(
            "[global avg pool, fc [{}, {}]] x1",
            plan.c5, plan.num_classes
        ),
    )?;
    let count = count_parameters(&model);
    writeln!(
        s,
        "parameters: {} ({:.1} KB as f32)",
        count.total,
        count.bytes_f32 as f64 / 1024.0
    )?;
    for (block, n) in &count.blocks {
        writeln!(s, "  {block:<12} {n}")?;
    }
    Ok(s)
}

fn cmd_arch(spec: &ArchSpec) -> Result<bool> {
    print!("{}", describe(&hparams(spec)?)?);
    Ok(true)
}

fn cmd_synth(a: &SynthArgs) -> Result<bool> {
    let r = synth_generate(&a.out, a.train, a.test, a.seed, a.size)
        .with_context(|| format!("generating into {}", a.out.display()))?;
    println!("wrote {} images", r.images);
    println!(
        "{}: {} jujubes, per class {:?}",
        r.train_manifest.display(),
        a.train,
        r.train_counts
    );
    println!(
        "{}: {} jujubes, per class {:?}",
        r.test_manifest.display(),
        a.test,
        r.test_counts
    );
    Ok(true)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "weights".into());
    path.with_file_name(format!("{stem}{suffix}"))
}

fn cmd_train(a: &TrainArgs) -> Result<bool> {
    let hp = hparams(&a.spec)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        base_lr: a.lr,
        momentum: a.momentum,
        weight_decay: a.weight_decay,
        seed: a.seed,
        augment: !a.no_augment,
        ..Default::default()
    };
    cfg.validate().map_err(|e| Usage(e.to_string()))?;
    let drops: Vec<String> = cfg
        .lr_breakpoints()
        .iter()
        .filter(|&&e| e < cfg.epochs)
        .map(|&e| format!("epoch {e} -> {}", lr_at_epoch(&cfg, e)))
        .collect();
    let drops = if drops.is_empty() {
        "none".to_string()
    } else {
        drops.join(", ")
    };
    println!(
        "# lr schedule: {} from epoch 0; drops x{} at {drops}",
        cfg.base_lr, cfg.lr_factor
    );

    let manifest = a.data.join("train.csv");
    let raw = load_dataset(&manifest, hp.input_hw)
        .with_context(|| format!("loading {}", manifest.display()))?;
    let (mut train_set, mut val_set) = raw.split_holdout(VALIDATION_FRACTION, a.seed);
    let norm = NormStats::compute(&train_set)?;
    norm.normalize_dataset(&mut train_set);
    norm.normalize_dataset(&mut val_set);
    println!(
        "# {} training / {} validation images; steps per epoch {}",
        train_set.len(),
        val_set.len(),
        train_set.len().div_ceil(cfg.batch_size)
    );
    println!("# normalization mean {:?} std {:?}", norm.mean, norm.std);

    let mut model: Model<f32> = build_model(&hp)?;
    he_init(&mut model, a.seed);
    println!("{LOG_HEADER}");
    let out = train_with(model, &train_set, &val_set, &cfg, |e, _| {
        println!("{}", e.csv_row());
        ControlFlow::Continue(())
    })?;
    let best_path = sibling(&a.out, ".best.mvan");
    let log_path = a.log.clone().unwrap_or_else(|| sibling(&a.out, ".log.csv"));
    save_weights(&out.model, &norm, &a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    save_weights(&out.best, &norm, &best_path)
        .with_context(|| format!("writing {}", best_path.display()))?;
    std::fs::write(&log_path, log_csv(&out.log))
        .with_context(|| format!("writing {}", log_path.display()))?;
    println!("final weights: {}", a.out.display());
    println!(
        "best weights (epoch {}): {}",
        out.best_epoch,
        best_path.display()
    );
    println!("log: {}", log_path.display());
    Ok(true)
}

fn load_checkpoint(path: &Path, arch: Option<&str>) -> Result<Checkpoint> {
    let ck = mvanet::data::load_weights(path)
        .with_context(|| format!("loading weights {}", path.display()))?;
    if let Some(a) = arch {
        if ck.model.hparams().name != a {
            bail!(
                "weights {} hold `{}`, but --arch {a} was given",
                path.display(),
                ck.model.hparams().name
            );
        }
    }
    Ok(ck)
}

fn load_split(d: &DataArgs) -> Result<(Checkpoint, Dataset)> {
    let ck = load_checkpoint(&d.weights, d.arch.as_deref())?;
    let manifest = d.data.join(format!("{}.csv", d.split));
    let mut data = load_dataset(&manifest, ck.model.hparams().input_hw)
        .with_context(|| format!("loading {}", manifest.display()))?;
    ck.norm.normalize_dataset(&mut data);
    println!(
        "# {}: {} images, model {}",
        manifest.display(),
        data.len(),
        ck.model.hparams().display_name()
    );
    Ok((ck, data))
}

fn cmd_eval(a: &EvalArgs) -> Result<bool> {
    let (ck, data) = load_split(&a.data)?;
    let report = evaluate(&ck.model, &data)?;
    print!("{}", report.confusion);
    print!("{}", report.confusion.to_table());
    if let Some(p) = &a.data.csv {
        std::fs::write(p, report.confusion.to_csv())
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(true)
}

fn cmd_grade(a: &GradeArgs) -> Result<bool> {
    let (ck, data) = load_split(&a.data)?;
    let groups = data.groups()?;
    if groups.is_empty() {
        bail!(
            "no jujube groups in {} (rows need jujube_id and frame_index)",
            a.data.split
        );
    }
    let rule = match a.rule {
        Rule::Sum => AggregationRule::ScoreSum,
        Rule::Majority => AggregationRule::MajorityVote,
    };
    let verdicts = grade_all(&ck.model, &groups, rule)?;
    let csv = verdicts_csv(&verdicts);
    print!("{csv}");
    println!(
        "jujube accuracy {:.2}% ({} jujubes, rule {:?})",
        100.0 * jujube_accuracy(&verdicts),
        verdicts.len(),
        rule
    );
    if let Some(p) = &a.data.csv {
        std::fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(true)
}

fn cmd_bench(a: &BenchArgs) -> Result<bool> {
    let model = match &a.weights {
        Some(w) => load_checkpoint(w, a.arch.as_deref())?.model,
        None => {
            let spec = ArchSpec {
                arch: a.arch.clone().unwrap_or_else(|| "tiny".into()),
                input_size: a.input_size,
                no_attention: a.no_attention,
                overrides: a.overrides.clone(),
            };
            let mut m: Model<f32> = build_model(&hparams(&spec)?)?;
            he_init(&mut m, 0);
            m
        }
    };
    let report = benchmark(&model, a.batch, a.iters, a.warmup).map_err(|e| Usage(e.to_string()))?;
    println!("{report}");
    println!("{}", BenchReport::CSV_HEADER);
    println!("{}", report.csv_row());
    if let Some(p) = &a.csv {
        let fresh = !p.exists();
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(p)
            .with_context(|| format!("opening {}", p.display()))?;
        if fresh {
            writeln!(f, "{}", BenchReport::CSV_HEADER)?;
        }
        writeln!(f, "{}", report.csv_row())?;
    }
    Ok(true)
}

fn cmd_verify(suite: Suite, seed: u64) -> Result<bool> {
    let mut reports: Vec<SuiteReport> = Vec::new();
    if matches!(suite, Suite::Plan | Suite::All) {
        reports.push(plan_suite());
    }
    if matches!(suite, Suite::Params | Suite::All) {
        reports.push(params_suite());
    }
    if matches!(suite, Suite::Gradcheck | Suite::All) {
        reports.push(gradcheck_suite(seed));
    }
    for r in &reports {
        println!("{r}");
    }
    Ok(reports.iter().all(SuiteReport::passed))
}

fn cmd_dump(a: &DumpArgs) -> Result<bool> {
    let ck = load_checkpoint(&a.weights, None)?;
    let (h, w) = ck.model.hparams().input_hw;
    let img = resize_bilinear(&read_rgb(&a.image)?, h, w)?;
    std::fs::create_dir_all(&a.out)?;
    let files = dump_activations(&ck.model, &ck.norm.normalize(&img), &a.out)?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(true)
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mvanet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvanet"))
        .args(args)
        .env_remove("MVANET_THREADS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(code(&mvanet(&["--help"])), 0);
    assert_eq!(code(&mvanet(&["frobnicate"])), 1);
    assert_eq!(code(&mvanet(&["arch", "--override", "k9=3"])), 1);
    assert_eq!(code(&mvanet(&["arch", "--arch", "mv9"])), 1);
    assert_eq!(code(&mvanet(&["bench", "--iters", "5"])), 1);
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = mvanet(&[
        "train",
        "--data",
        p(&dir.path().join("absent")),
        "--epochs",
        "1",
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("train.csv"));
}

#[test]
fn resolved_config_is_echoed_with_threads() {
    let o = mvanet(&["arch", "--arch", "tiny"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("# command=arch"), "{out}");
    assert!(out.contains("# arch=tiny"));
    assert!(out.contains("# input-size=32"));
    assert!(out.contains("# threads=1"));
    assert!(out.contains("MvANet-1-tiny"));

    let env = Command::new(env!("CARGO_BIN_EXE_mvanet"))
        .args(["arch"])
        .env("MVANET_THREADS", "3")
        .output()
        .unwrap();
    assert!(stdout(&env).contains("# threads=3"));
    let flag = Command::new(env!("CARGO_BIN_EXE_mvanet"))
        .args(["--threads", "2", "arch"])
        .env("MVANET_THREADS", "3")
        .output()
        .unwrap();
    assert!(stdout(&flag).contains("# threads=2"));
}

#[test]
fn config_file_sets_defaults_that_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(
        &cfg,
        "# preset\narch = mv2\ninput_size=96\nno_attention=true\n",
    )
    .unwrap();
    let out = stdout(&mvanet(&[
        "--config",
        p(&cfg),
        "arch",
        "--input-size",
        "32",
    ]));
    assert!(out.contains("# arch=mv2"), "{out}");
    assert!(out.contains("# input-size=32"), "{out}");
    assert!(out.contains("MvTNet-2"), "{out}");

    fs::write(&cfg, "epochs=3\n").unwrap();
    let o = mvanet(&["--config", p(&cfg), "arch"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown config key"));
}

#[test]
fn synth_writes_five_frames_per_jujube() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    let o = mvanet(&[
        "synth",
        "--out",
        p(&out),
        "--train",
        "400",
        "--test",
        "100",
        "--size",
        "16",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let count = |d: &str| {
        fs::read_dir(out.join(d))
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().unwrap() == "ppm")
            .count()
    };
    assert_eq!(count("train") + count("test"), 2500);
    assert_eq!(
        fs::read_to_string(out.join("train.csv"))
            .unwrap()
            .lines()
            .count(),
        2001
    );
}

#[test]
fn train_eval_grade_bench_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let weights = dir.path().join("w.mvan");
    assert_eq!(
        code(&mvanet(&[
            "synth",
            "--out",
            p(&data),
            "--train",
            "20",
            "--test",
            "6",
            "--size",
            "32"
        ])),
        0
    );

    let o = mvanet(&[
        "train",
        "--data",
        p(&data),
        "--input-size",
        "16",
        "--epochs",
        "1",
        "--batch",
        "16",
        "--out",
        p(&weights),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("epoch,lr,train_loss,train_acc,val_acc"));
    assert!(weights.is_file() && dir.path().join("w.best.mvan").is_file());
    let log = fs::read_to_string(dir.path().join("w.log.csv")).unwrap();
    assert_eq!(log.lines().count(), 2);
    assert!(log.lines().nth(1).unwrap().starts_with("0,0.1,"));

    let o = mvanet(&["eval", "--data", p(&data), "--weights", p(&weights)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("30 images"));

    let csv = dir.path().join("verdicts.csv");
    let o = mvanet(&[
        "grade",
        "--data",
        p(&data),
        "--weights",
        p(&weights),
        "--rule",
        "majority",
        "--csv",
        p(&csv),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 7);
    assert!(stdout(&o).contains("6 jujubes"));

    let o = mvanet(&[
        "eval",
        "--data",
        p(&data),
        "--weights",
        p(&weights),
        "--arch",
        "mv1",
    ]);
    assert_eq!(code(&o), 2);

    let bench_csv = dir.path().join("bench.csv");
    for _ in 0..2 {
        let args = [
            "bench",
            "--weights",
            p(&weights),
            "--iters",
            "10",
            "--warmup",
            "3",
            "--csv",
            p(&bench_csv),
        ];
        let o = mvanet(&args);
        assert_eq!(code(&o), 0);
        let out = stdout(&o);
        assert!(out.contains("PASS") || out.contains("FAIL"), "{out}");
    }
    assert_eq!(fs::read_to_string(&bench_csv).unwrap().lines().count(), 3);

    let maps = dir.path().join("maps");
    let o = mvanet(&[
        "dump",
        "--weights",
        p(&weights),
        "--image",
        p(&data.join("test/j00020_f0.ppm")),
        "--out",
        p(&maps),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_dir(&maps).unwrap().count() >= 4);
}

#[test]
fn verify_plan_suite_passes() {
    let o = mvanet(&["verify", "--suite", "plan"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("PASS"));
}

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use mvanet::arch::{build_model, ArchHyperParams};
use mvanet::data::{
    class_counts, decode_weights, encode_weights, load_dataset, synth_generate, ClassLabel,
    Dataset, Manifest, NormStats, NUM_CLASSES,
};
use mvanet::train::he_init;
use mvanet::{Error, Tensor};
use proptest::prelude::*;

fn synth(dir: &Path, train: usize, test: usize, seed: u64) -> (Dataset, Dataset) {
    synth_generate(dir, train, test, seed, 64).unwrap();
    (
        load_dataset(&dir.join("train.csv"), (64, 64)).unwrap(),
        load_dataset(&dir.join("test.csv"), (64, 64)).unwrap(),
    )
}

/// Mean intensity, gradient energy and the share of dark pixels enclosed by
/// the bright silhouette of one raw `[1,3,h,w]` image.
fn features(img: &Tensor<f32>) -> [f64; 3] {
    let (h, w) = (img.h(), img.w());
    let red = &img.sample(0)[..h * w];
    let mean = red.iter().map(|&v| v as f64).sum::<f64>() / (h * w) as f64;
    let mut energy = 0.0;
    for y in 0..h - 1 {
        for x in 0..w - 1 {
            let v = red[y * w + x] as f64;
            energy +=
                (v - red[y * w + x + 1] as f64).abs() + (v - red[(y + 1) * w + x] as f64).abs();
        }
    }
    let mut dark = 0usize;
    let mut inside = 0usize;
    for y in 0..h {
        let row = &red[y * w..(y + 1) * w];
        let bright: Vec<usize> = (0..w).filter(|&x| row[x] > 90.0).collect();
        if let (Some(&a), Some(&b)) = (bright.first(), bright.last()) {
            inside += b - a + 1;
            dark += (a..=b).filter(|&x| row[x] < 45.0).count();
        }
    }
    [
        mean,
        energy / (h * w) as f64,
        dark as f64 / inside.max(1) as f64,
    ]
}

/// Multinomial logistic regression by full-batch gradient descent.
struct Probe {
    mu: [f64; 3],
    sd: [f64; 3],
    w: [[f64; 4]; NUM_CLASSES],
}

impl Probe {
    fn fit(x: &[[f64; 3]], y: &[usize]) -> Self {
        let n = x.len() as f64;
        let mut mu = [0.0; 3];
        let mut sd = [0.0; 3];
        for j in 0..3 {
            mu[j] = x.iter().map(|r| r[j]).sum::<f64>() / n;
            sd[j] = (x.iter().map(|r| (r[j] - mu[j]).powi(2)).sum::<f64>() / n)
                .sqrt()
                .max(1e-9);
        }
        let mut p = Probe {
            mu,
            sd,
            w: [[0.0; 4]; NUM_CLASSES],
        };
        for _ in 0..3000 {
            let mut g = [[0.0; 4]; NUM_CLASSES];
            for (r, &label) in x.iter().zip(y) {
                let z = p.scaled(r);
                let prob = p.probs(&z);
                for c in 0..NUM_CLASSES {
                    let d = prob[c] - f64::from(c == label);
                    for j in 0..4 {
                        g[c][j] += d * z[j] / n;
                    }
                }
            }
            for c in 0..NUM_CLASSES {
                for j in 0..4 {
                    p.w[c][j] -= 1.0 * g[c][j];
                }
            }
        }
        p
    }

    fn scaled(&self, r: &[f64; 3]) -> [f64; 4] {
        [
            (r[0] - self.mu[0]) / self.sd[0],
            (r[1] - self.mu[1]) / self.sd[1],
            (r[2] - self.mu[2]) / self.sd[2],
            1.0,
        ]
    }

    fn probs(&self, z: &[f64; 4]) -> [f64; NUM_CLASSES] {
        let s = self
            .w
            .map(|w| w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>());
        let m = s.iter().cloned().fold(f64::MIN, f64::max);
        let e = s.map(|v| (v - m).exp());
        let t: f64 = e.iter().sum();
        e.map(|v| v / t)
    }

    fn predict(&self, r: &[f64; 3]) -> usize {
        let p = self.probs(&self.scaled(r));
        (0..NUM_CLASSES)
            .max_by(|&a, &b| p[a].total_cmp(&p[b]))
            .unwrap()
    }
}

#[test]
fn hand_features_separate_the_synthetic_classes() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = synth(dir.path(), 120, 40, 5);
    let fx = |d: &Dataset| {
        d.samples
            .iter()
            .map(|s| features(&s.image))
            .collect::<Vec<_>>()
    };
    let probe = Probe::fit(&fx(&train), &train.labels());
    let labels = test.labels();
    let hits = fx(&test)
        .iter()
        .zip(&labels)
        .filter(|(f, &l)| probe.predict(f) == l)
        .count();
    let acc = hits as f64 / labels.len() as f64;
    println!("linear probe accuracy {acc:.3} on {} images", labels.len());
    assert!(acc >= 0.90, "probe accuracy {acc}");
}

#[test]
fn synth_is_deterministic_in_seed() {
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    synth_generate(a.path(), 8, 4, 3, 32).unwrap();
    synth_generate(b.path(), 8, 4, 3, 32).unwrap();
    synth_generate(c.path(), 8, 4, 4, 32).unwrap();
    let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
    for f in [
        "train.csv",
        "test.csv",
        "train/j00000_f0.ppm",
        "test/j00011_f4.ppm",
    ] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
    assert_ne!(
        read(a.path(), "train/j00000_f0.ppm"),
        read(c.path(), "train/j00000_f0.ppm")
    );
}

#[test]
fn synth_layout_and_class_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let report = synth_generate(dir.path(), 400, 80, 0, 16).unwrap();
    assert_eq!(report.images, 5 * 480);
    let weights = [512.0, 4942.0, 7646.0, 8280.0];
    let total: f64 = weights.iter().sum();
    for (csv, n) in [("train.csv", 400usize), ("test.csv", 80)] {
        let m = Manifest::read(&dir.path().join(csv)).unwrap();
        assert_eq!(m.rows.len(), 5 * n);
        let mut per_class: BTreeMap<usize, BTreeSet<u64>> = BTreeMap::new();
        let mut frames: BTreeMap<u64, BTreeSet<u8>> = BTreeMap::new();
        for (row, label) in &m.rows {
            per_class
                .entry(label.index())
                .or_default()
                .insert(row.jujube_id.unwrap());
            frames
                .entry(row.jujube_id.unwrap())
                .or_default()
                .insert(row.frame_index.unwrap());
            assert!(dir.path().join(&row.path).is_file());
        }
        assert_eq!(frames.len(), n);
        assert!(frames.values().all(|f| f.len() == 5));
        for c in 0..NUM_CLASSES {
            let got = per_class.get(&c).map_or(0, |s| s.len()) as f64;
            let want = n as f64 * weights[c] / total;
            assert!(
                (got - want).abs() <= 1.0,
                "{csv} class {c}: {got} jujubes vs {want:.2}"
            );
        }
        assert_eq!(class_counts(n).iter().sum::<usize>(), n);
    }
}

#[test]
fn training_statistics_standardize_the_training_set() {
    let dir = tempfile::tempdir().unwrap();
    let (mut train, _) = synth(dir.path(), 12, 4, 9);
    let stats = NormStats::compute(&train).unwrap();
    stats.normalize_dataset(&mut train);
    let again = NormStats::compute(&train.clone_scaled(255.0)).unwrap();
    for c in 0..3 {
        assert!(again.mean[c].abs() < 1e-3, "mean {:?}", again.mean);
        assert!((again.std[c] - 1.0).abs() < 1e-3, "std {:?}", again.std);
    }
}

trait Scaled {
    fn clone_scaled(&self, k: f32) -> Dataset;
}

impl Scaled for Dataset {
    /// Undo the division by 255 so `NormStats::compute` sees the data as-is.
    fn clone_scaled(&self, k: f32) -> Dataset {
        let mut d = self.clone();
        for s in &mut d.samples {
            s.image = s.image.map(|v| v * k);
        }
        d
    }
}

proptest! {
    #[test]
    fn normalize_round_trips(vals in prop::collection::vec(0.0f32..255.0, 12..=12),
                             mean in prop::array::uniform3(0.0f32..1.0),
                             std in prop::array::uniform3(0.05f32..1.0)) {
        let stats = NormStats { mean, std };
        let x = Tensor::new([1, 3, 2, 2], vals).unwrap();
        let back = stats.denormalize(&stats.normalize(&x));
        for (a, b) in x.data().iter().zip(back.data()) {
            prop_assert!((a / 255.0 - b / 255.0).abs() < 1e-5, "{} vs {}", a, b);
        }
    }
}

fn write(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("m.csv");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn manifest_errors_name_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let err = Manifest::read(&write(d, "file,label\na.ppm,normal\n")).unwrap_err();
    assert!(matches!(err, Error::Manifest { row: 0, .. }), "{err}");
    let err = Manifest::read(&write(
        d,
        "path,label,jujube_id,frame_index\na.ppm,normal,1,0\nb.ppm,mouldy,1,1\n",
    ))
    .unwrap_err();
    assert!(matches!(err, Error::Manifest { row: 2, .. }), "{err}");
    let err = Manifest::read(&write(
        d,
        "path,label,jujube_id,frame_index\na.ppm,normal,1,7\n",
    ))
    .unwrap_err();
    assert!(matches!(err, Error::Manifest { row: 1, .. }), "{err}");
    let m = Manifest::read(&write(
        d,
        "path,label,jujube_id,frame_index\nnope.ppm,Rotten,,\n",
    ))
    .unwrap();
    assert_eq!(m.rows[0].1, ClassLabel::Rotten);
    assert_eq!(m.rows[0].0.jujube_id, None);
    let err = m.load((8, 8)).unwrap_err();
    assert!(
        matches!(err, Error::Manifest { row: 1, ref msg, .. } if msg.contains("nope.ppm")),
        "{err}"
    );
}

#[test]
fn loaded_images_are_resized_and_in_byte_range() {
    let dir = tempfile::tempdir().unwrap();
    synth_generate(dir.path(), 4, 4, 1, 24).unwrap();
    let d = load_dataset(&dir.path().join("train.csv"), (10, 14)).unwrap();
    assert_eq!(d.len(), 20);
    assert_eq!(d.image_hw(), Some((10, 14)));
    assert!(d
        .samples
        .iter()
        .all(|s| s.image.data().iter().all(|&v| (0.0..=255.0).contains(&v))));
    assert_eq!(d.groups().unwrap().len(), 4);
}

#[test]
fn weights_reencode_identically_and_reject_damage() {
    let mut m =
        build_model::<f32>(&ArchHyperParams::preset("tiny").unwrap().with_input(16)).unwrap();
    he_init(&mut m, 2);
    let norm = NormStats {
        mean: [0.1, 0.2, 0.3],
        std: [0.4, 0.5, 0.6],
    };
    let bytes = encode_weights(&m, &norm);
    let back = decode_weights(&bytes).unwrap();
    assert_eq!(back.norm, norm);
    assert_eq!(back.model.hparams(), m.hparams());
    assert_eq!(encode_weights(&back.model, &back.norm), bytes);

    let mut corrupt = bytes.clone();
    corrupt[0] = b'X';
    assert!(matches!(
        decode_weights(&corrupt),
        Err(Error::Weights { offset: 0, .. })
    ));
    assert!(matches!(
        decode_weights(&bytes[..bytes.len() - 3]),
        Err(Error::Weights { .. })
    ));
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(matches!(decode_weights(&extra), Err(Error::Weights { .. })));
}

//! Procedural stand-in for the jujube image set: a reddish fruit on a dark
//! conveyor, five frames per fruit, with one visual signature per grade.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{precondition, Error, Result};

use super::manifest::{Manifest, ManifestRow};
use super::{ClassLabel, FRAMES_PER_JUJUBE, NUM_CLASSES};

/// Training-set class counts of the real dataset, used as target proportions.
pub const CLASS_WEIGHTS: [u32; NUM_CLASSES] = [512, 4942, 7646, 8280];

pub const DEFAULT_IMAGE_SIZE: usize = 64;

/// Splits `n` jujubes over the classes by largest remainder on
/// [`CLASS_WEIGHTS`], then lifts empty classes to one jujube each.
pub fn class_counts(n: usize) -> [usize; NUM_CLASSES] {
    let total: u32 = CLASS_WEIGHTS.iter().sum();
    let exact: Vec<f64> = CLASS_WEIGHTS
        .iter()
        .map(|&w| n as f64 * w as f64 / total as f64)
        .collect();
    let mut counts = [0usize; NUM_CLASSES];
    for c in 0..NUM_CLASSES {
        counts[c] = exact[c].floor() as usize;
    }
    let mut order: Vec<usize> = (0..NUM_CLASSES).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let missing = n - counts.iter().sum::<usize>();
    for &c in order.iter().take(missing) {
        counts[c] += 1;
    }
    for c in 0..NUM_CLASSES {
        if counts[c] == 0 {
            let largest = (0..NUM_CLASSES)
                .max_by_key(|&i| (counts[i], std::cmp::Reverse(i)))
                .unwrap();
            counts[largest] -= 1;
            counts[c] = 1;
        }
    }
    counts
}

/// Everything needed to render the five frames of one fruit.
#[derive(Clone, Debug, PartialEq)]
pub struct JujubeSpec {
    pub class: ClassLabel,
    /// Centre and semi-axes as fractions of the image side.
    pub cx: f64,
    pub cy: f64,
    pub ax: f64,
    pub ay: f64,
    pub angle: f64,
    pub base_rgb: [f64; 3],
    /// Blotches or fragments: (u, v, radius) in ellipse-local coordinates.
    pub spots: Vec<(f64, f64, f64)>,
    pub stripe_period_px: f64,
    pub stripe_angle: f64,
    pub frame_jitter: Vec<(f64, f64, f64)>,
    pub noise_seed: u64,
}

impl JujubeSpec {
    pub fn random<R: Rng + ?Sized>(class: ClassLabel, rng: &mut R) -> Self {
        let spots = match class {
            ClassLabel::Rotten => (0..rng.random_range(2..=4))
                .map(|_| {
                    (
                        rng.random_range(-0.55..0.55),
                        rng.random_range(-0.55..0.55),
                        rng.random_range(0.22..0.32),
                    )
                })
                .collect(),
            ClassLabel::Invalid => (0..rng.random_range(4..=7))
                .map(|_| {
                    (
                        rng.random_range(-1.3..1.3),
                        rng.random_range(-1.3..1.3),
                        rng.random_range(0.15..0.35),
                    )
                })
                .collect(),
            _ => Vec::new(),
        };
        let frame_jitter = (0..FRAMES_PER_JUJUBE)
            .map(|_| {
                (
                    rng.random_range(-0.03..0.03),
                    rng.random_range(-0.03..0.03),
                    rng.random_range(-0.15..0.15),
                )
            })
            .collect();
        Self {
            class,
            cx: rng.random_range(0.45..0.55),
            cy: rng.random_range(0.45..0.55),
            ax: rng.random_range(0.30..0.40),
            ay: rng.random_range(0.22..0.30),
            angle: rng.random_range(0.0..PI),
            base_rgb: [
                rng.random_range(0.62..0.80),
                rng.random_range(0.10..0.22),
                rng.random_range(0.08..0.16),
            ],
            spots,
            stripe_period_px: rng.random_range(6.0..8.0),
            stripe_angle: rng.random_range(0.0..PI),
            frame_jitter,
            noise_seed: rng.random(),
        }
    }
}

/// Renders frame `frame` of `spec` as interleaved 8-bit RGB, `size`×`size`.
pub fn render_frame(spec: &JujubeSpec, frame: usize, size: usize) -> Vec<u8> {
    let (dx, dy, dtheta) = spec.frame_jitter[frame % spec.frame_jitter.len()];
    // the fruit turns on the roller between frames
    let roll = frame as f64 * 0.35;
    let theta = spec.angle + dtheta;
    let (sin, cos) = theta.sin_cos();
    let s = size as f64;
    let (cx, cy) = ((spec.cx + dx) * s, (spec.cy + dy) * s);
    let (ax, ay) = (spec.ax * s, spec.ay * s);
    let mut noise_rng =
        ChaCha8Rng::seed_from_u64(spec.noise_seed ^ (frame as u64).wrapping_mul(0x9e37_79b9));
    let noise = Normal::new(0.0, 0.015).expect("valid std");
    let period = spec.stripe_period_px * s / DEFAULT_IMAGE_SIZE as f64;
    let (ssin, scos) = spec.stripe_angle.sin_cos();
    let mut out = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let (px, py) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            // ellipse-local coordinates, unit circle at the rim
            let u = (px * cos + py * sin) / ax;
            let v = (-px * sin + py * cos) / ay;
            let r2 = u * u + v * v;
            let bg = 0.05;
            let mut rgb = [bg, bg, bg * 1.2];
            match spec.class {
                ClassLabel::Invalid => {
                    for &(su, sv, sr) in &spec.spots {
                        let d = ((u - su).powi(2) + (v - sv).powi(2)).sqrt() / sr;
                        if d < 1.0 {
                            let k = 0.28 * (1.0 - d * d);
                            rgb = [rgb[0] + k, rgb[1] + 0.5 * k, rgb[2] + 0.4 * k];
                        }
                    }
                }
                _ if r2 < 1.0 => {
                    let shade = 0.55 + 0.45 * (1.0 - r2).sqrt() - 0.15 * (u + v) * 0.5;
                    let mut col = spec.base_rgb.map(|c| c * shade);
                    match spec.class {
                        ClassLabel::Rotten => {
                            for &(su, sv, sr) in &spec.spots {
                                let su = ((su + roll * 0.3 + 1.0).rem_euclid(2.0)) - 1.0;
                                let d = ((u - su).powi(2) + (v - sv).powi(2)).sqrt() / sr;
                                if d < 1.0 {
                                    let k = 0.85 * (1.0 - d.powi(4));
                                    col = [
                                        col[0] * (1.0 - k) + 0.06 * k,
                                        col[1] * (1.0 - k) + 0.04 * k,
                                        col[2] * (1.0 - k) + 0.02 * k,
                                    ];
                                }
                            }
                        }
                        ClassLabel::Wizened => {
                            let t = (x as f64 * scos + y as f64 * ssin) * 2.0 * PI / period;
                            let m = 0.55 + 0.45 * t.sin();
                            col = col.map(|c| c * m);
                        }
                        _ => {}
                    }
                    rgb = col;
                }
                _ => {}
            }
            for c in rgb {
                let v = (c + noise.sample(&mut noise_rng)).clamp(0.0, 1.0);
                out.push((v * 255.0).round() as u8);
            }
        }
    }
    out
}

/// Summary of a generated dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthReport {
    pub train_manifest: PathBuf,
    pub test_manifest: PathBuf,
    pub train_counts: [usize; NUM_CLASSES],
    pub test_counts: [usize; NUM_CLASSES],
    pub images: usize,
}

/// Writes `out/{train,test}/jNNNNN_fK.ppm` and `out/{train,test}.csv`.
/// `n_train`/`n_test` count jujubes (five images each); ids are unique
/// across both splits. Output is a pure function of the arguments.
pub fn synth_generate(
    out: &Path,
    n_train: usize,
    n_test: usize,
    seed: u64,
    image_size: usize,
) -> Result<SynthReport> {
    if n_train < NUM_CLASSES || n_test < NUM_CLASSES {
        return precondition(
            "synth_generate",
            format!("need at least {NUM_CLASSES} jujubes per split (one per class), got {n_train}/{n_test}"),
        );
    }
    if image_size < 8 {
        return precondition("synth_generate", "image size must be at least 8");
    }
    let report = SynthReport {
        train_manifest: out.join("train.csv"),
        test_manifest: out.join("test.csv"),
        train_counts: class_counts(n_train),
        test_counts: class_counts(n_test),
        images: FRAMES_PER_JUJUBE * (n_train + n_test),
    };
    let splits = [
        (
            "train",
            n_train,
            0u64,
            report.train_counts,
            report.train_manifest.clone(),
        ),
        (
            "test",
            n_test,
            n_train as u64,
            report.test_counts,
            report.test_manifest.clone(),
        ),
    ];
    for (k, (name, n, first_id, counts, manifest)) in splits.into_iter().enumerate() {
        let dir = out.join(name);
        fs::create_dir_all(&dir)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(2).wrapping_add(k as u64));
        let mut classes: Vec<ClassLabel> = ClassLabel::ALL
            .iter()
            .zip(counts)
            .flat_map(|(&c, n)| std::iter::repeat_n(c, n))
            .collect();
        rand::seq::SliceRandom::shuffle(classes.as_mut_slice(), &mut rng);
        let mut rows = Vec::with_capacity(n * FRAMES_PER_JUJUBE);
        for (j, &class) in classes.iter().enumerate() {
            let id = first_id + j as u64;
            let spec = JujubeSpec::random(class, &mut rng);
            for f in 0..FRAMES_PER_JUJUBE {
                let file = format!("j{id:05}_f{f}.ppm");
                let rgb = render_frame(&spec, f, image_size);
                image::save_buffer_with_format(
                    dir.join(&file),
                    &rgb,
                    image_size as u32,
                    image_size as u32,
                    image::ExtendedColorType::Rgb8,
                    image::ImageFormat::Pnm,
                )
                .map_err(|e| Error::Image {
                    path: dir.join(&file),
                    msg: e.to_string(),
                })?;
                rows.push(ManifestRow {
                    path: format!("{name}/{file}"),
                    label: class.name().to_owned(),
                    jujube_id: Some(id),
                    frame_index: Some(f as u8),
                });
            }
        }
        Manifest::write(&manifest, &rows)?;
    }
    Ok(report)
}

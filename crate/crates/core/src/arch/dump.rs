//! Feature-map visualization: one grayscale map per receptor output.

use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, ImageFormat, Luma};

use super::Model;
use crate::error::{precondition, Error, Result};
use crate::{Real, Tensor};

/// Averages the channels of a single-sample `[1,c,h,w]` tensor and min-max
/// scales the result to 8 bits. A flat map becomes uniform mid-gray.
pub fn mean_map_u8<T: Real>(t: &Tensor<T>) -> (usize, usize, Vec<u8>) {
    let (c, h, w) = (t.c(), t.h(), t.w());
    let plane = h * w;
    let mut mean = vec![0.0f64; plane];
    for ch in 0..c {
        for (m, v) in mean
            .iter_mut()
            .zip(&t.sample(0)[ch * plane..(ch + 1) * plane])
        {
            *m += v.to_f64_lossy();
        }
    }
    mean.iter_mut().for_each(|m| *m /= c as f64);
    let lo = mean.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let pixels = if !(span > 1e-12 * hi.abs().max(lo.abs()).max(1e-30)) {
        vec![128u8; plane]
    } else {
        mean.iter()
            .map(|&v| ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    };
    (h, w, pixels)
}

fn write_pgm(path: &Path, h: usize, w: usize, pixels: Vec<u8>) -> Result<()> {
    let img = GrayImage::from_fn(w as u32, h as u32, |x, y| {
        Luma([pixels[y as usize * w + x as usize]])
    });
    img.save_with_format(path, ImageFormat::Pnm)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::Io(io),
            other => Error::Image {
                path: path.to_path_buf(),
                msg: other.to_string(),
            },
        })
}

/// Writes `stem_b{i}.pgm`, `layer{l}_vr{i}.pgm` and `fusion.pgm` for a
/// single `[1,3,H,W]` image and returns the paths in that order.
pub fn dump_activations<T: Real>(
    model: &Model<T>,
    image: &Tensor<T>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if image.n() != 1 {
        return precondition(
            "dump_activations",
            format!("expects one image, got batch of {}", image.n()),
        );
    }
    let trace = model.trace(image)?;
    fs::create_dir_all(out_dir)?;
    let mut maps: Vec<(String, &Tensor<T>)> = Vec::new();
    for (i, t) in trace.stem.iter().enumerate() {
        maps.push((format!("stem_b{i}.pgm"), t));
    }
    for (l, outs) in trace.receptors.iter().enumerate() {
        for (i, t) in outs.iter().enumerate() {
            maps.push((format!("layer{}_vr{i}.pgm", l + 1), t));
        }
    }
    maps.push(("fusion.pgm".to_string(), &trace.fusion));
    let mut written = Vec::with_capacity(maps.len());
    for (name, t) in maps {
        let path = out_dir.join(name);
        let (h, w, px) = mean_map_u8(t);
        write_pgm(&path, h, w, px)?;
        written.push(path);
    }
    Ok(written)
}

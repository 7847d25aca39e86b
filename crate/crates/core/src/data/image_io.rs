use std::path::Path;

use crate::error::{Error, Result};
use crate::Tensor;

/// Decodes an 8-bit RGB PNG or portable-pixmap file to `[1, 3, h, w]` with
/// values in [0, 255].
pub fn read_rgb(path: &Path) -> Result<Tensor<f32>> {
    let img = image::open(path)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(rgb_to_tensor(img.as_raw(), h, w))
}

/// Interleaved RGB bytes to a planar `[1, 3, h, w]` tensor.
pub fn rgb_to_tensor(rgb: &[u8], h: usize, w: usize) -> Tensor<f32> {
    let plane = h * w;
    let mut data = vec![0.0f32; 3 * plane];
    for (i, px) in rgb.chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * plane + i] = px[c] as f32;
        }
    }
    Tensor::new([1, 3, h, w], data).expect("length matches shape")
}

/// Bilinear resampling with half-pixel centres and clamped borders. A
/// same-size resize returns the input values unchanged.
pub fn resize_bilinear(img: &Tensor<f32>, out_h: usize, out_w: usize) -> Result<Tensor<f32>> {
    let [n, c, h, w] = img.shape();
    if out_h == 0 || out_w == 0 {
        return crate::error::precondition("resize_bilinear", "target size must be positive");
    }
    if (h, w) == (out_h, out_w) {
        return Ok(img.clone());
    }
    let axis = |src: usize, dst: usize| -> Vec<(usize, usize, f32)> {
        let scale = src as f64 / dst as f64;
        (0..dst)
            .map(|o| {
                let pos = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(src - 1);
                (lo, hi, (pos - lo as f64) as f32)
            })
            .collect()
    };
    let (ys, xs) = (axis(h, out_h), axis(w, out_w));
    let mut out = Tensor::zeros([n, c, out_h, out_w]);
    for b in 0..n {
        for ch in 0..c {
            for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
                for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                    let top = img.at(b, ch, y0, x0) * (1.0 - fx) + img.at(b, ch, y0, x1) * fx;
                    let bot = img.at(b, ch, y1, x0) * (1.0 - fx) + img.at(b, ch, y1, x1) * fx;
                    out.set(b, ch, oy, ox, top * (1.0 - fy) + bot * fy);
                }
            }
        }
    }
    Ok(out)
}

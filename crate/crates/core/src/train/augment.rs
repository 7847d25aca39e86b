use rand::Rng;

use crate::error::{precondition, Result};
use crate::{Real, Tensor};

/// One draw of the label-preserving augmentation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Augmentation {
    pub hflip: bool,
    pub vflip: bool,
    /// Counter-clockwise rotation in multiples of 90°.
    pub quarter_turns: u8,
}

impl Augmentation {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            hflip: rng.random_bool(0.5),
            vflip: rng.random_bool(0.5),
            quarter_turns: rng.random_range(0..4),
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::default()
    }

    /// Applies mirrors then rotation to every sample of `image`.
    pub fn apply<T: Real>(&self, image: &Tensor<T>) -> Result<Tensor<T>> {
        let [n, c, h, w] = image.shape();
        if self.quarter_turns % 2 == 1 && h != w {
            return precondition(
                "augment",
                format!("90° rotation of a non-square {h}x{w} image"),
            );
        }
        if self.is_identity() {
            return Ok(image.clone());
        }
        let mut out = Tensor::zeros(image.shape());
        for b in 0..n {
            for ch in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        let (mut sy, mut sx) = match self.quarter_turns % 4 {
                            0 => (y, x),
                            1 => (x, w - 1 - y),
                            2 => (h - 1 - y, w - 1 - x),
                            _ => (h - 1 - x, y),
                        };
                        if self.vflip {
                            sy = h - 1 - sy;
                        }
                        if self.hflip {
                            sx = w - 1 - sx;
                        }
                        out.set(b, ch, y, x, image.at(b, ch, sy, sx));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Random mirror (horizontal and vertical, each p = 0.5) and a uniform
/// rotation from {0°, 90°, 180°, 270°}.
pub fn augment<T: Real, R: Rng + ?Sized>(image: &Tensor<T>, rng: &mut R) -> Result<Tensor<T>> {
    Augmentation::sample(rng).apply(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn img(h: usize, w: usize) -> Tensor<f32> {
        Tensor::new([1, 3, h, w], (0..3 * h * w).map(|v| v as f32).collect()).unwrap()
    }

    #[test]
    fn identity_choice_is_identity() {
        let x = img(4, 4);
        assert_eq!(Augmentation::default().apply(&x).unwrap(), x);
    }

    #[test]
    fn mirror_is_an_involution() {
        let x = img(4, 4);
        let m = Augmentation {
            hflip: true,
            ..Default::default()
        };
        let once = m.apply(&x).unwrap();
        assert_ne!(once, x);
        assert_eq!(once.at(0, 0, 0, 0), x.at(0, 0, 0, 3));
        assert_eq!(m.apply(&once).unwrap(), x);
    }

    #[test]
    fn four_quarter_turns_compose_to_identity() {
        let x = img(3, 3);
        let r = Augmentation {
            quarter_turns: 1,
            ..Default::default()
        };
        let mut y = x.clone();
        for _ in 0..4 {
            y = r.apply(&y).unwrap();
        }
        assert_eq!(y, x);
        assert_ne!(r.apply(&x).unwrap(), x);
    }

    #[test]
    fn non_square_rotation_is_rejected() {
        let r = Augmentation {
            quarter_turns: 3,
            ..Default::default()
        };
        assert!(r.apply(&img(2, 4)).is_err());
        let half = Augmentation {
            quarter_turns: 2,
            hflip: true,
            vflip: false,
        };
        assert!(half.apply(&img(2, 4)).is_ok());
    }

    proptest! {
        #[test]
        fn pixel_multiset_is_preserved(seed in any::<u64>(), size in 1usize..6) {
            let x = img(size, size);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let y = augment(&x, &mut rng).unwrap();
            for ch in 0..3 {
                let plane = |t: &Tensor<f32>| {
                    let mut v: Vec<u32> = t.sample(0)[ch * size * size..(ch + 1) * size * size]
                        .iter().map(|f| f.to_bits()).collect();
                    v.sort_unstable();
                    v
                };
                prop_assert_eq!(plane(&x), plane(&y));
            }
        }
    }
}

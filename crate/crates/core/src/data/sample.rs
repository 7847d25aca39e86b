use std::collections::BTreeMap;

use crate::error::{precondition, Result};
use crate::Tensor;

use super::ClassLabel;

pub const FRAMES_PER_JUJUBE: usize = 5;

/// One image, stored as a `[1, 3, h, w]` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub image: Tensor<f32>,
    pub label: ClassLabel,
    pub jujube_id: Option<u64>,
    pub frame_index: Option<u8>,
}

/// The five rotated frames of one fruit, ordered by frame index.
#[derive(Clone, Debug, PartialEq)]
pub struct JujubeGroup {
    pub jujube_id: u64,
    pub label: ClassLabel,
    pub frames: Vec<Sample>,
}

impl JujubeGroup {
    pub fn new(jujube_id: u64, mut frames: Vec<Sample>) -> Result<Self> {
        if frames.len() != FRAMES_PER_JUJUBE {
            return precondition(
                "jujube_group",
                format!(
                    "jujube {jujube_id} has {} frames, expected {FRAMES_PER_JUJUBE}",
                    frames.len()
                ),
            );
        }
        frames.sort_by_key(|s| s.frame_index);
        for (i, s) in frames.iter().enumerate() {
            if s.frame_index != Some(i as u8) {
                return precondition(
                    "jujube_group",
                    format!("jujube {jujube_id} is missing frame {i}"),
                );
            }
        }
        let label = frames[0].label;
        if frames.iter().any(|s| s.label != label) {
            return precondition(
                "jujube_group",
                format!("jujube {jujube_id} has mixed labels"),
            );
        }
        Ok(Self {
            jujube_id,
            label,
            frames,
        })
    }

    /// The frames as one `[5, 3, h, w]` batch.
    pub fn batch(&self) -> Result<Tensor<f32>> {
        Tensor::stack(&self.frames.iter().map(|s| &s.image).collect::<Vec<_>>())
    }
}

/// An in-memory labelled image set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label.index()).collect()
    }

    pub fn image_hw(&self) -> Option<(usize, usize)> {
        self.samples.first().map(|s| (s.image.h(), s.image.w()))
    }

    /// Stacks the selected samples into a batch with their labels.
    pub fn batch(&self, idx: &[usize]) -> Result<(Tensor<f32>, Vec<usize>)> {
        let images: Vec<&Tensor<f32>> = idx.iter().map(|&i| &self.samples[i].image).collect();
        let labels = idx.iter().map(|&i| self.samples[i].label.index()).collect();
        Ok((Tensor::stack(&images)?, labels))
    }

    /// Partitions samples that carry a jujube id into groups, ordered by id.
    pub fn groups(&self) -> Result<Vec<JujubeGroup>> {
        let mut by_id: BTreeMap<u64, Vec<Sample>> = BTreeMap::new();
        for s in &self.samples {
            if let Some(id) = s.jujube_id {
                by_id.entry(id).or_default().push(s.clone());
            }
        }
        by_id
            .into_iter()
            .map(|(id, frames)| JujubeGroup::new(id, frames))
            .collect()
    }

    /// Splits off roughly `fraction` of the data as a held-out set. Whole
    /// jujubes move together; samples without an id are split individually.
    /// Returns `(kept, held_out)`.
    pub fn split_holdout(&self, fraction: f64, seed: u64) -> (Dataset, Dataset) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut units: BTreeMap<(bool, u64), Vec<usize>> = BTreeMap::new();
        for (i, s) in self.samples.iter().enumerate() {
            let key = match s.jujube_id {
                Some(id) => (true, id),
                None => (false, i as u64),
            };
            units.entry(key).or_default().push(i);
        }
        let mut keys: Vec<_> = units.keys().copied().collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        keys.shuffle(&mut rng);
        let target = (fraction * self.len() as f64).round() as usize;
        let mut held = vec![false; self.len()];
        let mut taken = 0;
        for k in keys {
            if taken >= target {
                break;
            }
            for &i in &units[&k] {
                held[i] = true;
                taken += 1;
            }
        }
        let (mut kept, mut out) = (Vec::new(), Vec::new());
        for (s, h) in self.samples.iter().zip(held) {
            if h {
                out.push(s.clone())
            } else {
                kept.push(s.clone())
            }
        }
        (Dataset::new(kept), Dataset::new(out))
    }
}

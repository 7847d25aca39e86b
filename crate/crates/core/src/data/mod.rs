//! Labels, manifests, image decoding, normalization, the synthetic
//! generator and the weights file format.

mod image_io;
mod label;
mod manifest;
mod normalize;
mod sample;
pub mod synth;
mod weights;

pub use image_io::{read_rgb, resize_bilinear, rgb_to_tensor};
pub use label::{ClassLabel, NUM_CLASSES};
pub use manifest::{load_dataset, Manifest, ManifestRow};
pub use normalize::NormStats;
pub use sample::{Dataset, JujubeGroup, Sample, FRAMES_PER_JUJUBE};
pub use synth::{class_counts, render_frame, synth_generate, JujubeSpec, SynthReport};
pub use weights::{
    decode_weights, encode_weights, load_weights, save_weights, Checkpoint, FORMAT_VERSION, MAGIC,
};

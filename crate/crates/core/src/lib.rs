//! Iterative co-saliency detection for groups of RGBD images.
//!
//! A group of images, each with one or more single-image saliency maps, is
//! segmented into superpixels, fused into an initial map, and refined by
//! alternating an addition scheme (depth shape prior plus graph propagation)
//! with a deletion scheme (cross-image matching that suppresses regions
//! without a counterpart elsewhere in the group).

pub mod addition;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod deletion;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod field;
pub mod image;
pub mod initialization;
pub mod iteration;
pub mod segmentation;
pub mod synth;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use field::SaliencyField;
pub use image::{DepthMap, PixelMap, RgbImage};
pub use initialization::InputSaliencySet;
pub use iteration::{run_group, GroupImage, GroupRunResult, ImageGroup};

//! Samples, ground truth containers and the dataset pipeline.

mod augment;
mod io;
mod preprocess;
mod synth;

pub use augment::{augment_mirror, split};
pub use io::{load_dataset, read_fixations, read_map, save_dataset, write_fixations, write_map_png, write_map_raw};
pub use preprocess::{center_and_scale, preprocess_for, DatasetStats, Example, Pipeline, Preprocessor};
pub use synth::{synth_generate, synth_samples, SynthConfig};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Declared value interval of a tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueRange {
    /// Raw 8-bit intensities, `[0, 255]`.
    Byte,
    /// `[0, 1]`
    Unit,
    /// `[-1, 1]`, the network input convention.
    Symmetric,
}

impl ValueRange {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            ValueRange::Byte => (0.0, 255.0),
            ValueRange::Unit => (0.0, 1.0),
            ValueRange::Symmetric => (-1.0, 1.0),
        }
    }

    pub fn contains(self, v: f64) -> bool {
        let (lo, hi) = self.bounds();
        (lo..=hi).contains(&v)
    }
}

/// A single-channel map over image pixels, `[1, H, W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    values: Tensor<f64>,
    range: ValueRange,
}

impl SaliencyMap {
    pub fn new(values: Tensor<f64>, range: ValueRange) -> Result<Self> {
        let (c, _, _) = values.chw()?;
        if c != 1 {
            return Err(Error::shape("saliency map", "channels", 1, c));
        }
        if let Some(v) = values.data().iter().find(|&&v| !range.contains(v)) {
            return Err(Error::Metric(format!(
                "map value {v} outside declared range {range:?}"
            )));
        }
        Ok(Self { values, range })
    }

    pub fn values(&self) -> &Tensor<f64> {
        &self.values
    }

    pub fn range(&self) -> ValueRange {
        self.range
    }

    pub fn height(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.values.shape()[2]
    }

    pub fn extents(&self) -> (usize, usize) {
        (self.height(), self.width())
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values.data()[y * self.width() + x]
    }

    /// Value of each pixel as an 8-bit level.
    pub fn to_bytes(&self) -> Vec<u8> {
        let (lo, hi) = self.range.bounds();
        self.values
            .data()
            .iter()
            .map(|&v| (255.0 * (v - lo) / (hi - lo)).round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// Gaze fixations as `(x, y)` pixel coordinates, `x` along the width.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FixationSet {
    pub points: Vec<(usize, usize)>,
}

impl FixationSet {
    pub fn new(points: Vec<(usize, usize)>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// First point outside a `height x width` image, if any.
    pub fn out_of_bounds(&self, height: usize, width: usize) -> Option<(usize, usize)> {
        self.points
            .iter()
            .copied()
            .find(|&(x, y)| x >= width || y >= height)
    }
}

/// One image with its optional ground truths.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    /// `[3, H, W]` raw 8-bit intensities.
    pub image: Tensor<f32>,
    pub gt_map: Option<SaliencyMap>,
    pub fixations: Option<FixationSet>,
}

impl Sample {
    pub fn height(&self) -> usize {
        self.image.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.image.shape()[2]
    }

    pub fn validate(&self) -> Result<()> {
        let (c, h, w) = self.image.chw()?;
        if c != 3 {
            return Err(Error::data(&self.id, format!("image has {c} channels, expected 3")));
        }
        if let Some(map) = &self.gt_map {
            if map.extents() != (h, w) {
                return Err(Error::data(
                    &self.id,
                    format!(
                        "map extents {}x{} differ from image extents {h}x{w}",
                        map.height(),
                        map.width()
                    ),
                ));
            }
        }
        if let Some((x, y)) = self.fixations.as_ref().and_then(|f| f.out_of_bounds(h, w)) {
            return Err(Error::data(
                &self.id,
                format!("fixation ({x},{y}) outside {w}x{h} image"),
            ));
        }
        Ok(())
    }
}

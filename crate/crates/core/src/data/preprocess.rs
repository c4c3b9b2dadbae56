use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::{Sample, ValueRange};
use crate::error::{Error, Result};
use crate::imageops::{min_max_normalize, resize_bilinear};
use crate::models::{NetSpec, OutputKind};
use crate::tensor::Tensor;

/// How samples are turned into network inputs and regression targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pipeline {
    /// Square input, square target in `[0, 1]`.
    Shallow { input_side: usize, output_side: usize },
    /// Input and target at the same `height x width`, both centered to `[-1, 1]`.
    Deep { height: usize, width: usize },
}

impl Pipeline {
    pub fn for_spec(spec: &NetSpec) -> Self {
        let [_, h, w] = spec.input_dims();
        match spec.output {
            OutputKind::VectorMap { side } => Pipeline::Shallow {
                input_side: h,
                output_side: side,
            },
            OutputKind::FullResolution => Pipeline::Deep { height: h, width: w },
        }
    }

    pub fn input_extents(&self) -> (usize, usize) {
        match *self {
            Pipeline::Shallow { input_side, .. } => (input_side, input_side),
            Pipeline::Deep { height, width } => (height, width),
        }
    }
}

/// Training-split means, stored next to a model so prediction repeats the
/// training preprocessing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetStats {
    /// Per-channel mean pixel in `[0, 255]`.
    pub channel_mean: [f64; 3],
    /// Mean ground-truth map value in `[0, 1]`.
    pub map_mean: f64,
}

impl Default for DatasetStats {
    fn default() -> Self {
        Self {
            channel_mean: [127.5; 3],
            map_mean: 0.5,
        }
    }
}

impl DatasetStats {
    /// Means over the samples after resizing to the pipeline's resolution.
    /// Samples without a map do not contribute to `map_mean`.
    pub fn compute(samples: &[Sample], pipeline: Pipeline) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::config("cannot compute dataset means of zero samples"));
        }
        let (h, w) = pipeline.input_extents();
        let mut sums = [0.0f64; 3];
        for s in samples {
            let img = resize_bilinear(&s.image, h, w);
            for (c, plane) in img.data().chunks(h * w).enumerate() {
                sums[c] += plane.iter().map(|&v| f64::from(v)).sum::<f64>();
            }
        }
        let denom = (samples.len() * h * w) as f64;
        let channel_mean = sums.map(|s| s / denom);

        let (mut map_sum, mut map_count) = (0.0, 0usize);
        for map in samples.iter().filter_map(|s| s.gt_map.as_ref()) {
            let m = resize_bilinear(map.values(), h, w);
            map_sum += m.sum();
            map_count += m.len();
        }
        let map_mean = if map_count == 0 { 0.5 } else { map_sum / map_count as f64 };
        Ok(Self {
            channel_mean,
            map_mean,
        })
    }

    pub fn to_meta_text(&self) -> String {
        let mut s = String::new();
        for (name, v) in ["mean_r", "mean_g", "mean_b"].iter().zip(self.channel_mean) {
            writeln!(s, "{name} = {v}").unwrap();
        }
        writeln!(s, "map_mean = {}", self.map_mean).unwrap();
        s
    }

    pub fn from_meta_text(text: &str) -> Result<Self> {
        let mut stats = Self::default();
        let mut seen = [false; 4];
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("meta line `{line}` is not `key = value`")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("meta value `{}` is not a number", value.trim())))?;
            let slot = match key.trim() {
                "mean_r" => 0,
                "mean_g" => 1,
                "mean_b" => 2,
                "map_mean" => 3,
                // unknown keys are left for other tools
                _ => continue,
            };
            if slot < 3 {
                stats.channel_mean[slot] = value;
            } else {
                stats.map_mean = value;
            }
            seen[slot] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            let key = ["mean_r", "mean_g", "mean_b", "map_mean"][i];
            return Err(Error::config(format!("meta file lacks `{key}`")));
        }
        Ok(stats)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_meta_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_meta_text(&text)
    }
}

/// Subtracts `means[c]` from channel `c` and divides by the largest possible
/// deviation, landing in `[-1, 1]`. Already centered data is rejected.
pub fn center_and_scale(t: &Tensor<f32>, range: ValueRange, means: &[f64]) -> Result<Tensor<f32>> {
    let (lo, hi) = match range {
        ValueRange::Symmetric => {
            return Err(Error::config("data is already centered to [-1, 1]"));
        }
        r => r.bounds(),
    };
    let (c, h, w) = t.chw()?;
    if means.len() != c {
        return Err(Error::shape("centering", "channels", means.len(), c));
    }
    let mut out = t.clone();
    for (plane, &m) in out.data_mut().chunks_mut(h * w).zip(means) {
        let scale = (m - lo).max(hi - m);
        for v in plane {
            *v = ((f64::from(*v) - m) / scale) as f32;
        }
    }
    Ok(out)
}

/// A network input paired with its regression target.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub id: String,
    pub input: Tensor<f32>,
    pub target: Tensor<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preprocessor {
    pub pipeline: Pipeline,
    pub stats: DatasetStats,
}

impl Preprocessor {
    pub fn new(pipeline: Pipeline, stats: DatasetStats) -> Self {
        Self { pipeline, stats }
    }

    pub fn for_spec(spec: &NetSpec, stats: DatasetStats) -> Self {
        Self::new(Pipeline::for_spec(spec), stats)
    }

    /// Resized, centered input in `[-1, 1]`.
    pub fn input(&self, sample: &Sample) -> Result<Tensor<f32>> {
        let (h, w) = self.pipeline.input_extents();
        let resized = resize_bilinear(&sample.image, h, w);
        center_and_scale(&resized, ValueRange::Byte, &self.stats.channel_mean)
    }

    pub fn target(&self, sample: &Sample) -> Result<Tensor<f32>> {
        let map = sample
            .gt_map
            .as_ref()
            .ok_or_else(|| Error::data(&sample.id, "no ground-truth map for a training target"))?;
        let unit = match map.range() {
            ValueRange::Unit => map.values().clone(),
            ValueRange::Byte => map.values().map(|v| v / 255.0),
            ValueRange::Symmetric => {
                return Err(Error::data(&sample.id, "ground-truth map is already centered"))
            }
        };
        match self.pipeline {
            Pipeline::Shallow { output_side, .. } => {
                let t = min_max_normalize(&resize_bilinear(&unit, output_side, output_side));
                Ok(t.cast())
            }
            Pipeline::Deep { height, width } => {
                let t = resize_bilinear(&unit, height, width).cast::<f32>();
                center_and_scale(&t, ValueRange::Unit, &[self.stats.map_mean])
            }
        }
    }

    pub fn example(&self, sample: &Sample) -> Result<Example> {
        Ok(Example {
            id: sample.id.clone(),
            input: self.input(sample)?,
            target: self.target(sample)?,
        })
    }

    pub fn examples(&self, samples: &[Sample]) -> Result<Vec<Example>> {
        samples.iter().map(|s| self.example(s)).collect()
    }
}

/// One-shot form of [`Preprocessor::example`].
pub fn preprocess_for(pipeline: Pipeline, stats: DatasetStats, sample: &Sample) -> Result<Example> {
    Preprocessor::new(pipeline, stats).example(sample)
}

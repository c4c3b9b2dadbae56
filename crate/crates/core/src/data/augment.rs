use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{FixationSet, Sample, SaliencyMap};
use crate::error::{Error, Result};
use crate::imageops::flip_horizontal;

fn mirror(sample: &Sample) -> Sample {
    let w = sample.width();
    Sample {
        id: format!("{}_flip", sample.id),
        image: flip_horizontal(&sample.image),
        gt_map: sample.gt_map.as_ref().map(|m| {
            SaliencyMap::new(flip_horizontal(m.values()), m.range()).expect("flip keeps range")
        }),
        fixations: sample
            .fixations
            .as_ref()
            .map(|f| FixationSet::new(f.points.iter().map(|&(x, y)| (w - 1 - x, y)).collect())),
    }
}

/// Originals followed by their left-right mirrored copies.
pub fn augment_mirror(samples: &[Sample]) -> Vec<Sample> {
    let mut out = samples.to_vec();
    out.extend(samples.iter().map(mirror));
    out
}

/// Seeded shuffle, then the first `round(n * train_fraction)` go to training.
pub fn split(samples: &[Sample], train_fraction: f64, seed: u64) -> Result<(Vec<Sample>, Vec<Sample>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = samples.len();
    let n_train = (n as f64 * train_fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::config(format!(
            "splitting {n} samples at {train_fraction} leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

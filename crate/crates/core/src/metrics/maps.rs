use crate::data::{FixationSet, SaliencyMap, ValueRange};
use crate::error::{Error, Result};
use crate::imageops::{gaussian_blur, min_max_normalize};
use crate::tensor::Tensor;

/// Default blur applied to fixation impulses, in pixels.
pub const DEFAULT_FIXATION_SIGMA: f64 = 8.0;

/// Unit impulses at the fixated pixels, blurred with `sigma` and scaled to
/// `[0, 1]`.
pub fn fixation_map(fix: &FixationSet, extents: (usize, usize), sigma: f64) -> Result<SaliencyMap> {
    if fix.is_empty() {
        return Err(Error::Metric("fixation map of an empty fixation set".into()));
    }
    let (h, w) = extents;
    if let Some((x, y)) = fix.out_of_bounds(h, w) {
        return Err(Error::Metric(format!("fixation ({x},{y}) outside {w}x{h} map")));
    }
    let mut impulses = Tensor::<f64>::zeros(vec![1, h, w]);
    for &(x, y) in &fix.points {
        impulses.set(0, y, x, 1.0);
    }
    SaliencyMap::new(min_max_normalize(&gaussian_blur(&impulses, sigma)), ValueRange::Unit)
}

fn check_extents(a: &SaliencyMap, b: &SaliencyMap) -> Result<()> {
    if a.height() != b.height() {
        return Err(Error::shape("map comparison", "height", a.height(), b.height()));
    }
    if a.width() != b.width() {
        return Err(Error::shape("map comparison", "width", a.width(), b.width()));
    }
    Ok(())
}

/// Pearson correlation. `degenerate` marks a constant input, for which the
/// value is defined as 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correlation {
    pub value: f64,
    pub degenerate: bool,
}

pub fn cc(pred: &SaliencyMap, gt: &SaliencyMap) -> Result<Correlation> {
    check_extents(pred, gt)?;
    let a = pred.values().data();
    let b = gt.values().data();
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(Correlation {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(Correlation {
        value: (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

/// Histogram intersection of the two maps after scaling each to unit sum.
pub fn similarity(pred: &SaliencyMap, gt: &SaliencyMap) -> Result<f64> {
    check_extents(pred, gt)?;
    let a = pred.values().data();
    let b = gt.values().data();
    if a.iter().chain(b).any(|&v| v < 0.0) {
        return Err(Error::Metric("similarity needs non-negative maps".into()));
    }
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    if sa <= 0.0 || sb <= 0.0 {
        return Err(Error::Metric("similarity of a map with zero sum".into()));
    }
    let s: f64 = a.iter().zip(b).map(|(&x, &y)| (x / sa).min(y / sb)).sum();
    Ok(s.min(1.0))
}

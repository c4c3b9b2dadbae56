use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;

use crate::data::{FixationSet, SaliencyMap};
use crate::error::{Error, Result};

/// Area under the ROC curve with every distinct score as a threshold. Ties
/// between a positive and a negative count one half, so this equals the
/// Mann-Whitney U statistic divided by `n_pos * n_neg`.
pub fn roc_auc(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::Metric(format!(
            "ROC needs both classes, got {} positives and {} negatives",
            positives.len(),
            negatives.len()
        )));
    }
    if let Some(v) = positives.iter().chain(negatives).find(|v| v.is_nan()) {
        return Err(Error::Metric(format!("score {v} is not a number")));
    }
    let mut scored: Vec<(f64, bool)> = positives
        .iter()
        .map(|&v| (v, true))
        .chain(negatives.iter().map(|&v| (v, false)))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    // Twice the trapezoid area, accumulated in integers: each group of equal
    // scores adds neg * (2 * tp_before + pos).
    let mut area2: u128 = 0;
    let mut tp: u128 = 0;
    let mut i = 0;
    while i < scored.len() {
        let v = scored[i].0;
        let (mut pos, mut neg) = (0u128, 0u128);
        while i < scored.len() && scored[i].0 == v {
            if scored[i].1 {
                pos += 1;
            } else {
                neg += 1;
            }
            i += 1;
        }
        area2 += neg * (2 * tp + pos);
        tp += pos;
    }
    let denom = 2 * positives.len() as u128 * negatives.len() as u128;
    Ok(area2 as f64 / denom as f64)
}

/// Distinct fixated pixels as flat indices, checked against the map extents.
fn fixated_pixels(pred: &SaliencyMap, fix: &FixationSet) -> Result<Vec<usize>> {
    if fix.is_empty() {
        return Err(Error::Metric("no fixations".into()));
    }
    let (h, w) = pred.extents();
    if let Some((x, y)) = fix.out_of_bounds(h, w) {
        return Err(Error::Metric(format!("fixation ({x},{y}) outside {w}x{h} map")));
    }
    let mut seen = HashSet::new();
    Ok(fix
        .points
        .iter()
        .map(|&(x, y)| y * w + x)
        .filter(|i| seen.insert(*i))
        .collect())
}

fn values_at(pred: &SaliencyMap, idx: &[usize]) -> Vec<f64> {
    let d = pred.values().data();
    idx.iter().map(|&i| d[i]).collect()
}

/// Positives at fixated pixels, negatives at every other pixel.
pub fn auc_judd(pred: &SaliencyMap, fix: &FixationSet) -> Result<f64> {
    let fixated = fixated_pixels(pred, fix)?;
    let mut is_fix = vec![false; pred.values().len()];
    for &i in &fixated {
        is_fix[i] = true;
    }
    let negatives: Vec<f64> = pred
        .values()
        .data()
        .iter()
        .zip(&is_fix)
        .filter(|(_, &f)| !f)
        .map(|(&v, _)| v)
        .collect();
    roc_auc(&values_at(pred, &fixated), &negatives)
}

/// Mean AUC over `n_splits` draws of `|fix|` uniform non-fixated pixels
/// (with replacement).
pub fn auc_borji<R: Rng + ?Sized>(
    pred: &SaliencyMap,
    fix: &FixationSet,
    n_splits: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_splits == 0 {
        return Err(Error::Metric("n_splits must be positive".into()));
    }
    let fixated = fixated_pixels(pred, fix)?;
    let positives = values_at(pred, &fixated);
    let fixed: HashSet<usize> = fixated.into_iter().collect();
    let free: Vec<usize> = (0..pred.values().len()).filter(|i| !fixed.contains(i)).collect();
    if free.is_empty() {
        return Err(Error::Metric("every pixel is fixated".into()));
    }
    let data = pred.values().data();
    let mut total = 0.0;
    let mut negatives = vec![0.0; fix.len()];
    for _ in 0..n_splits {
        for n in negatives.iter_mut() {
            *n = data[free[rng.random_range(0..free.len())]];
        }
        total += roc_auc(&positives, &negatives)?;
    }
    Ok(total / n_splits as f64)
}

/// Like [`auc_borji`], but negatives are drawn without replacement from the
/// fixations of other images (`others`, already in this map's coordinates).
pub fn auc_shuffled<R: Rng + ?Sized>(
    pred: &SaliencyMap,
    fix: &FixationSet,
    others: &FixationSet,
    n_splits: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_splits == 0 {
        return Err(Error::Metric("n_splits must be positive".into()));
    }
    if others.is_empty() {
        return Err(Error::Metric("empty shuffled negative pool".into()));
    }
    let (h, w) = pred.extents();
    if let Some((x, y)) = others.out_of_bounds(h, w) {
        return Err(Error::Metric(format!("pooled fixation ({x},{y}) outside {w}x{h} map")));
    }
    let positives = values_at(pred, &fixated_pixels(pred, fix)?);
    let pool: Vec<f64> = others.points.iter().map(|&(x, y)| pred.at(x, y)).collect();
    let k = fix.len().min(pool.len());
    let mut total = 0.0;
    for _ in 0..n_splits {
        let negatives: Vec<f64> = index::sample(rng, pool.len(), k).iter().map(|i| pool[i]).collect();
        total += roc_auc(&positives, &negatives)?;
    }
    Ok(total / n_splits as f64)
}

use std::cmp::Ordering;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{FixationSet, Sample, SaliencyMap};
use crate::error::{Error, Result};
use crate::metrics::auc::{auc_borji, auc_judd, auc_shuffled};
use crate::metrics::maps::{cc, fixation_map, similarity, DEFAULT_FIXATION_SIGMA};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalConfig {
    pub n_splits: usize,
    pub sigma_fix: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_splits: 100,
            sigma_fix: DEFAULT_FIXATION_SIGMA,
            seed: 0,
        }
    }
}

pub const METRIC_NAMES: [&str; 5] = ["similarity", "cc", "auc_shuffled", "auc_borji", "auc_judd"];

/// Scores of one image. `None` marks a metric that could not be computed;
/// the reason is in `notes`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub similarity: Option<f64>,
    pub cc: Option<f64>,
    pub auc_shuffled: Option<f64>,
    pub auc_borji: Option<f64>,
    pub auc_judd: Option<f64>,
    pub notes: Vec<String>,
}

impl ImageRecord {
    pub fn scores(&self) -> [Option<f64>; 5] {
        [
            self.similarity,
            self.cc,
            self.auc_shuffled,
            self.auc_borji,
            self.auc_judd,
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub model: String,
    /// Sorted by AUC Judd, best first.
    pub records: Vec<ImageRecord>,
    /// Arithmetic mean of each column over the images that have it.
    pub mean: [Option<f64>; 5],
}

fn by_judd(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

/// Moves a point from a `src` sized image to the pixel with the same relative
/// position in a `dst` sized one.
fn rescale(p: (usize, usize), src: (usize, usize), dst: (usize, usize)) -> (usize, usize) {
    let map = |v: usize, from: usize, to: usize| {
        (((v as f64 + 0.5) * to as f64 / from as f64).floor() as usize).min(to - 1)
    };
    (map(p.0, src.1, dst.1), map(p.1, src.0, dst.0))
}

/// Scores each prediction against its sample. Map metrics use the
/// ground-truth map, or the fixation map when there is none. Shuffled
/// negatives come from the fixations of every other sample.
pub fn evaluate(
    model: &str,
    samples: &[Sample],
    predictions: &[SaliencyMap],
    cfg: &EvalConfig,
) -> Result<MetricReport> {
    if samples.len() != predictions.len() {
        return Err(Error::shape("evaluation", "predictions", samples.len(), predictions.len()));
    }
    let mut records = Vec::with_capacity(samples.len());
    for (i, (sample, pred)) in samples.iter().zip(predictions).enumerate() {
        let extents = (sample.height(), sample.width());
        let context = format!("prediction for {}", sample.id);
        if pred.height() != extents.0 {
            return Err(Error::shape(context, "height", extents.0, pred.height()));
        }
        if pred.width() != extents.1 {
            return Err(Error::shape(context, "width", extents.1, pred.width()));
        }
        let mut rec = ImageRecord {
            id: sample.id.clone(),
            similarity: None,
            cc: None,
            auc_shuffled: None,
            auc_borji: None,
            auc_judd: None,
            notes: Vec::new(),
        };
        let fix = sample.fixations.as_ref().filter(|f| !f.is_empty());

        let reference = match (&sample.gt_map, fix) {
            (Some(m), _) => Some(m.clone()),
            (None, Some(f)) => Some(fixation_map(f, extents, cfg.sigma_fix)?),
            (None, None) => None,
        };
        match reference {
            Some(gt) => {
                match similarity(pred, &gt) {
                    Ok(v) => rec.similarity = Some(v),
                    Err(e) => rec.notes.push(format!("similarity: {e}")),
                }
                let c = cc(pred, &gt)?;
                if c.degenerate {
                    rec.notes.push("cc: constant map, scored 0".into());
                }
                rec.cc = Some(c.value);
            }
            None => rec.notes.push("no ground truth for map metrics".into()),
        }

        match fix {
            Some(f) => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(i as u64);
                rec.auc_judd = Some(auc_judd(pred, f)?);
                rec.auc_borji = Some(auc_borji(pred, f, cfg.n_splits, &mut rng)?);
                let pool: Vec<(usize, usize)> = samples
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .filter_map(|(_, o)| o.fixations.as_ref().map(|f| (o, f)))
                    .flat_map(|(o, f)| {
                        let src = (o.height(), o.width());
                        f.points.iter().map(move |&p| rescale(p, src, extents))
                    })
                    .collect();
                if pool.is_empty() {
                    rec.notes.push("auc_shuffled: no fixations on other images".into());
                } else {
                    let others = FixationSet::new(pool);
                    rec.auc_shuffled = Some(auc_shuffled(pred, f, &others, cfg.n_splits, &mut rng)?);
                }
            }
            None => rec.notes.push("no fixations for AUC metrics".into()),
        }
        records.push(rec);
    }
    records.sort_by(|a, b| by_judd(a.auc_judd, b.auc_judd).then_with(|| a.id.cmp(&b.id)));

    let mean = std::array::from_fn(|k| {
        let vals: Vec<f64> = records.iter().filter_map(|r| r.scores()[k]).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    });
    Ok(MetricReport {
        model: model.to_string(),
        records,
        mean,
    })
}

/// Orders reports by mean AUC Judd, best first.
pub fn rank_models(reports: &mut [MetricReport]) {
    reports.sort_by(|a, b| by_judd(a.mean[4], b.mean[4]).then_with(|| a.model.cmp(&b.model)));
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

impl MetricReport {
    /// Aligned plain-text table, one row per image and a mean row.
    pub fn to_table(&self) -> String {
        let id_width = self
            .records
            .iter()
            .map(|r| r.id.len())
            .chain(["image".len(), "mean".len()])
            .max()
            .unwrap_or(5);
        let mut s = String::new();
        writeln!(s, "model: {}", self.model).unwrap();
        write!(s, "{:<id_width$}", "image").unwrap();
        for name in METRIC_NAMES {
            write!(s, "  {name:>12}").unwrap();
        }
        s.push('\n');
        let mut row = |id: &str, scores: [Option<f64>; 5]| {
            write!(s, "{id:<id_width$}").unwrap();
            for v in scores {
                write!(s, "  {:>12}", cell(v)).unwrap();
            }
            s.push('\n');
        };
        for r in &self.records {
            row(&r.id, r.scores());
        }
        row("mean", self.mean);
        s
    }

    /// Comma-separated rows with full precision, ending with the mean row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("id");
        for name in METRIC_NAMES {
            s.push(',');
            s.push_str(name);
        }
        s.push('\n');
        let mut row = |id: &str, scores: [Option<f64>; 5]| {
            s.push_str(id);
            for v in scores {
                s.push(',');
                if let Some(v) = v {
                    write!(s, "{v}").unwrap();
                }
            }
            s.push('\n');
        };
        for r in &self.records {
            row(&r.id, r.scores());
        }
        row("mean", self.mean);
        s
    }
}

/// One line per model with its mean scores, in the given order.
pub fn ranking_table(reports: &[MetricReport]) -> String {
    let width = reports.iter().map(|r| r.model.len()).chain([5]).max().unwrap_or(5);
    let mut s = format!("{:<width$}", "model");
    for name in METRIC_NAMES {
        write!(s, "  {name:>12}").unwrap();
    }
    s.push('\n');
    for r in reports {
        write!(s, "{:<width$}", r.model).unwrap();
        for v in r.mean {
            write!(s, "  {:>12}", cell(v)).unwrap();
        }
        s.push('\n');
    }
    s
}

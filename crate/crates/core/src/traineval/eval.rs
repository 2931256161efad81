//! Per-video prediction, R², RMSE and rank correlation.

use std::io::Write;
use std::path::Path;

use crate::dataset::Dataset;
use crate::net::{predict_hardness, Model};
use crate::pipeline::{select_clip, CLIP_LEN};

use super::TrainError;

/// Labels from here up are reported as a separate sub-range; the sensor
/// barely separates them.
pub const HIGH_RANGE_START: f64 = 70.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub shape: String,
    pub label: Option<f64>,
    pub prediction: f64,
    pub source_indices: [usize; CLIP_LEN],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub n: usize,
    pub r_squared: f64,
    pub rmse: f64,
    pub spearman: f64,
    /// Mean of prediction minus label.
    pub mean_signed_error: f64,
}

impl Metrics {
    pub fn from_pairs(labels: &[f64], predictions: &[f64]) -> Self {
        let n = labels.len();
        let mse = if n == 0 {
            f64::NAN
        } else {
            labels.iter().zip(predictions).map(|(y, p)| (p - y).powi(2)).sum::<f64>() / n as f64
        };
        Metrics {
            n,
            r_squared: r_squared(labels, predictions),
            rmse: mse.sqrt(),
            spearman: spearman(labels, predictions),
            mean_signed_error: predictions.iter().zip(labels).map(|(p, y)| p - y).sum::<f64>() / n as f64,
        }
    }
}

/// `1 - SS_res / SS_tot`. A constant label set gives 1 for a perfect fit
/// and negative infinity otherwise.
pub fn r_squared(labels: &[f64], predictions: &[f64]) -> f64 {
    if labels.is_empty() {
        return f64::NAN;
    }
    let mean = labels.iter().sum::<f64>() / labels.len() as f64;
    let ss_tot: f64 = labels.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = labels.iter().zip(predictions).map(|(y, p)| (y - p).powi(2)).sum();
    match (ss_res == 0.0, ss_tot == 0.0) {
        (true, _) => 1.0,
        (false, true) => f64::NEG_INFINITY,
        _ => 1.0 - ss_res / ss_tot,
    }
}

pub fn rmse(labels: &[f64], predictions: &[f64]) -> f64 {
    Metrics::from_pairs(labels, predictions).rmse
}

/// Ranks starting at 1, ties sharing their average rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    if a.len() < 2 {
        return f64::NAN;
    }
    pearson(&ranks(a), &ranks(b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub name: String,
    pub predictions: Vec<Prediction>,
    /// Videos without a usable clip, with the reason.
    pub rejected: Vec<(String, String)>,
    /// Over labelled predictions.
    pub metrics: Metrics,
    /// Labelled predictions at or above [`HIGH_RANGE_START`].
    pub high_range: Metrics,
}

impl EvalReport {
    pub fn from_predictions(name: &str, predictions: Vec<Prediction>, rejected: Vec<(String, String)>) -> Self {
        let labelled: Vec<(f64, f64)> = predictions
            .iter()
            .filter_map(|p| p.label.map(|l| (l, p.prediction)))
            .collect();
        let split = |keep: &dyn Fn(f64) -> bool| {
            let (l, p): (Vec<f64>, Vec<f64>) = labelled.iter().filter(|(l, _)| keep(*l)).copied().unzip();
            Metrics::from_pairs(&l, &p)
        };
        EvalReport {
            name: name.to_string(),
            metrics: split(&|_| true),
            high_range: split(&|l| l >= HIGH_RANGE_START),
            predictions,
            rejected,
        }
    }

    pub fn n_videos(&self) -> usize {
        self.predictions.len()
    }

    pub fn summary_line(&self) -> String {
        format!("r2={:.6} rmse={:.6}", self.metrics.r_squared, self.metrics.rmse)
    }

    /// Longer human-readable summary.
    pub fn describe(&self) -> String {
        let m = &self.metrics;
        let h = &self.high_range;
        format!(
            "{}: n={} rejected={} r2={:.4} rmse={:.3} spearman={:.4} bias={:+.3} | >= {}: n={} rmse={:.3} bias={:+.3}",
            self.name,
            m.n,
            self.rejected.len(),
            m.r_squared,
            m.rmse,
            m.spearman,
            m.mean_signed_error,
            HIGH_RANGE_START,
            h.n,
            h.rmse,
            h.mean_signed_error
        )
    }

    /// Per-video rows followed by the summary as a `#` comment.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["id", "shape", "label", "prediction", "high_range"])?;
        for p in &self.predictions {
            let label = p.label.map_or("unknown".to_string(), |l| format!("{l}"));
            let high = p.label.is_some_and(|l| l >= HIGH_RANGE_START);
            w.write_record([
                p.id.as_str(),
                p.shape.as_str(),
                label.as_str(),
                &format!("{}", p.prediction),
                if high { "1" } else { "0" },
            ])?;
        }
        let mut inner = w.into_inner().map_err(|e| e.into_error())?;
        writeln!(inner, "# {}", self.summary_line())
    }

    pub fn save_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut bytes = Vec::new();
        self.write_csv(&mut bytes)?;
        std::fs::write(path, bytes)
    }
}

/// `(label, prediction)` rows of a saved report; unknown labels are `None`.
pub fn read_report_csv(path: &Path) -> Result<Vec<(String, Option<f64>, f64)>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("{}: missing column `{name}`", path.display()))
    };
    let (ci, cl, cp) = (col("id")?, col("label")?, col("prediction")?);
    let mut rows = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        let bad = |what: &str| format!("{}: row {}: bad {what}", path.display(), line + 1);
        let label = match row.get(cl).ok_or_else(|| bad("label"))? {
            "unknown" => None,
            s => Some(s.parse::<f64>().map_err(|_| bad("label"))?),
        };
        let prediction = row
            .get(cp)
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| bad("prediction"))?;
        rows.push((row.get(ci).unwrap_or_default().to_string(), label, prediction));
    }
    Ok(rows)
}

/// Predicts every listed video; those without a usable clip are returned
/// separately with the reason.
pub fn predict_videos(
    model: &Model,
    ds: &Dataset,
    indices: &[usize],
    tau: f64,
) -> Result<(Vec<Prediction>, Vec<(String, String)>), TrainError> {
    let mut preds = Vec::with_capacity(indices.len());
    let mut rejected = Vec::new();
    for &i in indices {
        let (record, video) = (&ds.records[i], &ds.videos[i]);
        let clip = match select_clip(video, tau) {
            Ok(c) => c,
            Err(e) => {
                rejected.push((record.id.clone(), e.to_string()));
                continue;
            }
        };
        let y = model.forward_clip(&clip)?;
        preds.push(Prediction {
            id: record.id.clone(),
            shape: record.shape.as_ref().map_or("unknown".to_string(), |s| s.tag.clone()),
            label: record.label.value(),
            prediction: predict_hardness(&y).value(),
            source_indices: clip.source_indices,
        });
    }
    Ok((preds, rejected))
}

pub fn evaluate(model: &Model, ds: &Dataset, indices: &[usize], tau: f64, name: &str) -> Result<EvalReport, TrainError> {
    if indices.is_empty() {
        return Err(TrainError::EmptySplit(name.to_string()));
    }
    let (preds, rejected) = predict_videos(model, ds, indices, tau)?;
    if !rejected.is_empty() {
        log::warn!("{name}: {} videos have no usable clip", rejected.len());
    }
    Ok(EvalReport::from_predictions(name, preds, rejected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pred(id: &str, label: f64, prediction: f64) -> Prediction {
        Prediction {
            id: id.into(),
            shape: "flat".into(),
            label: Some(label),
            prediction,
            source_indices: [0, 1, 2, 3, 4],
        }
    }

    #[test]
    fn perfect_predictions_summarise_exactly() {
        let preds = vec![pred("a", 10.0, 10.0), pred("b", 50.0, 50.0), pred("c", 80.0, 80.0)];
        let r = EvalReport::from_predictions("t", preds, Vec::new());
        assert_eq!(r.summary_line(), "r2=1.000000 rmse=0.000000");
        assert_eq!(r.metrics.spearman, 1.0);
        assert_eq!(r.high_range.n, 1);
    }

    #[test]
    fn predicting_the_mean_scores_zero() {
        let labels = [10.0, 20.0, 60.0];
        assert_eq!(r_squared(&labels, &[30.0; 3]), 0.0);
    }

    #[test]
    fn spearman_handles_ties_and_reversal() {
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[40.0, 30.0, 20.0, 10.0]) + 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[5.0, 1.0, 5.0, 2.0]), [3.5, 1.0, 3.5, 2.0]);
        // Monotone but nonlinear is still perfect.
        assert!((spearman(&[1.0, 2.0, 3.0], &[1.0, 8.0, 27.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let mut preds = vec![pred("a", 10.0, 12.5), pred("b", 75.0, 70.0)];
        preds[1].label = None;
        let r = EvalReport::from_predictions("t", preds, Vec::new());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        r.save_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.trim_end().ends_with(&r.summary_line()));
        let rows = read_report_csv(&path).unwrap();
        assert_eq!(rows, [("a".into(), Some(10.0), 12.5), ("b".into(), None, 70.0)]);
    }

    #[test]
    fn empty_report_reads_back_empty() {
        let r = EvalReport::from_predictions("t", Vec::new(), Vec::new());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        r.save_csv(&path).unwrap();
        assert!(read_report_csv(&path).unwrap().is_empty());
        assert!(r.metrics.rmse.is_nan());
    }

    /// Two-pass textbook formulas.
    fn reference(labels: &[f64], preds: &[f64]) -> (f64, f64) {
        let n = labels.len() as f64;
        let mut mean = 0.0;
        for y in labels {
            mean += y;
        }
        mean /= n;
        let (mut ss_tot, mut ss_res) = (0.0, 0.0);
        for i in 0..labels.len() {
            ss_tot += (labels[i] - mean) * (labels[i] - mean);
            ss_res += (labels[i] - preds[i]) * (labels[i] - preds[i]);
        }
        (1.0 - ss_res / ss_tot, (ss_res / n).sqrt())
    }

    proptest! {
        #[test]
        fn metrics_match_the_two_pass_reference(
            pairs in proptest::collection::vec((0.0..100.0f64, 0.0..100.0f64), 3..60)
        ) {
            let (labels, preds): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assume!(labels.iter().any(|l| (l - labels[0]).abs() > 1e-6));
            let (r2, e) = reference(&labels, &preds);
            let m = Metrics::from_pairs(&labels, &preds);
            prop_assert!((m.r_squared - r2).abs() <= 1e-12 * r2.abs().max(1.0));
            prop_assert!((m.rmse - e).abs() <= 1e-12 * e.max(1.0));
            prop_assert!(m.r_squared <= 1.0);
            prop_assert!(m.rmse >= 0.0);
        }

        #[test]
        fn spearman_is_invariant_to_monotone_maps(v in proptest::collection::vec(0.0..100.0f64, 3..40)) {
            let w: Vec<f64> = v.iter().map(|x| x.powi(3) + 2.0 * x).collect();
            let s = spearman(&v, &w);
            prop_assume!(s.is_finite());
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
    }
}

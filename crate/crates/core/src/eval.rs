//! Horizontal positioning error, nearest-rank percentiles and report CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::dataset::{Dataset, Encoding};
use crate::error::{bail, Result};
use crate::locnet::{param_count, LocNet};
use crate::nn::{Layer, Mode};

pub const PERCENTILE_RULE: &str = "nearest-rank: value at 1-based index ceil(p*n) of the ascending sort";

pub fn horizontal_error(pred: [f64; 2], truth: [f64; 2]) -> f64 {
    (pred[0] - truth[0]).hypot(pred[1] - truth[1])
}

/// Nearest-rank percentile of `sorted` (ascending), `p` in `(0, 1]`.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        bail!(InvalidArgument, "percentile of an empty error list");
    }
    if !(p > 0.0 && p <= 1.0) {
        bail!(InvalidArgument, "percentile fraction must lie in (0, 1], got {}", p);
    }
    let rank = (p * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

pub fn percentile(errors: &[f64], p: f64) -> Result<f64> {
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_sorted(&sorted, p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrpBreakdown {
    pub n_trp_available: usize,
    pub count: usize,
    pub p90_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Ascending.
    pub errors_m: Vec<f64>,
    pub p90_m: f64,
    pub mean_m: f64,
    pub median_m: f64,
    pub n_samples: usize,
    pub model_param_count: usize,
    pub encoding: Encoding,
    pub dataset_seed: u64,
    pub scenario_digest: [u8; 32],
    pub clean_labels: bool,
    pub per_trp: Vec<TrpBreakdown>,
}

impl EvalReport {
    /// `(error, cumulative fraction)` at every sample.
    pub fn cdf_points(&self) -> Vec<(f64, f64)> {
        let n = self.errors_m.len() as f64;
        self.errors_m
            .iter()
            .enumerate()
            .map(|(i, e)| (*e, (i + 1) as f64 / n))
            .collect()
    }

    pub fn p90_for(&self, n_trp_available: usize) -> Option<f64> {
        self.per_trp
            .iter()
            .find(|b| b.n_trp_available == n_trp_available)
            .map(|b| b.p90_m)
    }

    pub fn cdf_csv(&self) -> String {
        let mut s = String::from("error_m,fraction\n");
        for (e, f) in self.cdf_points() {
            let _ = writeln!(s, "{e:.6},{f:.6}");
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        let rows: [(&str, String); 10] = [
            ("n_samples", self.n_samples.to_string()),
            ("p90_m", format!("{:.6}", self.p90_m)),
            ("median_m", format!("{:.6}", self.median_m)),
            ("mean_m", format!("{:.6}", self.mean_m)),
            ("max_m", format!("{:.6}", self.errors_m.last().copied().unwrap_or(0.0))),
            ("model_param_count", self.model_param_count.to_string()),
            ("encoding", self.encoding.name().to_string()),
            ("dataset_seed", self.dataset_seed.to_string()),
            ("labels", if self.clean_labels { "clean" } else { "stored" }.to_string()),
            ("percentile_rule", PERCENTILE_RULE.to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k},{v}");
        }
        let digest: String = self.scenario_digest.iter().map(|b| format!("{b:02x}")).collect();
        let _ = writeln!(s, "scenario_digest,{digest}");
        s
    }

    pub fn per_trp_csv(&self) -> String {
        let mut s = String::from("n_trp,p90_m\n");
        for b in &self.per_trp {
            let _ = writeln!(s, "{},{:.6}", b.n_trp_available, b.p90_m);
        }
        s
    }

    /// Writes `cdf.csv`, `summary.csv` and optionally `per_trp.csv` into `dir`.
    pub fn write_csvs(&self, dir: &Path, per_trp: bool) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut files = vec![("cdf.csv", self.cdf_csv()), ("summary.csv", self.summary_csv())];
        if per_trp {
            files.push(("per_trp.csv", self.per_trp_csv()));
        }
        for (name, body) in files {
            crate::fsutil::write_atomic(&dir.join(name), |w| w.write_all(body.as_bytes()))?;
        }
        Ok(())
    }
}

/// Builds a report from predictions aligned with `dataset.samples`.
pub fn evaluate_predictions(
    predictions: &[[f64; 2]],
    dataset: &Dataset,
    clean_labels: bool,
    model_param_count: usize,
) -> Result<EvalReport> {
    if predictions.len() != dataset.len() || dataset.is_empty() {
        bail!(
            InvalidArgument,
            "{} predictions for {} samples",
            predictions.len(),
            dataset.len()
        );
    }
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut errors = Vec::with_capacity(predictions.len());
    for (p, s) in predictions.iter().zip(&dataset.samples) {
        let truth = if clean_labels { s.meta.clean_label } else { s.label };
        let e = horizontal_error(*p, [truth[0] as f64, truth[1] as f64]);
        if !e.is_finite() {
            bail!(Numeric, "non-finite prediction for sample {}", s.meta.ue_index);
        }
        errors.push(e);
        groups.entry(s.meta.n_trp_available as usize).or_default().push(e);
    }
    errors.sort_by(f64::total_cmp);
    let per_trp = groups
        .into_iter()
        .map(|(n, errs)| {
            Ok(TrpBreakdown {
                n_trp_available: n,
                count: errs.len(),
                p90_m: percentile(&errs, 0.9)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        p90_m: percentile_sorted(&errors, 0.9)?,
        median_m: percentile_sorted(&errors, 0.5)?,
        mean_m: errors.iter().sum::<f64>() / errors.len() as f64,
        n_samples: errors.len(),
        errors_m: errors,
        model_param_count,
        encoding: dataset.encoding,
        dataset_seed: dataset.seed,
        scenario_digest: dataset.scenario_digest,
        clean_labels,
        per_trp,
    })
}

/// Eval-mode predictions for every sample.
pub fn predict(model: &mut LocNet<f32>, dataset: &Dataset, batch_size: usize) -> Result<Vec<[f64; 2]>> {
    if dataset.dims != model.config().input_shape {
        bail!(
            Shape,
            "model expects {:?} inputs, dataset holds {:?}",
            model.config().input_shape,
            dataset.dims
        );
    }
    let idx: Vec<usize> = (0..dataset.len()).collect();
    let mut out = Vec::with_capacity(dataset.len());
    for chunk in idx.chunks(batch_size.max(1)) {
        let y = model.forward(&dataset.batch_inputs(chunk)?, Mode::Eval)?;
        out.extend(y.data().chunks(2).map(|p| [p[0] as f64, p[1] as f64]));
    }
    Ok(out)
}

pub fn evaluate(model: &mut LocNet<f32>, dataset: &Dataset, clean_labels: bool) -> Result<EvalReport> {
    let preds = predict(model, dataset, 256)?;
    evaluate_predictions(&preds, dataset, clean_labels, param_count(model))
}

/// p90 per run, one column per named report. Rows are `all` followed by each
/// TRP availability seen in any report.
pub fn compare_runs(runs: &[(&str, &EvalReport)]) -> String {
    let mut keys: Vec<usize> = runs
        .iter()
        .flat_map(|(_, r)| r.per_trp.iter().map(|b| b.n_trp_available))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    let mut s = String::from("n_trp");
    for (name, _) in runs {
        let _ = write!(s, ",{name}");
    }
    s.push('\n');
    s.push_str("all");
    for (_, r) in runs {
        let _ = write!(s, ",{:.6}", r.p90_m);
    }
    s.push('\n');
    for k in keys {
        let _ = write!(s, "{k}");
        for (_, r) in runs {
            match r.p90_for(k) {
                Some(v) => {
                    let _ = write!(s, ",{v:.6}");
                }
                None => s.push(','),
            }
        }
        s.push('\n');
    }
    s
}

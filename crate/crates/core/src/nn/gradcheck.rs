//! Central finite-difference gradient checking.
//!
//! A layer is checked against the scalar probe `L = sum_i r_i * y_i` with a
//! fixed random `r`, so `dL/dy = r`. Every parameter element and every input
//! element is perturbed by `+-h`; coordinates whose perturbation flips a
//! piecewise-linear branch (a ReLU crossing zero) are skipped and counted.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nn::{euclidean_loss, Layer, Mode, Tensor};

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Lower bound on the denominator of the relative error, so entries whose
    /// true gradient is zero are judged by absolute round-off instead.
    pub denom_floor: f64,
    pub mode: Mode,
    /// Test hook: scale analytic gradients by this factor before comparing.
    pub corrupt_analytic: Option<f64>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            denom_floor: 1e-4,
            mode: Mode::Train,
            corrupt_analytic: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub name: String,
    pub precision: &'static str,
    pub checked: usize,
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
    pub worst_coordinate: String,
    /// `(analytic, numeric)` at the worst coordinate.
    pub worst_values: (f64, f64),
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_rel_error < self.tolerance
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<16} {:>4} checked={:<5} skipped={:<3} max_rel_err={:.3e} worst={:<12} ({:+.4e} vs {:+.4e}) {}",
            self.name,
            self.precision,
            self.checked,
            self.skipped_kinks,
            self.max_rel_error,
            self.worst_coordinate,
            self.worst_values.0,
            self.worst_values.1,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

struct Tracker {
    checked: usize,
    skipped: usize,
    max_rel: f64,
    worst: String,
    worst_values: (f64, f64),
}

impl Tracker {
    fn new() -> Self {
        Self {
            checked: 0,
            skipped: 0,
            max_rel: 0.0,
            worst: String::from("-"),
            worst_values: (0.0, 0.0),
        }
    }

    fn record(&mut self, analytic: f64, numeric: f64, floor: f64, label: impl FnOnce() -> String) {
        let err = relative_error(analytic, numeric, floor);
        self.checked += 1;
        if err > self.max_rel || err.is_nan() {
            self.max_rel = if err.is_nan() { f64::INFINITY } else { err };
            self.worst = label();
            self.worst_values = (analytic, numeric);
        }
    }
}

fn probe<L: Layer<f64>>(layer: &mut L, input: &Tensor<f64>, r: &[f64], mode: Mode) -> Result<(f64, u64)> {
    let y = layer.forward(input, mode)?;
    let value = y.data().iter().zip(r).map(|(a, b)| a * b).sum();
    Ok((value, layer.kink_signature()))
}

/// Checks parameter and input gradients of `layer` at `input`.
pub fn check_layer<L: Layer<f64>>(
    name: &str,
    layer: &mut L,
    input: &Tensor<f64>,
    seed: u64,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    layer.zero_grad();
    let y = layer.forward(input, cfg.mode)?;
    let signature = layer.kink_signature();
    let r: Vec<f64> = (0..y.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let grad_out = Tensor::from_vec(y.shape(), r.clone())?;
    let corrupt = cfg.corrupt_analytic.unwrap_or(1.0);
    let grad_in: Vec<f64> = layer.backward(&grad_out)?.data().iter().map(|g| g * corrupt).collect();
    let param_grads: Vec<Vec<f64>> = layer
        .params()
        .iter()
        .map(|p| p.grad().unwrap_or(&[]).iter().map(|g| g * corrupt).collect())
        .collect();

    let h = cfg.step;
    let mut tracker = Tracker::new();
    for (pi, analytic) in param_grads.iter().enumerate() {
        for j in 0..analytic.len() {
            let original = layer.params()[pi].data()[j];
            layer.params_mut()[pi].data_mut()[j] = original + h;
            let (plus, sig_plus) = probe(layer, input, &r, cfg.mode)?;
            layer.params_mut()[pi].data_mut()[j] = original - h;
            let (minus, sig_minus) = probe(layer, input, &r, cfg.mode)?;
            layer.params_mut()[pi].data_mut()[j] = original;
            if sig_plus != signature || sig_minus != signature {
                tracker.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * h);
            tracker.record(analytic[j], numeric, cfg.denom_floor, || format!("param{pi}[{j}]"));
        }
    }
    let mut x = input.clone();
    for j in 0..x.len() {
        let original = x.data()[j];
        x.data_mut()[j] = original + h;
        let (plus, sig_plus) = probe(layer, &x, &r, cfg.mode)?;
        x.data_mut()[j] = original - h;
        let (minus, sig_minus) = probe(layer, &x, &r, cfg.mode)?;
        x.data_mut()[j] = original;
        if sig_plus != signature || sig_minus != signature {
            tracker.skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        tracker.record(grad_in[j], numeric, cfg.denom_floor, || format!("input[{j}]"));
    }
    // leave caches consistent with the unperturbed input
    layer.forward(input, cfg.mode)?;
    Ok(GradCheckReport {
        name: name.to_string(),
        precision: "f64",
        checked: tracker.checked,
        skipped_kinks: tracker.skipped,
        max_rel_error: tracker.max_rel,
        worst_coordinate: tracker.worst,
        worst_values: tracker.worst_values,
        tolerance: cfg.tolerance,
    })
}

/// Checks the gradient of [`euclidean_loss`] with respect to the predictions.
pub fn check_euclidean_loss(seed: u64, batch: usize, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pred = Tensor::from_vec(&[batch, 2], (0..2 * batch).map(|_| rng.gen_range(-5.0..5.0)).collect())?;
    let truth = Tensor::from_vec(&[batch, 2], (0..2 * batch).map(|_| rng.gen_range(-5.0..5.0)).collect())?;
    let (_, grad) = euclidean_loss(&pred, &truth)?;
    let corrupt = cfg.corrupt_analytic.unwrap_or(1.0);
    let h = cfg.step;
    let mut tracker = Tracker::new();
    let mut p = pred.clone();
    for j in 0..p.len() {
        let original = p.data()[j];
        p.data_mut()[j] = original + h;
        let (plus, _) = euclidean_loss(&p, &truth)?;
        p.data_mut()[j] = original - h;
        let (minus, _) = euclidean_loss(&p, &truth)?;
        p.data_mut()[j] = original;
        let numeric = (plus - minus) / (2.0 * h);
        tracker.record(grad.data()[j] * corrupt, numeric, cfg.denom_floor, || format!("pred[{j}]"));
    }
    Ok(GradCheckReport {
        name: "euclidean_loss".to_string(),
        precision: "f64",
        checked: tracker.checked,
        skipped_kinks: 0,
        max_rel_error: tracker.max_rel,
        worst_coordinate: tracker.worst,
        worst_values: tracker.worst_values,
        tolerance: cfg.tolerance,
    })
}

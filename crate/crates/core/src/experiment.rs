//! End-to-end recipes: input-richness comparison, variable TRP availability
//! and label-noise robustness. Each run trains on a seeded split and scores
//! the held-out test part.

use crate::dataset::{
    assemble, build_from_raw, generate_raw, split, Dataset, DatasetSpec, Encoding, NoisePlan, RawSample,
    SplitFractions, TrpPlan,
};
use crate::error::{bail, Result};
use crate::eval::{evaluate, EvalReport};
use crate::locnet::{train_with_progress, EpochRecord, LocNet, LocNetConfig, TrainConfig, TrainReport};
use crate::scenario::ScenarioConfig;

/// Everything one experiment seed needs besides the encoding and plans.
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    pub scenario: ScenarioConfig,
    /// Architecture; `input_shape` is replaced by the dataset's dims.
    pub locnet: LocNetConfig,
    pub train: TrainConfig,
    pub samples: usize,
    pub split: SplitFractions,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub label: String,
    pub model: LocNet<f32>,
    pub history: TrainReport,
    pub report: EvalReport,
}

/// Progress hook: run label and the finished epoch.
pub type Progress<'a> = &'a mut dyn FnMut(&str, &EpochRecord);

impl ExperimentSetup {
    fn spec(&self, encoding: Encoding, trp_plan: TrpPlan, noise_plan: NoisePlan, seed: u64) -> DatasetSpec {
        DatasetSpec {
            encoding,
            total_samples: self.samples,
            trp_plan,
            noise_plan,
            split: self.split,
            rng_seed: seed,
        }
    }

    /// Trains on the train/val parts of `dataset`; returns the model and its history.
    pub fn fit(&self, label: &str, dataset: &Dataset, seed: u64, progress: Progress) -> Result<(LocNet<f32>, TrainReport, Dataset)> {
        let (train_set, val_set, test_set) = split(dataset, self.split, seed)?;
        let mut config = self.locnet.clone();
        config.input_shape = dataset.dims;
        let mut model = LocNet::<f32>::new(config, seed)?;
        model.set_output_bias(train_set.label_mean());
        let tcfg = TrainConfig { seed, ..self.train.clone() };
        let history = train_with_progress(&mut model, &train_set, &val_set, &tcfg, |r| progress(label, r))?;
        Ok((model, history, test_set))
    }

    fn run(&self, label: &str, dataset: &Dataset, seed: u64, clean_eval: bool, progress: Progress) -> Result<RunOutcome> {
        let (mut model, history, test_set) = self.fit(label, dataset, seed, progress)?;
        let report = evaluate(&mut model, &test_set, clean_eval)?;
        Ok(RunOutcome {
            label: label.to_string(),
            model,
            history,
            report,
        })
    }

    fn raw(&self, seed: u64) -> Result<Vec<RawSample>> {
        generate_raw(&self.scenario, self.samples, seed)
    }
}

/// One model per encoding on the same channel draw, every TRP present.
pub fn input_richness(setup: &ExperimentSetup, encodings: &[Encoding], seed: u64, progress: Progress) -> Result<Vec<RunOutcome>> {
    let raw = setup.raw(seed)?;
    let n = setup.scenario.n_trp;
    encodings
        .iter()
        .map(|&enc| {
            let spec = setup.spec(enc, TrpPlan::full(n, setup.samples), NoisePlan::clean(setup.samples), seed);
            let ds = build_from_raw(&spec, &setup.scenario, &raw)?;
            setup.run(enc.name(), &ds, seed, false, progress)
        })
        .collect()
}

/// Re-encodes the UEs of `test_set` once per availability in `n_values`, so
/// every N′ is scored on the same positions. Labels are the clean positions.
pub fn paired_availability_set(
    raw: &[RawSample],
    test_set: &Dataset,
    n_values: &[usize],
    seed: u64,
) -> Result<Dataset> {
    let picked: Vec<RawSample> = test_set
        .samples
        .iter()
        .map(|s| raw[s.meta.ue_index as usize].clone())
        .collect();
    let zeros = vec![0.0; picked.len()];
    let mut samples = Vec::with_capacity(picked.len() * n_values.len());
    for &n in n_values {
        samples.extend(assemble(&picked, test_set.encoding, &vec![n; picked.len()], &zeros, seed)?);
    }
    Ok(Dataset {
        samples,
        ..test_set.subset(&[])
    })
}

/// Mixed-availability training for each encoding; every model is scored on
/// paired test sets at N′ = `min_available..=n_trp`.
pub fn variable_trp(
    setup: &ExperimentSetup,
    encodings: &[Encoding],
    min_available: usize,
    seed: u64,
    progress: Progress,
) -> Result<Vec<RunOutcome>> {
    let n = setup.scenario.n_trp;
    if min_available == 0 || min_available > n {
        bail!(InvalidArgument, "minimum availability {} outside 1..={}", min_available, n);
    }
    let raw = setup.raw(seed)?;
    let n_values: Vec<usize> = (min_available..=n).collect();
    encodings
        .iter()
        .map(|&enc| {
            let spec = setup.spec(enc, TrpPlan::mixed(n, setup.samples)?, NoisePlan::clean(setup.samples), seed);
            let ds = build_from_raw(&spec, &setup.scenario, &raw)?;
            let label = enc.name();
            let (mut model, history, test_set) = setup.fit(label, &ds, seed, progress)?;
            let paired = paired_availability_set(&raw, &test_set, &n_values, seed)?;
            let report = evaluate(&mut model, &paired, true)?;
            Ok(RunOutcome {
                label: label.to_string(),
                model,
                history,
                report,
            })
        })
        .collect()
}

/// Clean-label and mixed-noise training on the same channel draw and split;
/// both models are scored against clean test labels.
pub fn label_noise(setup: &ExperimentSetup, encoding: Encoding, seed: u64, progress: Progress) -> Result<[RunOutcome; 2]> {
    let raw = setup.raw(seed)?;
    let n = setup.scenario.n_trp;
    let clean = setup.spec(encoding, TrpPlan::full(n, setup.samples), NoisePlan::clean(setup.samples), seed);
    let noisy = DatasetSpec {
        noise_plan: NoisePlan::mixed(setup.samples),
        ..clean.clone()
    };
    let clean_run = setup.run("clean", &build_from_raw(&clean, &setup.scenario, &raw)?, seed, true, progress)?;
    let noisy_run = setup.run("noisy", &build_from_raw(&noisy, &setup.scenario, &raw)?, seed, true, progress)?;
    Ok([clean_run, noisy_run])
}

/// Mean of the per-N′ p90 values over `n_values`.
pub fn mean_p90(report: &EvalReport, n_values: &[usize]) -> Result<f64> {
    let mut sum = 0.0;
    for &n in n_values {
        sum += report
            .p90_for(n)
            .ok_or_else(|| crate::Error::InvalidArgument(format!("report has no N′ = {n} rows")))?;
    }
    Ok(sum / n_values.len().max(1) as f64)
}

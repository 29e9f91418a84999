//! Training samples: per-TRP channel measurements encoded as model inputs,
//! TRP-availability masking, label noise, splitting and the on-disk format.

mod encode;
mod io;
mod plan;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use encode::{
    decode_cir, encode, encode_cir, encode_cir_rsrp, encode_cir_rsrp_ratio, kept_trps, mask_trps, standardize_rsrp,
    unstandardize_rsrp, Encoding, LinkMeasurement, CIR_GAIN, RSRP_OFFSET_DB, RSRP_SCALE_DB, RSRP_SENTINEL_DBM,
};
pub use io::{deserialize, load, save, serialize, FORMAT_VERSION, MAGIC};
pub use plan::{add_label_noise, truncated_normal, NoisePlan, TrpPlan, NOISE_SIGMAS_M};

use crate::channel::{synthesize_link, CirTransform};
use crate::error::{bail, Result};
use crate::nn::Tensor;
use crate::rng::{derive_seed, label, stream};
use crate::scenario::{build_trp_grid, classify_links, drop_ues, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMeta {
    pub n_trp_available: u16,
    pub noise_sigma_m: f32,
    pub ue_index: u32,
    /// Seed of the per-sample fading stream.
    pub seed_trace: u64,
    /// Label before noise was added.
    pub clean_label: [f32; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// `[rows, taps, channels]`, row-major.
    pub input: Vec<f32>,
    pub label: [f32; 2],
    pub meta: SampleMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub test: f64,
    /// Share of the non-test samples used for validation.
    pub val: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { test: 0.2, val: 0.2 }
    }
}

impl SplitFractions {
    /// `(train, val, test)` sizes: test and validation counts are rounded to
    /// the nearest integer and the remainder goes to training.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        if !(0.0..1.0).contains(&self.test) || !(0.0..1.0).contains(&self.val) {
            bail!(Config, "split fractions must lie in [0, 1)");
        }
        let test = (self.test * n as f64).round() as usize;
        let val = (self.val * (n - test) as f64).round() as usize;
        let train = n - test - val;
        if train == 0 || val == 0 || test == 0 {
            bail!(InvalidArgument, "splitting {} samples leaves an empty partition", n);
        }
        Ok((train, val, test))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub encoding: Encoding,
    pub total_samples: usize,
    pub trp_plan: TrpPlan,
    pub noise_plan: NoisePlan,
    pub split: SplitFractions,
    pub rng_seed: u64,
}

impl DatasetSpec {
    /// Every TRP present and clean labels.
    pub fn simple(encoding: Encoding, n_trp: usize, total_samples: usize, rng_seed: u64) -> Self {
        Self {
            encoding,
            total_samples,
            trp_plan: TrpPlan::full(n_trp, total_samples),
            noise_plan: NoisePlan::clean(total_samples),
            split: SplitFractions::default(),
            rng_seed,
        }
    }

    pub fn validate(&self, n_trp: usize) -> Result<()> {
        if self.total_samples == 0 {
            bail!(Config, "dataset needs at least one sample");
        }
        self.trp_plan.validate(n_trp, self.total_samples)?;
        self.noise_plan.validate(self.total_samples)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub encoding: Encoding,
    pub dims: [usize; 3],
    pub scenario_digest: [u8; 32],
    pub seed: u64,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_trp(&self) -> usize {
        self.encoding.n_trp_from_dims(self.dims).unwrap_or(0)
    }

    pub fn taps(&self) -> usize {
        self.dims[1]
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            ..self.header_only()
        }
    }

    fn header_only(&self) -> Dataset {
        Dataset {
            encoding: self.encoding,
            dims: self.dims,
            scenario_digest: self.scenario_digest,
            seed: self.seed,
            samples: Vec::new(),
        }
    }

    /// Inputs as an `[N, channels, rows, taps]` tensor for the given samples.
    pub fn batch_inputs(&self, indices: &[usize]) -> Result<Tensor<f32>> {
        let [rows, taps, ch] = self.dims;
        let plane = rows * taps;
        let mut data = vec![0.0f32; indices.len() * ch * plane];
        for (b, &i) in indices.iter().enumerate() {
            let src = &self.samples[i].input;
            let dst = &mut data[b * ch * plane..(b + 1) * ch * plane];
            for p in 0..plane {
                for c in 0..ch {
                    dst[c * plane + p] = src[p * ch + c];
                }
            }
        }
        Tensor::from_vec(&[indices.len(), ch, rows, taps], data)
    }

    /// Labels as `[N, 2]`, either as stored or before noise.
    pub fn batch_labels(&self, indices: &[usize], clean: bool) -> Result<Tensor<f32>> {
        let data = indices
            .iter()
            .flat_map(|&i| {
                let s = &self.samples[i];
                if clean {
                    s.meta.clean_label
                } else {
                    s.label
                }
            })
            .collect();
        Tensor::from_vec(&[indices.len(), 2], data)
    }

    pub fn label_mean(&self) -> [f64; 2] {
        let n = self.samples.len().max(1) as f64;
        let (sx, sy) = self
            .samples
            .iter()
            .fold((0.0, 0.0), |(x, y), s| (x + s.label[0] as f64, y + s.label[1] as f64));
        [sx / n, sy / n]
    }

    /// Warning text when the file was generated under another scenario.
    pub fn scenario_mismatch(&self, config: &ScenarioConfig) -> Option<String> {
        (self.scenario_digest != config.digest()).then(|| {
            format!(
                "dataset scenario digest {} differs from the configured scenario {}",
                hex(&self.scenario_digest[..8]),
                hex(&config.digest()[..8])
            )
        })
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// One UE with every TRP link measured, before masking and encoding.
#[derive(Debug, Clone)]
pub struct RawSample {
    pub ue_index: u32,
    pub position: [f64; 2],
    pub links: Vec<LinkMeasurement>,
    pub seed_trace: u64,
}

/// Drops `count` UEs and synthesizes all of their TRP links.
pub fn generate_raw(scenario: &ScenarioConfig, count: usize, seed: u64) -> Result<Vec<RawSample>> {
    scenario.validate()?;
    let trps = build_trp_grid(scenario)?;
    let ues = drop_ues(scenario, count, &mut stream(seed, label::SCENARIO, 0))?;
    let los = classify_links(&ues, &trps, scenario, &mut stream(seed, label::LOS, 0))?;
    let transform = CirTransform::new(scenario.n_subcarriers);
    (0..count)
        .into_par_iter()
        .map(|i| {
            let seed_trace = derive_seed(seed, label::FADING, i as u64);
            let mut rng = stream(seed, label::FADING, i as u64);
            let links = trps
                .iter()
                .zip(&los[i])
                .map(|(trp, &is_los)| {
                    synthesize_link(&ues[i], trp, is_los, scenario, &transform, &mut rng)
                        .map(|r| LinkMeasurement::from(&r))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(RawSample {
                ue_index: i as u32,
                position: [ues[i].x_m, ues[i].y_m],
                links,
                seed_trace,
            })
        })
        .collect()
}

/// Masks, encodes and labels raw samples; `availability[i]` and `sigmas[i]`
/// apply to `raw[i]`.
pub fn assemble(
    raw: &[RawSample],
    encoding: Encoding,
    availability: &[usize],
    sigmas: &[f64],
    seed: u64,
) -> Result<Vec<Sample>> {
    if availability.len() != raw.len() || sigmas.len() != raw.len() {
        bail!(InvalidArgument, "one availability and one sigma per sample are required");
    }
    raw.par_iter()
        .zip(availability.par_iter().zip(sigmas.par_iter()))
        .map(|(r, (&avail, &sigma))| {
            let links = mask_trps(&r.links, avail)?;
            let input = encode(encoding, &links, avail)?;
            let mut rng = stream(seed, label::LABEL_NOISE, r.ue_index as u64);
            let noisy = add_label_noise(r.position, sigma, &mut rng)?;
            Ok(Sample {
                input,
                label: [noisy[0] as f32, noisy[1] as f32],
                meta: SampleMeta {
                    n_trp_available: avail as u16,
                    noise_sigma_m: sigma as f32,
                    ue_index: r.ue_index,
                    seed_trace: r.seed_trace,
                    clean_label: [r.position[0] as f32, r.position[1] as f32],
                },
            })
        })
        .collect()
}

/// Generates, masks, encodes and shuffles a full dataset.
pub fn build_dataset(spec: &DatasetSpec, scenario: &ScenarioConfig) -> Result<Dataset> {
    spec.validate(scenario.n_trp)?;
    let raw = generate_raw(scenario, spec.total_samples, spec.rng_seed)?;
    build_from_raw(spec, scenario, &raw)
}

/// Same as [`build_dataset`] for UEs already drawn with
/// `generate_raw(scenario, spec.total_samples, spec.rng_seed)`, so several
/// encodings or plans can share one channel draw.
pub fn build_from_raw(spec: &DatasetSpec, scenario: &ScenarioConfig, raw: &[RawSample]) -> Result<Dataset> {
    spec.validate(scenario.n_trp)?;
    if raw.len() != spec.total_samples {
        bail!(InvalidArgument, "{} raw samples for a {}-sample dataset", raw.len(), spec.total_samples);
    }
    let mut availability = spec.trp_plan.expand();
    availability.shuffle(&mut stream(spec.rng_seed, label::MASKING, 0));
    let mut sigmas = spec.noise_plan.expand();
    sigmas.shuffle(&mut stream(spec.rng_seed, label::LABEL_NOISE, u64::MAX));
    let mut samples = assemble(raw, spec.encoding, &availability, &sigmas, spec.rng_seed)?;
    samples.shuffle(&mut stream(spec.rng_seed, label::SHUFFLE, 0));
    Ok(Dataset {
        encoding: spec.encoding,
        dims: spec.encoding.dims(scenario.n_trp, scenario.cir_taps),
        scenario_digest: scenario.digest(),
        seed: spec.rng_seed,
        samples,
    })
}

/// Seeded disjoint `(train, val, test)` partition.
pub fn split(dataset: &Dataset, fractions: SplitFractions, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let (train, val, _) = fractions.sizes(dataset.len())?;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut stream(seed, label::SPLIT, 0));
    let (train_idx, rest) = order.split_at(train);
    let (val_idx, test_idx) = rest.split_at(val);
    Ok((dataset.subset(train_idx), dataset.subset(val_idx), dataset.subset(test_idx)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_scenario() -> ScenarioConfig {
        ScenarioConfig {
            n_subcarriers: 256,
            cir_taps: 16,
            ..ScenarioConfig::desk()
        }
    }

    #[test]
    fn split_sizes() {
        let f = SplitFractions::default();
        assert_eq!(f.sizes(80_000).unwrap(), (51_200, 12_800, 16_000));
        assert_eq!(f.sizes(10).unwrap(), (6, 2, 2));
        assert_eq!(f.sizes(5000).unwrap(), (3200, 800, 1000));
        assert!(f.sizes(2).is_err());
    }

    #[test]
    fn split_is_a_disjoint_cover() {
        let spec = DatasetSpec::simple(Encoding::Cir, 8, 23, 4);
        let ds = build_dataset(&spec, &tiny_scenario()).unwrap();
        let (a, b, c) = split(&ds, SplitFractions::default(), 9).unwrap();
        let mut ids: Vec<u32> = [a, b, c]
            .iter()
            .flat_map(|d| d.samples.iter().map(|s| s.meta.ue_index))
            .collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..23).collect::<Vec<_>>());
    }

    #[test]
    fn small_full_availability_dataset() {
        let spec = DatasetSpec::simple(Encoding::CirRsrpRatio, 8, 10, 1);
        let ds = build_dataset(&spec, &tiny_scenario()).unwrap();
        assert_eq!(ds.len(), 10);
        assert_eq!(ds.dims, [16, 16, 3]);
        for s in &ds.samples {
            assert!(s.input.chunks(3).all(|px| px[2] == 1.0));
            assert_eq!(s.label, s.meta.clean_label);
        }
    }

    #[test]
    fn mixed_plan_histogram_and_sentinels() {
        let total = 40;
        let spec = DatasetSpec {
            trp_plan: TrpPlan::mixed(8, total).unwrap(),
            ..DatasetSpec::simple(Encoding::CirRsrp, 8, total, 2)
        };
        let ds = build_dataset(&spec, &tiny_scenario()).unwrap();
        let mut hist = [0usize; 9];
        for s in &ds.samples {
            let avail = s.meta.n_trp_available as usize;
            hist[avail] += 1;
            let live = (0..8)
                .filter(|i| s.input[((2 * i + 1) * 16) * 2] != standardize_rsrp(RSRP_SENTINEL_DBM) as f32)
                .count();
            assert_eq!(live, avail);
        }
        assert_eq!(&hist[4..], &[4, 4, 4, 4, 24]);
    }

    #[test]
    fn batches_are_channel_first() {
        let spec = DatasetSpec::simple(Encoding::CirRsrpRatio, 8, 3, 5);
        let ds = build_dataset(&spec, &tiny_scenario()).unwrap();
        let x = ds.batch_inputs(&[2, 0]).unwrap();
        assert_eq!(x.shape(), &[2, 3, 16, 16]);
        let plane = 16 * 16;
        let s = &ds.samples[2].input;
        for p in [0, 17, 255] {
            for c in 0..3 {
                assert_eq!(x.data()[c * plane + p], s[p * 3 + c]);
            }
        }
        let y = ds.batch_labels(&[0], false).unwrap();
        assert_eq!(y.data(), &ds.samples[0].label);
    }

    #[test]
    fn scenario_digest_mismatch_is_reported() {
        let spec = DatasetSpec::simple(Encoding::Cir, 8, 2, 5);
        let cfg = tiny_scenario();
        let ds = build_dataset(&spec, &cfg).unwrap();
        assert!(ds.scenario_mismatch(&cfg).is_none());
        let other = ScenarioConfig {
            shadow_sigma_db: 6.0,
            ..cfg
        };
        assert!(ds.scenario_mismatch(&other).is_some());
    }
}

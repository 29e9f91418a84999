//! Run configuration shared by the command-line tool: scenario, model,
//! training and dataset sections, layered as built-in defaults < file < flags.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetSpec, Encoding, NoisePlan, SplitFractions, TrpPlan};
use crate::error::{bail, Result};
use crate::locnet::{LocNetConfig, TrainConfig};
use crate::scenario::ScenarioConfig;

/// Environment variable naming a config file used when `--config` is absent.
pub const CONFIG_ENV: &str = "LOCNET_CONFIG";

/// Shipped defaults, also embedded so the binary works without them on disk.
pub const DESK_TOML: &str = include_str!("../configs/desk.toml");
pub const PAPER_TOML: &str = include_str!("../configs/paper.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub encoding: Encoding,
    pub samples: usize,
    /// `full`, `mixed` or an explicit `n:count,...` list.
    pub trp_plan: String,
    /// `none`, `mixed` or an explicit `sigma:count,...` list.
    pub noise_plan: String,
    pub seed: u64,
    pub split: SplitFractions,
}

impl DatasetSection {
    pub fn spec(&self, n_trp: usize) -> Result<DatasetSpec> {
        let spec = DatasetSpec {
            encoding: self.encoding,
            total_samples: self.samples,
            trp_plan: TrpPlan::parse(&self.trp_plan, n_trp, self.samples)?,
            noise_plan: NoisePlan::parse(&self.noise_plan, self.samples)?,
            split: self.split,
            rng_seed: self.seed,
        };
        spec.validate(n_trp)?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub locnet: LocNetConfig,
    pub train: TrainConfig,
    pub dataset: DatasetSection,
}

impl RunConfig {
    /// Laptop-scale defaults.
    pub fn desk() -> Self {
        let scenario = ScenarioConfig::desk();
        let dims = Encoding::CirRsrp.dims(scenario.n_trp, scenario.cir_taps);
        Self {
            locnet: LocNetConfig::desk(dims),
            train: TrainConfig::default(),
            dataset: DatasetSection {
                encoding: Encoding::CirRsrp,
                samples: 5000,
                trp_plan: "full".into(),
                noise_plan: "none".into(),
                seed: 0,
                split: SplitFractions::default(),
            },
            scenario,
        }
    }

    /// Full-size defaults: 18 TRPs, 256 taps, 80000 samples.
    pub fn paper() -> Self {
        let scenario = ScenarioConfig::paper();
        let dims = Encoding::CirRsrp.dims(scenario.n_trp, scenario.cir_taps);
        let desk = Self::desk();
        Self {
            locnet: LocNetConfig::paper(dims),
            dataset: DatasetSection {
                samples: 80_000,
                ..desk.dataset
            },
            train: desk.train,
            scenario,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| crate::Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| crate::Error::Config(e.to_string()))
    }

    /// Starts from the embedded defaults and deep-merges the optional file
    /// on top; keys the file leaves out keep their default values.
    pub fn resolve(paper_scale: bool, file: Option<&Path>) -> Result<Self> {
        let base = if paper_scale { PAPER_TOML } else { DESK_TOML };
        let mut merged: toml::Value = toml::from_str(base).map_err(|e| crate::Error::Config(e.to_string()))?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| crate::Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            let overlay: toml::Value =
                toml::from_str(&text).map_err(|e| crate::Error::Config(format!("{}: {e}", path.display())))?;
            merge(&mut merged, overlay);
        }
        let config: Self = merged.try_into().map_err(|e: toml::de::Error| crate::Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.train.validate()?;
        if self.dataset.samples == 0 {
            bail!(Config, "dataset.samples must be positive");
        }
        Ok(())
    }
}

/// Recursive table merge; non-table values in `overlay` replace `base`.
pub fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

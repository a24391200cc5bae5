//! The resolved run configuration: defaults, then the `--config` file, then
//! command-line flags. Every command echoes it as `run_config.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use smiley_core::leakage::{
    ClassifierSpec, DEFAULT_LEAK_THRESHOLD_BITS, DEFAULT_NO_SIGNAL_THRESHOLD_BITS,
};
use smiley_core::lottery::{self, TruthPool};
use smiley_core::repro::ReproOptions;
use smiley_core::{Architecture, FeatureScheme, SimConfig, SplitStrategy, TrainConfig};

use crate::Failure;

pub const RUN_CONFIG_FILE: &str = "run_config.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub train: TrainConfig,
    pub architecture: Architecture,
    pub features: FeatureScheme,
    pub split: SplitStrategy,
    pub audit: AuditSection,
    pub lottery: LotterySection,
    pub repro: ReproSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSection {
    pub n_perm: usize,
    pub seed: u64,
    pub leak_threshold_bits: f64,
    pub no_signal_threshold_bits: f64,
    pub compare_with: Option<SplitStrategy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LotterySection {
    pub p_bit: f64,
    pub trials: u64,
    pub seed: u64,
    pub truth_pool: TruthPool,
}

/// Repro-only knobs; the dataset comes from `sim`, permutations from `audit`
/// and the Monte Carlo from `lottery`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReproSection {
    pub parity_train: TrainConfig,
    pub baseline_train: TrainConfig,
    pub mlp_hidden: usize,
    pub smiley_count: usize,
    pub export_dataset: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            train: TrainConfig::default(),
            architecture: Architecture::Linear,
            features: FeatureScheme::Parity,
            split: SplitStrategy::Sequential,
            audit: AuditSection::default(),
            lottery: LotterySection::default(),
            repro: ReproSection::default(),
        }
    }
}

impl Default for AuditSection {
    fn default() -> Self {
        Self {
            n_perm: 99,
            seed: 42,
            leak_threshold_bits: DEFAULT_LEAK_THRESHOLD_BITS,
            no_signal_threshold_bits: DEFAULT_NO_SIGNAL_THRESHOLD_BITS,
            compare_with: None,
        }
    }
}

impl Default for LotterySection {
    fn default() -> Self {
        Self {
            p_bit: lottery::claimed::P_BIT,
            trials: 10_000,
            seed: 42,
            truth_pool: TruthPool::Full,
        }
    }
}

impl Default for ReproSection {
    fn default() -> Self {
        let r = ReproOptions::default();
        Self {
            parity_train: r.parity_train,
            baseline_train: r.baseline_train,
            mlp_hidden: r.mlp_hidden,
            smiley_count: r.smiley_count,
            export_dataset: r.export_dataset,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Data(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// One seed for everything random.
    pub fn set_seed(&mut self, seed: u64) {
        self.sim.seed = seed;
        self.train.seed = seed;
        self.audit.seed = seed;
        self.lottery.seed = seed;
        self.repro.parity_train.seed = seed;
        self.repro.baseline_train.seed = seed;
    }

    pub fn classifier(&self) -> ClassifierSpec {
        ClassifierSpec::Model {
            architecture: self.architecture,
            scheme: self.features,
            model_seed: self.sim.seed,
            train: self.train.clone(),
        }
    }

    pub fn repro_options(&self) -> ReproOptions {
        ReproOptions {
            sim: self.sim.clone(),
            parity_train: self.repro.parity_train.clone(),
            baseline_train: self.repro.baseline_train.clone(),
            mlp_hidden: self.repro.mlp_hidden,
            smiley_count: self.repro.smiley_count,
            n_perm: self.audit.n_perm,
            audit_seed: self.audit.seed,
            lottery_p_bit: self.lottery.p_bit,
            lottery_trials: self.lottery.trials,
            export_dataset: self.repro.export_dataset,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), Failure> {
        let mut json = serde_json::to_string_pretty(self).expect("config serializes");
        json.push('\n');
        let path = dir.join(RUN_CONFIG_FILE);
        fs::write(&path, json).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
    }
}

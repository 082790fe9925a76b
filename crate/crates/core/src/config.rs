//! Run configuration: presets, flat TOML files, flag overrides, validation.
//!
//! A configuration file is a flat TOML document. Every key is optional
//! except `seed`; missing keys take the value of the preset named by the
//! optional `preset` key (`"desk"` when absent). Unknown keys are rejected.
//!
//! ```toml
//! preset = "desk"
//! seed = 7
//! policy = "vaoi"
//! p_bc = 0.1
//! alpha = 0.1
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{EhflError, Result};
use crate::learner::Init;
use crate::scheduler::{GroupSchedule, PolicyKind, SelectionRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Number of clients N.
    pub n_clients: usize,
    /// Number of epochs (global rounds) T.
    pub epochs: u64,
    /// Slots per epoch S.
    pub slots_per_epoch: u64,
    /// Slots and energy units of one local training.
    pub kappa: u32,
    /// Per-slot harvesting probability.
    pub p_bc: f64,
    pub e_max: u32,
    pub e_init: u32,
    /// SGD learning rate.
    pub gamma: f64,
    /// Participants per epoch under the version-age policy.
    pub k: usize,
    /// Feature-distance threshold.
    pub mu: f64,
    /// Dirichlet concentration of the label partition.
    pub alpha: f64,
    pub samples_per_client: usize,
    pub batch_size: usize,
    pub classes: usize,
    pub input_dim: usize,
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
    /// 1-based layer whose activations feed the feature distance; the
    /// output (logits) layer when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_layer: Option<usize>,
    pub init: Init,
    /// Standard deviation of the synthetic class means.
    pub class_spread: f64,
    pub test_per_class: usize,
    pub policy: PolicyKind,
    pub selection: SelectionRule,
    /// Number of FedBacys groups; `n_clients / k` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<u64>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Optional dataset file replacing the synthetic pool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_file: Option<PathBuf>,
    /// Accept `kappa >= slots_per_epoch` with a warning instead of failing.
    #[serde(default)]
    pub allow_long_training: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Desk,
    Paper,
}

impl Config {
    /// Laptop-scale defaults.
    pub fn desk(seed: u64) -> Self {
        Config {
            n_clients: 20,
            epochs: 200,
            slots_per_epoch: 30,
            kappa: 20,
            p_bc: 0.1,
            e_max: 25,
            e_init: 0,
            gamma: 0.01,
            k: 10,
            mu: 0.5,
            alpha: 0.1,
            samples_per_client: 60,
            batch_size: 3,
            classes: 4,
            input_dim: 16,
            hidden: vec![32],
            feature_layer: None,
            init: Init::Uniform,
            class_spread: 1.0,
            test_per_class: 100,
            policy: PolicyKind::Vaoi,
            selection: SelectionRule::TopK,
            groups: None,
            seed,
            output: None,
            data_file: None,
            allow_long_training: false,
        }
    }

    /// The full-scale experiment constants.
    pub fn paper(seed: u64) -> Self {
        Config {
            n_clients: 100,
            epochs: 500,
            slots_per_epoch: 30,
            kappa: 20,
            p_bc: 0.1,
            e_max: 25,
            e_init: 0,
            gamma: 0.01,
            k: 10,
            mu: 0.5,
            alpha: 0.1,
            samples_per_client: 300,
            batch_size: 15,
            classes: 10,
            input_dim: 32,
            hidden: vec![64],
            ..Config::desk(seed)
        }
    }

    pub fn preset(preset: Preset, seed: u64) -> Self {
        match preset {
            Preset::Desk => Config::desk(seed),
            Preset::Paper => Config::paper(seed),
        }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(self.input_dim);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(self.classes);
        sizes
    }

    pub fn feature_layer(&self) -> usize {
        self.feature_layer.unwrap_or(self.hidden.len() + 1)
    }

    pub fn groups(&self) -> u64 {
        self.groups
            .unwrap_or_else(|| (self.n_clients / self.k.max(1)).max(1) as u64)
    }

    pub fn group_schedule(&self) -> GroupSchedule {
        GroupSchedule {
            groups: self.groups(),
            slots_per_epoch: self.slots_per_epoch,
            kappa: self.kappa as u64,
        }
    }

    /// Checks every cross-field constraint, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, reason: String| Err(EhflError::config(key, reason));
        if self.n_clients == 0 {
            return fail("n_clients", "must be at least 1".into());
        }
        if self.epochs == 0 {
            return fail("epochs", "must be at least 1".into());
        }
        if self.slots_per_epoch == 0 {
            return fail("slots_per_epoch", "must be at least 1".into());
        }
        if self.kappa == 0 {
            return fail("kappa", "must be at least 1".into());
        }
        if self.e_max == 0 {
            return fail("e_max", "must be at least 1".into());
        }
        if self.kappa > self.e_max {
            return fail(
                "kappa",
                format!("kappa <= e_max violated ({} > {})", self.kappa, self.e_max),
            );
        }
        if self.e_init > self.e_max {
            return fail(
                "e_init",
                format!("exceeds e_max ({} > {})", self.e_init, self.e_max),
            );
        }
        if self.kappa as u64 >= self.slots_per_epoch {
            if self.allow_long_training {
                log::warn!(
                    "kappa ({}) >= slots_per_epoch ({}): trainings always span epochs",
                    self.kappa,
                    self.slots_per_epoch
                );
            } else {
                return fail(
                    "kappa",
                    format!(
                        "slots_per_epoch > kappa violated ({} <= {}); set allow_long_training to override",
                        self.slots_per_epoch, self.kappa
                    ),
                );
            }
        }
        if matches!(self.policy, PolicyKind::Fedbacys | PolicyKind::FedbacysOdd)
            && self.group_schedule().start_offset().is_none()
        {
            return fail(
                "kappa",
                format!(
                    "FedBacys needs slots_per_epoch >= kappa + 1 ({} < {})",
                    self.slots_per_epoch,
                    self.kappa + 1
                ),
            );
        }
        if !(0.0..=1.0).contains(&self.p_bc) {
            return fail("p_bc", format!("must lie in [0, 1], got {}", self.p_bc));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return fail(
                "gamma",
                format!("must be finite and non-negative, got {}", self.gamma),
            );
        }
        if self.k == 0 || self.k > self.n_clients {
            return fail(
                "k",
                format!("must lie in 1..={}, got {}", self.n_clients, self.k),
            );
        }
        if self.mu.is_nan() || self.mu < 0.0 {
            return fail("mu", format!("must be non-negative, got {}", self.mu));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return fail("alpha", format!("must be positive, got {}", self.alpha));
        }
        if self.samples_per_client == 0 {
            return fail("samples_per_client", "must be at least 1".into());
        }
        if self.batch_size == 0 || self.batch_size > self.samples_per_client {
            return fail(
                "batch_size",
                format!(
                    "must lie in 1..={}, got {}",
                    self.samples_per_client, self.batch_size
                ),
            );
        }
        if self.batch_size * self.kappa as usize != self.samples_per_client {
            log::warn!(
                "batch_size * kappa = {} differs from samples_per_client = {}; feature moments use samples seen",
                self.batch_size * self.kappa as usize,
                self.samples_per_client
            );
        }
        if self.classes < 2 {
            return fail("classes", "need at least 2".into());
        }
        if self.input_dim == 0 {
            return fail("input_dim", "must be at least 1".into());
        }
        if self.hidden.contains(&0) {
            return fail("hidden", "layer widths must be positive".into());
        }
        let layers = self.hidden.len() + 1;
        if let Some(l) = self.feature_layer {
            if l == 0 || l > layers {
                return fail(
                    "feature_layer",
                    format!("must lie in 1..={layers}, got {l}"),
                );
            }
        }
        if !(self.class_spread >= 0.0 && self.class_spread.is_finite()) {
            return fail("class_spread", "must be finite and non-negative".into());
        }
        if self.test_per_class == 0 {
            return fail("test_per_class", "must be at least 1".into());
        }
        if let Some(g) = self.groups {
            if g == 0 || g as usize > self.n_clients {
                return fail(
                    "groups",
                    format!("must lie in 1..={}, got {g}", self.n_clients),
                );
            }
        }
        Ok(())
    }

    /// Builds a configuration from layered TOML tables: preset, then
    /// `file`, then `overrides`.
    pub fn from_tables(file: toml::Table, overrides: toml::Table) -> Result<Config> {
        let mut merged = file;
        merged.extend(overrides);
        let preset = match merged.remove("preset") {
            None => Preset::Desk,
            Some(v) => {
                Preset::deserialize(v).map_err(|e| EhflError::config("preset", e.to_string()))?
            }
        };
        let Some(seed) = merged.get("seed") else {
            return Err(EhflError::config(
                "seed",
                "missing; every run needs an explicit seed",
            ));
        };
        let seed = seed
            .as_integer()
            .filter(|s| *s >= 0)
            .ok_or_else(|| EhflError::config("seed", "must be a non-negative integer"))?
            as u64;
        let base = toml::Table::try_from(Config::preset(preset, seed))
            .map_err(|e| EhflError::config("preset", e.to_string()))?;
        let mut full = base;
        full.extend(merged);
        let config: Config =
            toml::Value::Table(full)
                .try_into()
                .map_err(|e: toml::de::Error| {
                    let msg = e.message().to_string();
                    let key = msg.split('`').nth(1).unwrap_or("<config>").to_string();
                    EhflError::Config { key, reason: msg }
                })?;
        config.validate()?;
        Ok(config)
    }

    pub fn parse(text: &str, overrides: toml::Table) -> Result<Config> {
        let file: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| EhflError::config("<file>", e.message().to_string()))?;
        Config::from_tables(file, overrides)
    }

    pub fn load(path: &Path, overrides: toml::Table) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        Config::parse(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

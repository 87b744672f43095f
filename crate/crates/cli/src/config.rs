//! Run configuration read from a TOML file. Every field is optional; command
//! line flags override file values, which override the defaults.

use std::path::Path;

use anyhow::{bail, Context, Result};
use hemon_core::hemon::{ModelConfig, RegressionLoss};
use hemon_core::synth::SyntheticSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub synth: SynthSection,
    pub network: NetworkSection,
    pub model: ModelSection,
    pub split: SplitSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub nodes: Option<usize>,
    pub noise: Option<f64>,
    pub time_points: Option<usize>,
    pub categories: Option<usize>,
    pub readout_levels: Option<Vec<Vec<usize>>>,
    pub readout_gain: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub aggregate: Option<String>,
    pub fisher_z: Option<bool>,
    pub abs_weights: Option<bool>,
    pub epoch_category: Option<String>,
    pub epoch_quantile: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub variants: Option<Vec<String>>,
    pub embed_dim: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub lstm_layers: Option<usize>,
    pub dropout: Option<f64>,
    pub batch_size: Option<usize>,
    pub lr_init: Option<f64>,
    pub lr_min: Option<f64>,
    pub lr_patience: Option<usize>,
    pub max_epochs: Option<usize>,
    pub loss: Option<String>,
    pub share_lstm_across_levels: Option<bool>,
    pub max_rating: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub test_fraction: Option<f64>,
    pub val_fraction: Option<f64>,
}

pub const DEFAULT_TEST_FRACTION: f64 = 1.0 / 3.0;
pub const DEFAULT_VAL_FRACTION: f64 = 0.1;

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config `{}`", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config `{}`", path.display()))
    }

    pub fn synthetic_spec(&self, seed: u64) -> SyntheticSpec {
        let d = SyntheticSpec::default();
        let s = &self.synth;
        SyntheticSpec {
            nodes: s.nodes.unwrap_or(d.nodes),
            noise: s.noise.unwrap_or(d.noise),
            time_points: s.time_points.unwrap_or(d.time_points),
            categories: s.categories.unwrap_or(d.categories),
            readout_levels: s.readout_levels.clone().unwrap_or(d.readout_levels),
            readout_gain: s.readout_gain.unwrap_or(d.readout_gain),
            seed,
            ..d
        }
    }

    /// Regression config for `categories` outputs with the file overrides.
    pub fn model_config(&self, categories: usize, seed: u64) -> Result<ModelConfig> {
        let m = &self.model;
        let mut c = ModelConfig::regression(1, categories);
        if let Some(a) = m.max_rating {
            c.head = hemon_core::hemon::Head::Regression { categories, max_rating: a };
        }
        c.embed_dim = m.embed_dim.unwrap_or(c.embed_dim);
        c.hidden_dim = m.hidden_dim.unwrap_or(c.hidden_dim);
        c.lstm_layers = m.lstm_layers.unwrap_or(c.lstm_layers);
        c.dropout = m.dropout.unwrap_or(c.dropout);
        c.batch_size = m.batch_size.unwrap_or(c.batch_size);
        c.lr_init = m.lr_init.unwrap_or(c.lr_init);
        c.lr_min = m.lr_min.unwrap_or(c.lr_min);
        c.lr_patience = m.lr_patience.unwrap_or(c.lr_patience);
        c.max_epochs = m.max_epochs.unwrap_or(c.max_epochs);
        c.share_lstm_across_levels = m.share_lstm_across_levels.unwrap_or(c.share_lstm_across_levels);
        c.loss = match m.loss.as_deref() {
            None | Some("l1") => RegressionLoss::L1,
            Some("mse") => RegressionLoss::Mse,
            Some(other) => bail!("unknown loss `{other}` (expected l1 or mse)"),
        };
        c.seed = seed;
        c.validate()?;
        Ok(c)
    }

    pub fn max_rating(&self) -> f64 {
        self.model.max_rating.unwrap_or(hemon_core::connectome::DEFAULT_MAX_RATING)
    }

    pub fn test_fraction(&self) -> f64 {
        self.split.test_fraction.unwrap_or(DEFAULT_TEST_FRACTION)
    }

    pub fn val_fraction(&self) -> f64 {
        self.split.val_fraction.unwrap_or(DEFAULT_VAL_FRACTION)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_rejects_unknown_keys() {
        let c: RunConfig = toml::from_str(
            "seed = 4\n[synth]\nnodes = 12\n[model]\nhidden_dim = 8\nloss = \"mse\"\n[split]\ntest_fraction = 0.25\n",
        )
        .unwrap();
        assert_eq!(c.seed, Some(4));
        assert_eq!(c.synthetic_spec(4).nodes, 12);
        let m = c.model_config(2, 4).unwrap();
        assert_eq!((m.hidden_dim, m.loss, m.seed), (8, RegressionLoss::Mse, 4));
        assert_eq!(c.test_fraction(), 0.25);
        assert!(toml::from_str::<RunConfig>("[model]\nhiden_dim = 8\n").is_err());
    }

    #[test]
    fn unknown_loss_is_an_error() {
        let c: RunConfig = toml::from_str("[model]\nloss = \"huber\"\n").unwrap();
        assert!(c.model_config(1, 0).is_err());
    }
}

use std::path::Path;

use cams_core::hand::HandConfig;
use cams_core::metrics::MetricThresholds;
use cams_core::synth::{ContactWeights, FitWeights};
use serde::{Deserialize, Serialize};

use crate::args::{Ablations, WeightOverrides};
use crate::output::{CliError, CliResult};

/// Settings shared by every command, read from `--config` and then
/// overridden by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub frames_per_stage: Option<usize>,
    pub fps: f64,
    pub jitter: f64,
    pub hand: HandConfig,
    pub fit: FitWeights,
    pub contact: ContactWeights,
    pub metrics: MetricThresholds,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            frames_per_stage: None,
            fps: 30.0,
            jitter: 0.0,
            hand: HandConfig::default(),
            fit: FitWeights::default(),
            contact: ContactWeights::default(),
            metrics: MetricThresholds::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<RunConfig> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input("config", format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::input("config", format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, w: &WeightOverrides, ablations: &Ablations) {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut self.fit.lambda_tip, w.lambda_tip);
        set(&mut self.fit.lambda_joint, w.lambda_joint);
        set(&mut self.contact.lambda_contact, w.lambda_contact);
        set(&mut self.contact.lambda_trans, w.lambda_trans);
        set(&mut self.contact.lambda_v, w.lambda_v);
        set(&mut self.contact.lambda_a, w.lambda_a);
        if let Some(e) = w.fit_epochs {
            self.fit.epochs = e;
        }
        if let Some(e) = w.epochs_per_step {
            self.contact.epochs_per_step = e;
        }
        if ablations.literal_joint_loss {
            self.fit.literal_joint_loss = true;
        }
    }
}

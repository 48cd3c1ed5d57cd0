use serde::{Deserialize, Serialize};

use crate::crossbar::{ArrayGeometry, CrossbarState};
use crate::device::{DeviceParams, VariationSpec};
use crate::error::Result;
use crate::hopfield::{compute_threshold, run_learning_with_threshold, LearningTrace, NetworkConfig, Pattern};
use crate::rng::Streams;

/// A fully specified, replayable learning experiment on one array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub device: DeviceParams,
    pub variation: VariationSpec,
    pub network: NetworkConfig,
    pub seed: u64,
}

impl Scenario {
    pub fn new(name: impl Into<String>, device: DeviceParams, variation: VariationSpec, network: NetworkConfig, seed: u64) -> Self {
        Scenario {
            name: name.into(),
            device,
            variation,
            network,
            seed,
        }
    }

    /// The shipped calibrated device with default network settings.
    pub fn calibrated(cv: f64, seed: u64) -> Result<Self> {
        Ok(Scenario::new(
            format!("cv{cv:.2}_seed{seed}"),
            DeviceParams::calibrated(),
            VariationSpec::new(cv)?,
            NetworkConfig::default(),
            seed,
        ))
    }

    pub fn streams(&self) -> Streams {
        Streams::new(self.seed)
    }

    pub fn build_array(&self) -> Result<CrossbarState> {
        CrossbarState::build(ArrayGeometry::default(), self.device.clone(), self.variation, self.seed)
    }

    pub fn threshold(&self, array: &CrossbarState) -> Result<f64> {
        compute_threshold(&array.initial_resistances(), &self.network)
    }

    /// Pattern-1 learning on a fresh array.
    pub fn run_pattern_one(&self) -> Result<LearningTrace> {
        let mut array = self.build_array()?;
        let threshold = self.threshold(&array)?;
        let (pattern, missing) = Pattern::first();
        run_learning_with_threshold(
            &mut array,
            &pattern,
            missing,
            threshold,
            &self.network,
            &mut self.streams().indexed("program", 1),
        )
    }
}

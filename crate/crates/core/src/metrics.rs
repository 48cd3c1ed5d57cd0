//! Energy accounting, variation sweeps and read-voltage sensitivity.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::device::{split_energy, DeviceParams, VariationSpec};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::hopfield::{run_learning_with_threshold, LearningTrace, NetworkConfig, Pattern};
use crate::rng::RecordingRng;
use crate::scenario::Scenario;

/// Synaptic energy of a learning run. Wires and neurons are not included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub program_energy: f64,
    pub read_energy: f64,
    pub pcm_share: f64,
    pub transistor_share: f64,
    pub event_count: u64,
}

impl EnergyLedger {
    pub fn from_trace(trace: &LearningTrace, params: &DeviceParams) -> Result<Self> {
        let event_count = trace.program_events();
        let program_energy = event_count as f64 * params.e_prog;
        let read_energy: f64 = trace.epochs.iter().map(|e| e.read_energy).sum();
        let (pcm_share, transistor_share) = split_energy(program_energy + read_energy, params)?;
        Ok(EnergyLedger {
            program_energy,
            read_energy,
            pcm_share,
            transistor_share,
            event_count,
        })
    }

    pub fn total(&self) -> f64 {
        self.program_energy + self.read_energy
    }
}

/// Median of a sample; the mean of the two middle values for even sizes.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increase,
    Decrease,
    Either,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub scenario: String,
    pub seed: u64,
    pub base_v_read: f64,
    pub base_epochs: usize,
    /// Smallest `|dv| / v_read` in the grid that changes epochs-to-recall;
    /// `None` when nothing in the grid changes it.
    pub min_relative_perturbation: Option<f64>,
    pub direction: Option<Direction>,
}

/// How perturbed runs reproduce the base run's programming noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseReplay {
    /// Re-derive the same seeded substream.
    #[default]
    Reseed,
    /// Record the base run's draws and play them back.
    Tape,
}

/// Re-runs a scenario with the sensed read voltage scaled by `1 +/- delta`
/// while the threshold stays at its base value, and reports the smallest
/// `delta` that changes the number of epochs to recall.
pub fn read_voltage_sensitivity(
    scenario: &Scenario,
    grid: &[f64],
    replay: NoiseReplay,
    exec: Execution,
) -> Result<SensitivityResult> {
    if grid.is_empty() {
        return Err(Error::param("sensitivity grid is empty"));
    }
    if grid.iter().any(|&d| !(d > 0.0 && d < 1.0)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("sensitivity grid must be strictly ascending within (0, 1)"));
    }

    let base_array = scenario.build_array()?;
    let threshold = scenario.threshold(&base_array)?;
    let (pattern, missing) = Pattern::first();

    let mut recorder = RecordingRng::new(scenario.streams().indexed("program", 1));
    let base = run_learning_with_threshold(
        &mut base_array.clone(),
        &pattern,
        missing,
        threshold,
        &scenario.network,
        &mut recorder,
    )?;
    let base_epochs = base.epochs_to_recall.ok_or(Error::NonConvergent {
        max_epochs: scenario.network.max_epochs,
    })?;
    let tape = recorder.into_tape();

    let run_at = |v_read: f64| -> Result<Option<usize>> {
        let network = NetworkConfig {
            v_read,
            ..scenario.network.clone()
        };
        let mut array = base_array.clone();
        let trace = match replay {
            NoiseReplay::Reseed => run_learning_with_threshold(
                &mut array,
                &pattern,
                missing,
                threshold,
                &network,
                &mut scenario.streams().indexed("program", 1),
            )?,
            NoiseReplay::Tape => {
                run_learning_with_threshold(&mut array, &pattern, missing, threshold, &network, &mut tape.replay())?
            }
        };
        Ok(trace.epochs_to_recall)
    };

    let v0 = scenario.network.v_read;
    let outcomes = exec.map(grid, |&delta| -> Result<(bool, bool)> {
        let up = run_at(v0 * (1.0 + delta))?;
        let down = run_at(v0 * (1.0 - delta))?;
        Ok((up != Some(base_epochs), down != Some(base_epochs)))
    });

    let mut found = None;
    for (&delta, outcome) in grid.iter().zip(outcomes) {
        let (up, down) = outcome?;
        let direction = match (up, down) {
            (true, true) => Some(Direction::Either),
            (true, false) => Some(Direction::Increase),
            (false, true) => Some(Direction::Decrease),
            (false, false) => None,
        };
        if let Some(d) = direction {
            found = Some((delta, d));
            break;
        }
    }

    Ok(SensitivityResult {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        base_v_read: v0,
        base_epochs,
        min_relative_perturbation: found.map(|(d, _)| d),
        direction: found.map(|(_, d)| d),
    })
}

/// `0.01, 0.02, ..., 0.50`.
pub fn default_sensitivity_grid() -> Vec<f64> {
    (1..=50).map(|k| k as f64 / 100.0).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cv: f64,
    pub median_epochs: Option<f64>,
    pub median_energy: Option<f64>,
    pub n_seeds: usize,
    pub n_nonconverged: usize,
    /// Per-seed epochs to recall, in seed order.
    pub epochs: Vec<Option<usize>>,
    /// Per-seed total synaptic energy, in seed order.
    pub energies: Vec<f64>,
}

/// Pattern-1 learning for every (cv, seed). Rows are ordered by cv
/// descending; non-convergent runs are counted and left out of the medians.
pub fn variation_sweep(
    variations: &[VariationSpec],
    seeds: &[u64],
    device: &DeviceParams,
    network: &NetworkConfig,
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    if variations.is_empty() || seeds.is_empty() {
        return Err(Error::param("variation sweep needs at least one cv and one seed"));
    }
    let mut order: Vec<VariationSpec> = variations.to_vec();
    order.sort_by(|a, b| b.cv.total_cmp(&a.cv));

    let jobs: Vec<(usize, u64)> = (0..order.len())
        .flat_map(|v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let results = exec.map(&jobs, |&(v, seed)| {
        Scenario::new("sweep", device.clone(), order[v], network.clone(), seed).run_pattern_one()
    });

    let mut rows = Vec::with_capacity(order.len());
    let mut results = results.into_iter();
    for variation in &order {
        let mut epochs = Vec::with_capacity(seeds.len());
        let mut energies = Vec::with_capacity(seeds.len());
        for _ in seeds {
            let trace = results.next().expect("one result per job")?;
            epochs.push(trace.epochs_to_recall);
            energies.push(trace.total_energy);
        }
        let converged_epochs: Vec<f64> = epochs.iter().flatten().map(|&e| e as f64).collect();
        let converged_energy: Vec<f64> = epochs
            .iter()
            .zip(&energies)
            .filter(|(e, _)| e.is_some())
            .map(|(_, &j)| j)
            .collect();
        rows.push(SweepRow {
            cv: variation.cv,
            median_epochs: median(&converged_epochs),
            median_energy: median(&converged_energy),
            n_seeds: seeds.len(),
            n_nonconverged: epochs.iter().filter(|e| e.is_none()).count(),
            epochs,
            energies,
        });
    }
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: &str = "cv,median_epochs,median_energy_joules,n_seeds,n_nonconverged";

pub fn write_sweep_csv<W: Write>(out: &mut W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    let opt = |v: Option<f64>, f: fn(f64) -> String| v.map_or_else(|| "nan".to_string(), f);
    for r in rows {
        writeln!(
            out,
            "{:.2},{},{},{},{}",
            r.cv,
            opt(r.median_epochs, |v| format!("{v:.1}")),
            opt(r.median_energy, |v| format!("{v:.5e}")),
            r.n_seeds,
            r.n_nonconverged
        )?;
    }
    Ok(())
}

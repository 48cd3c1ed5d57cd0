//! Recurrent Hopfield network on the crossbar.
//!
//! Each epoch is an update phase (the complete pattern fires and every
//! co-firing synapse gets one gradual-SET pulse) followed by a recall phase
//! (the partial pattern fires; each silent neuron fires if its summed input
//! current exceeds the threshold). Membrane state does not carry between
//! epochs. The threshold is fixed per experiment from the initial RESET
//! resistances: `C` times the largest current any neuron could see with
//! `recall_on_count` other neurons firing.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crossbar::CrossbarState;
use crate::device::VariationSpec;
use crate::error::{Error, Result};
use crate::rng::Streams;

/// Binary image with pixel `k` wired to neuron `k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pattern {
    pixels: Vec<bool>,
}

impl Pattern {
    pub fn new(pixels: Vec<bool>) -> Self {
        Pattern { pixels }
    }

    pub fn from_on(len: usize, on: &[usize]) -> Result<Self> {
        let mut pixels = vec![false; len];
        for &k in on {
            *pixels
                .get_mut(k)
                .ok_or_else(|| Error::param(format!("pixel {k} out of range 0..{len}")))? = true;
        }
        Ok(Pattern { pixels })
    }

    /// ON pixels 1, 2, 3, 4, 6 (0-based 0, 1, 2, 3, 5); pixel 6 goes missing.
    pub fn first() -> (Pattern, usize) {
        (Pattern::from_on(10, &[0, 1, 2, 3, 5]).unwrap(), 5)
    }

    /// ON pixels 5, 7, 8, 9, 10 (0-based 4, 6, 7, 8, 9); pixel 5 goes missing.
    pub fn second() -> (Pattern, usize) {
        (Pattern::from_on(10, &[4, 6, 7, 8, 9]).unwrap(), 4)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[bool] {
        &self.pixels
    }

    pub fn on_set(&self) -> Vec<usize> {
        (0..self.pixels.len()).filter(|&k| self.pixels[k]).collect()
    }

    pub fn is_on(&self, k: usize) -> bool {
        self.pixels.get(k).copied().unwrap_or(false)
    }

    /// Copy with one ON pixel turned OFF.
    pub fn without(&self, k: usize) -> Result<Pattern> {
        if !self.is_on(k) {
            return Err(Error::Protocol(format!("missing pixel {k} is not ON in the pattern")));
        }
        let mut pixels = self.pixels.clone();
        pixels[k] = false;
        Ok(Pattern { pixels })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    /// Threshold safety factor `C`; must exceed 1.
    pub c_factor: f64,
    pub v_read: f64,
    /// Number of ON pixels in the recall input.
    pub recall_on_count: usize,
    pub max_epochs: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            c_factor: 2.0,
            v_read: 0.1,
            recall_on_count: 4,
            max_epochs: 100,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self, neurons: usize) -> Result<()> {
        if !(self.c_factor > 1.0 && self.c_factor.is_finite()) {
            return Err(Error::param(format!("c_factor must be > 1, got {}", self.c_factor)));
        }
        if !(self.v_read > 0.0 && self.v_read.is_finite()) {
            return Err(Error::param(format!("v_read must be > 0, got {}", self.v_read)));
        }
        if self.recall_on_count < 1 || self.recall_on_count >= neurons {
            return Err(Error::param(format!(
                "recall_on_count must be in 1..{neurons}, got {}",
                self.recall_on_count
            )));
        }
        if self.max_epochs < 1 {
            return Err(Error::param("max_epochs must be >= 1"));
        }
        Ok(())
    }
}

fn check_square(matrix: &[Vec<f64>]) -> Result<usize> {
    let n = matrix.len();
    if n == 0 || matrix.iter().any(|row| row.len() != n) {
        return Err(Error::param("threshold needs a non-empty square resistance matrix"));
    }
    Ok(n)
}

/// Largest recall current any neuron `i` could receive with `k` other
/// neurons firing, given resistances indexed `[wordline][bitline]`.
///
/// For each bitline the best subset is the `k` smallest resistances in that
/// column (excluding the diagonal). The selected terms are summed in wordline
/// order so the result is bit-identical to an exhaustive enumeration.
pub fn max_recall_current(resistances: &[Vec<f64>], k: usize, v_read: f64) -> Result<f64> {
    let n = check_square(resistances)?;
    if k < 1 || k >= n {
        return Err(Error::param(format!("subset size must be in 1..{n}, got {k}")));
    }
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        let mut rows: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        rows.sort_by(|&a, &b| resistances[a][i].total_cmp(&resistances[b][i]));
        rows.truncate(k);
        rows.sort_unstable();
        let g: f64 = rows.iter().map(|&j| 1.0 / resistances[j][i]).sum();
        best = best.max(v_read * g);
    }
    Ok(best)
}

/// Firing threshold, `C * max_recall_current`.
pub fn compute_threshold(initial_resistances: &[Vec<f64>], config: &NetworkConfig) -> Result<f64> {
    let max = max_recall_current(initial_resistances, config.recall_on_count, config.v_read)?;
    Ok(config.c_factor * max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochResult {
    /// 1-based.
    pub epoch_index: usize,
    pub programmed_cells: Vec<(usize, usize)>,
    pub recall_currents: BTreeMap<usize, f64>,
    /// Recall output: the partial pattern plus every neuron above threshold.
    pub fired_in_recall: Vec<usize>,
    pub recalled: bool,
    /// Fired in recall but OFF in the true pattern.
    pub false_firings: Vec<usize>,
    pub program_events: u64,
    pub program_energy: f64,
    pub read_energy: f64,
    pub epoch_energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningTrace {
    pub variation: VariationSpec,
    pub pattern: Vec<usize>,
    pub missing_pixel: usize,
    pub threshold: f64,
    pub epochs: Vec<EpochResult>,
    /// `None` if `max_epochs` ran out before recall.
    pub epochs_to_recall: Option<usize>,
    pub total_energy: f64,
    /// Normalized maps after each epoch, starting with the epoch-0 map.
    pub maps: Vec<Vec<Vec<f64>>>,
}

impl LearningTrace {
    pub fn converged(&self) -> bool {
        self.epochs_to_recall.is_some()
    }

    pub fn missing_currents(&self) -> Vec<f64> {
        self.epochs
            .iter()
            .map(|e| e.recall_currents.get(&self.missing_pixel).copied().unwrap_or(0.0))
            .collect()
    }

    pub fn program_events(&self) -> u64 {
        self.epochs.iter().map(|e| e.program_events).sum()
    }
}

/// One update phase followed by one recall phase.
pub fn train_epoch<R: Rng + ?Sized>(
    array: &mut CrossbarState,
    complete: &Pattern,
    partial: &Pattern,
    threshold: f64,
    config: &NetworkConfig,
    epoch_index: usize,
    rng: &mut R,
) -> Result<EpochResult> {
    let n = array.neurons()?;
    if complete.len() != n || partial.len() != n {
        return Err(Error::Protocol(format!(
            "patterns must have {n} pixels, got {} and {}",
            complete.len(),
            partial.len()
        )));
    }
    let full_on = complete.on_set();
    let partial_on = partial.on_set();
    if partial_on.iter().any(|&k| !complete.is_on(k)) || partial_on.len() >= full_on.len() {
        return Err(Error::Protocol(
            "recall input must be a strict subset of the training pattern".into(),
        ));
    }
    if partial_on.len() != config.recall_on_count {
        return Err(Error::Protocol(format!(
            "recall input has {} ON pixels, threshold assumes {}",
            partial_on.len(),
            config.recall_on_count
        )));
    }

    let update = array.apply_update_phase(&full_on, rng)?;
    let recall_currents = array.read_recall_currents(&partial_on, config.v_read)?;
    let read_energy = array.recall_read_energy(&partial_on, config.v_read)?;

    let mut fired = partial_on.clone();
    fired.extend(
        recall_currents
            .iter()
            .filter(|(_, &c)| c > threshold)
            .map(|(&i, _)| i),
    );
    fired.sort_unstable();
    let recalled = full_on.iter().all(|k| fired.contains(k));
    let false_firings = fired.iter().copied().filter(|&k| !complete.is_on(k)).collect();
    let program_events = update.programmed.len() as u64;

    Ok(EpochResult {
        epoch_index,
        programmed_cells: update.programmed,
        recall_currents,
        fired_in_recall: fired,
        recalled,
        false_firings,
        program_events,
        program_energy: update.energy,
        read_energy,
        epoch_energy: update.energy + read_energy,
    })
}

/// Trains until the missing pixel is recalled or `max_epochs` runs out, with
/// the threshold derived from the array's initial RESET resistances.
pub fn run_learning<R: Rng + ?Sized>(
    array: &mut CrossbarState,
    complete: &Pattern,
    missing_pixel: usize,
    config: &NetworkConfig,
    rng: &mut R,
) -> Result<LearningTrace> {
    config.validate(array.neurons()?)?;
    let threshold = compute_threshold(&array.initial_resistances(), config)?;
    run_learning_with_threshold(array, complete, missing_pixel, threshold, config, rng)
}

/// As [`run_learning`] with an externally fixed threshold.
pub fn run_learning_with_threshold<R: Rng + ?Sized>(
    array: &mut CrossbarState,
    complete: &Pattern,
    missing_pixel: usize,
    threshold: f64,
    config: &NetworkConfig,
    rng: &mut R,
) -> Result<LearningTrace> {
    config.validate(array.neurons()?)?;
    let partial = complete.without(missing_pixel)?;
    let mut epochs = Vec::new();
    let mut maps = vec![array.resistance_map(true)];
    let mut epochs_to_recall = None;
    for epoch in 1..=config.max_epochs {
        let result = train_epoch(array, complete, &partial, threshold, config, epoch, rng)?;
        maps.push(array.resistance_map(true));
        let recalled = result.recalled;
        epochs.push(result);
        if recalled {
            epochs_to_recall = Some(epoch);
            break;
        }
    }
    let total_energy = epochs.iter().map(|e| e.epoch_energy).sum();
    Ok(LearningTrace {
        variation: *array.variation(),
        pattern: complete.on_set(),
        missing_pixel,
        threshold,
        epochs,
        epochs_to_recall,
        total_energy,
        maps,
    })
}

/// Pattern 1 (pixel 6 missing) then, on the same array, pattern 2 (pixel 5
/// missing). Each pattern draws programming noise from its own substream.
pub fn run_two_pattern_protocol(
    array: &mut CrossbarState,
    config: &NetworkConfig,
    streams: &Streams,
) -> Result<(LearningTrace, LearningTrace)> {
    if array.neurons()? != 10 {
        return Err(Error::Protocol("the two-pattern protocol needs a 10x10 array".into()));
    }
    let (p1, m1) = Pattern::first();
    let (p2, m2) = Pattern::second();
    let t1 = run_learning(array, &p1, m1, config, &mut streams.indexed("program", 1))?;
    let t2 = run_learning(array, &p2, m2, config, &mut streams.indexed("program", 2))?;
    Ok((t1, t2))
}

/// A recall phase with no programming. Returns the partial pattern's ON set
/// plus every silent neuron whose current exceeds the threshold.
pub fn recall_only(
    array: &CrossbarState,
    partial: &Pattern,
    threshold: f64,
    config: &NetworkConfig,
) -> Result<Vec<usize>> {
    let on = partial.on_set();
    let currents = array.read_recall_currents(&on, config.v_read)?;
    let mut fired = on;
    fired.extend(currents.iter().filter(|(_, &c)| c > threshold).map(|(&i, _)| i));
    fired.sort_unstable();
    Ok(fired)
}

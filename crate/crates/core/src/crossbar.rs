//! R x C array of 1T1R PCM cells.
//!
//! Cell `(w, b)` sits at wordline `w` and bitline `b`. In the Hopfield mapping
//! neuron `i` drives WL `i` and senses BL `i`, so the synapse from firing
//! neuron `j` into neuron `i` is cell `(w = j, b = i)`. Indices are 0-based.
//! Sneak paths and wire resistance are not modeled.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::device::{sample_device_factor, CellState, DeviceParams, VariationSpec};
use crate::error::{Error, Result};
use crate::rng::Streams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        ArrayGeometry { rows: 10, cols: 10 }
    }
}

impl ArrayGeometry {
    pub fn square(n: usize) -> Self {
        ArrayGeometry { rows: n, cols: n }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::param(format!(
                "array geometry must be non-empty, got {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
}

/// Result of one update phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateOutcome {
    /// Programmed cells as `(wordline, bitline)`, row-major.
    pub programmed: Vec<(usize, usize)>,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossbarState {
    geometry: ArrayGeometry,
    cells: Vec<CellState>,
    params: DeviceParams,
    variation: VariationSpec,
}

impl CrossbarState {
    /// Builds an array with fresh device factors and a full RESET of every
    /// cell. Each cell draws from its own substream of `seed`.
    pub fn build(
        geometry: ArrayGeometry,
        params: DeviceParams,
        variation: VariationSpec,
        seed: u64,
    ) -> Result<Self> {
        geometry.validate()?;
        params.validate()?;
        variation.validate()?;
        let streams = Streams::new(seed);
        let n = geometry.rows * geometry.cols;
        let mut cells = Vec::with_capacity(n);
        for idx in 0..n as u64 {
            let factor = sample_device_factor(&params, &variation, &mut streams.indexed("device-factor", idx))?;
            let mut cell = CellState::new(&params, factor);
            cell.apply_full_reset(&params, &variation, &mut streams.indexed("initial-reset", idx))?;
            cells.push(cell);
        }
        Ok(CrossbarState {
            geometry,
            cells,
            params,
            variation,
        })
    }

    pub fn geometry(&self) -> ArrayGeometry {
        self.geometry
    }

    pub fn params(&self) -> &DeviceParams {
        &self.params
    }

    pub fn variation(&self) -> &VariationSpec {
        &self.variation
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn cell(&self, w: usize, b: usize) -> &CellState {
        &self.cells[w * self.geometry.cols + b]
    }

    pub fn cell_mut(&mut self, w: usize, b: usize) -> &mut CellState {
        &mut self.cells[w * self.geometry.cols + b]
    }

    /// Neuron count; requires a square array.
    pub fn neurons(&self) -> Result<usize> {
        if !self.geometry.is_square() {
            return Err(Error::param(format!(
                "Hopfield mapping needs a square array, got {}x{}",
                self.geometry.rows, self.geometry.cols
            )));
        }
        Ok(self.geometry.rows)
    }

    fn check_firing(&self, firing: &[usize]) -> Result<usize> {
        let n = self.neurons()?;
        if let Some(&bad) = firing.iter().find(|&&i| i >= n) {
            return Err(Error::param(format!("neuron index {bad} out of range 0..{n}")));
        }
        Ok(n)
    }

    /// Update phase: every cell at the intersection of two firing neurons'
    /// lines (diagonal included) receives one gradual-SET pulse.
    pub fn apply_update_phase<R: Rng + ?Sized>(
        &mut self,
        firing: &[usize],
        rng: &mut R,
    ) -> Result<UpdateOutcome> {
        self.check_firing(firing)?;
        let mut active = firing.to_vec();
        active.sort_unstable();
        active.dedup();
        let mut programmed = Vec::with_capacity(active.len() * active.len());
        let mut events = 0u64;
        for &w in &active {
            for &b in &active {
                let params = &self.params;
                let idx = w * self.geometry.cols + b;
                self.cells[idx].apply_gradual_set(params, rng);
                programmed.push((w, b));
                events += 1;
            }
        }
        Ok(UpdateOutcome {
            programmed,
            energy: events as f64 * self.params.e_prog,
        })
    }

    /// Recall-phase input current of every non-firing neuron,
    /// `I_i = v_read * sum_{j in firing} 1 / R(w = j, b = i)`.
    /// Firing neurons have their sense node at 0 V and get no entry.
    pub fn read_recall_currents(&self, firing: &[usize], v_read: f64) -> Result<BTreeMap<usize, f64>> {
        let n = self.check_firing(firing)?;
        let mut active = vec![false; n];
        for &j in firing {
            active[j] = true;
        }
        let mut out = BTreeMap::new();
        for i in (0..n).filter(|&i| !active[i]) {
            let conductance: f64 = (0..n)
                .filter(|&j| active[j])
                .map(|j| 1.0 / self.cell(j, i).resistance())
                .sum();
            out.insert(i, v_read * conductance);
        }
        Ok(out)
    }

    /// Energy dissipated while sensing one recall phase.
    pub fn recall_read_energy(&self, firing: &[usize], v_read: f64) -> Result<f64> {
        let n = self.check_firing(firing)?;
        let mut active = vec![false; n];
        for &j in firing {
            active[j] = true;
        }
        let mut e = 0.0;
        for i in (0..n).filter(|&i| !active[i]) {
            for j in (0..n).filter(|&j| active[j]) {
                e += v_read * v_read / self.cell(j, i).resistance() * self.params.read_duration;
            }
        }
        Ok(e)
    }

    /// Resistance map, one row per wordline. Normalized maps divide by each
    /// cell's initial RESET resistance.
    pub fn resistance_map(&self, normalized: bool) -> Vec<Vec<f64>> {
        self.cells
            .chunks(self.geometry.cols)
            .map(|row| {
                row.iter()
                    .map(|c| {
                        if normalized {
                            c.normalized_resistance()
                        } else {
                            c.resistance()
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Initial RESET resistances, one row per wordline.
    pub fn initial_resistances(&self) -> Vec<Vec<f64>> {
        self.cells
            .chunks(self.geometry.cols)
            .map(|row| {
                row.iter()
                    .map(|c| c.initial_reset_resistance().unwrap_or(c.resistance()))
                    .collect()
            })
            .collect()
    }
}

/// Formats a value with 6 significant digits in scientific notation.
pub fn fmt_sig6(v: f64) -> String {
    format!("{v:.5e}")
}

/// Writes a map as CSV: header `wl,bl1..blN`, one row per wordline,
/// neuron/line numbers 1-based.
pub fn write_map_csv<W: Write>(out: &mut W, map: &[Vec<f64>]) -> std::io::Result<()> {
    let cols = map.first().map_or(0, Vec::len);
    let header: Vec<String> = std::iter::once("wl".to_string())
        .chain((1..=cols).map(|b| format!("bl{b}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (w, row) in map.iter().enumerate() {
        let fields: Vec<String> = row.iter().map(|&v| fmt_sig6(v)).collect();
        writeln!(out, "{},{}", w + 1, fields.join(","))?;
    }
    Ok(())
}

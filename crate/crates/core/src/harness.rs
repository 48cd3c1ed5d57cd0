//! Device characterization, epoch calibration and figure-data drivers.
//!
//! Every CSV starts with `#`-prefixed provenance lines (seed, config hash,
//! version) followed by a header row. JSON documents carry the same
//! provenance under a `provenance` key.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::crossbar::{fmt_sig6, write_map_csv, CrossbarState};
use crate::device::{sample_device_factor, CellState, DeviceParams, VariationSpec};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::hopfield::{max_recall_current, run_two_pattern_protocol, LearningTrace, Pattern};
use crate::metrics::{
    median, read_voltage_sensitivity, variation_sweep, write_sweep_csv, EnergyLedger, NoiseReplay, SensitivityResult,
};
use crate::rng::Streams;
use crate::scenario::Scenario;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
}

impl Provenance {
    pub fn new(seed: u64, config_hash: impl Into<String>) -> Self {
        Provenance {
            seed,
            config_hash: config_hash.into(),
            version: crate::VERSION.to_string(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Provenance { seed, ..self.clone() }
    }

    pub fn write_header<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "# seed={}", self.seed)?;
        writeln!(out, "# config_hash={}", self.config_hash)?;
        writeln!(out, "# version={}", self.version)
    }
}

fn write_file(scenario: &str, path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Error::io(scenario, path, e))?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(scenario, parent, e))?;
    }
    fs::write(path, buf).map_err(|e| Error::io(scenario, path, e))
}

fn write_csv(
    scenario: &str,
    path: &Path,
    prov: &Provenance,
    f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
) -> Result<()> {
    write_file(scenario, path, |buf| {
        prov.write_header(buf)?;
        f(buf)
    })
}

fn write_json<T: Serialize>(scenario: &str, path: &Path, prov: &Provenance, body: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        provenance: &'a Provenance,
        #[serde(flatten)]
        body: &'a T,
    }
    let text = serde_json::to_string_pretty(&Doc { provenance: prov, body })
        .map_err(|e| Error::io(scenario, path, std::io::Error::other(e)))?;
    write_file(scenario, path, |buf| writeln!(buf, "{text}"))
}

// ---------------------------------------------------------------------------
// Characterization

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CharacterizeOptions {
    /// SET/RESET pairs in the binary cycling sequence.
    pub cycles: usize,
    /// Cells in the array-level binary distribution.
    pub cells: usize,
    /// Repeated RESET + gradual-SET staircases.
    pub staircases: usize,
    /// Initial RESET spread of the characterized array.
    pub cv: f64,
}

impl Default for CharacterizeOptions {
    fn default() -> Self {
        CharacterizeOptions {
            cycles: 10,
            cells: 100,
            staircases: 3,
            cv: 0.24,
        }
    }
}

impl CharacterizeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.cycles < 1 || self.cells < 1 || self.staircases < 1 {
            return Err(Error::param("cycles, cells and staircases must all be >= 1"));
        }
        VariationSpec::new(self.cv).map(|_| ())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryPoint {
    /// 1-based; odd pulses are SET, even pulses RESET.
    pub pulse: usize,
    pub set: bool,
    pub resistance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Characterization {
    pub binary: Vec<BinaryPoint>,
    /// Per-cell `(set, reset)` resistances across the array.
    pub distribution: Vec<(f64, f64)>,
    /// Each staircase: the RESET resistance followed by one value per gradual-SET pulse.
    pub staircases: Vec<Vec<f64>>,
}

/// Binary SET/RESET cycling of one cell, the array-level binary
/// distribution, and repeated RESET-then-gradual-SET staircases.
pub fn characterize_device(params: &DeviceParams, opts: &CharacterizeOptions, seed: u64) -> Result<Characterization> {
    params.validate()?;
    opts.validate()?;
    let variation = VariationSpec::new(opts.cv)?;
    let streams = Streams::new(seed);

    let mut rng = streams.stream("characterize/binary");
    let mut cell = CellState::new(params, sample_device_factor(params, &variation, &mut rng)?);
    let mut binary = Vec::with_capacity(2 * opts.cycles);
    for pulse in 1..=2 * opts.cycles {
        let set = pulse % 2 == 1;
        let p = if set { params.set_pulse } else { params.reset_pulse };
        cell.apply_pulse(&p, params, &variation, &mut rng)?;
        binary.push(BinaryPoint {
            pulse,
            set,
            resistance: cell.resistance(),
        });
    }

    let mut distribution = Vec::with_capacity(opts.cells);
    for k in 0..opts.cells as u64 {
        let mut rng = streams.indexed("characterize/array", k);
        let mut cell = CellState::new(params, sample_device_factor(params, &variation, &mut rng)?);
        cell.apply_pulse(&params.set_pulse, params, &variation, &mut rng)?;
        let set = cell.resistance();
        cell.apply_pulse(&params.reset_pulse, params, &variation, &mut rng)?;
        distribution.push((set, cell.resistance()));
    }

    let mut rng = streams.stream("characterize/staircase");
    let mut cell = CellState::new(params, 1.0);
    let mut staircases = Vec::with_capacity(opts.staircases);
    for _ in 0..opts.staircases {
        cell.apply_pulse(&params.reset_pulse, params, &VariationSpec::new(0.0)?, &mut rng)?;
        let mut levels = vec![cell.resistance()];
        for _ in 0..params.gradual_levels {
            cell.apply_pulse(&params.gradual_set_pulse, params, &variation, &mut rng)?;
            levels.push(cell.resistance());
        }
        staircases.push(levels);
    }

    Ok(Characterization {
        binary,
        distribution,
        staircases,
    })
}

/// Writes `fig2b.csv`, `fig2c.csv` and `fig2d.csv`.
pub fn write_characterization(ch: &Characterization, out: &Path, prov: &Provenance) -> Result<Vec<PathBuf>> {
    let name = "characterize";
    let b = out.join("fig2b.csv");
    write_csv(name, &b, prov, |w| {
        writeln!(w, "pulse,kind,resistance_ohms")?;
        for p in &ch.binary {
            writeln!(w, "{},{},{}", p.pulse, if p.set { "set" } else { "reset" }, fmt_sig6(p.resistance))?;
        }
        Ok(())
    })?;
    let c = out.join("fig2c.csv");
    write_csv(name, &c, prov, |w| {
        writeln!(w, "cell,set_ohms,reset_ohms")?;
        for (k, (s, r)) in ch.distribution.iter().enumerate() {
            writeln!(w, "{},{},{}", k + 1, fmt_sig6(*s), fmt_sig6(*r))?;
        }
        Ok(())
    })?;
    let d = out.join("fig2d.csv");
    write_csv(name, &d, prov, |w| {
        writeln!(w, "cycle,pulse,resistance_ohms")?;
        for (c, stair) in ch.staircases.iter().enumerate() {
            for (p, r) in stair.iter().enumerate() {
                writeln!(w, "{},{},{}", c + 1, p, fmt_sig6(*r))?;
            }
        }
        Ok(())
    })?;
    Ok(vec![b, c, d])
}

// ---------------------------------------------------------------------------
// Calibration

/// Candidate values for each tunable; the search is their full product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationGrid {
    pub step_scale: Vec<f64>,
    pub first_step_scale: Vec<f64>,
    pub sigma_c2c: Vec<f64>,
    pub device_variance_share: Vec<f64>,
}

impl Default for CalibrationGrid {
    fn default() -> Self {
        CalibrationGrid {
            step_scale: (6..=20).map(|k| k as f64 / 100.0).collect(),
            first_step_scale: (6..=20).map(|k| k as f64).collect(),
            sigma_c2c: vec![0.0, 0.02, 0.05],
            device_variance_share: vec![0.8],
        }
    }
}

impl CalibrationGrid {
    fn candidates(&self, base: &DeviceParams) -> Vec<DeviceParams> {
        let mut out = Vec::new();
        for &step_scale in &self.step_scale {
            for &first_step_scale in &self.first_step_scale {
                for &sigma_c2c in &self.sigma_c2c {
                    for &device_variance_share in &self.device_variance_share {
                        out.push(DeviceParams {
                            step_scale,
                            first_step_scale,
                            sigma_c2c,
                            device_variance_share,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub cv: f64,
    pub target: f64,
    pub median_epochs: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub params: DeviceParams,
    /// `sum |median - target|` over the targets.
    pub residual: f64,
    pub points: Vec<CalibrationPoint>,
    pub candidates_evaluated: usize,
}

/// Median epochs to recall of each target cv, with non-convergent runs
/// counted at `max_epochs + 1`.
fn evaluate(
    params: &DeviceParams,
    network: &crate::hopfield::NetworkConfig,
    targets: &[(f64, f64)],
    seeds: &[u64],
) -> Result<(f64, f64, Vec<CalibrationPoint>)> {
    let mut residual = 0.0;
    let mut mean_dev = 0.0;
    let mut points = Vec::with_capacity(targets.len());
    for &(cv, target) in targets {
        let variation = VariationSpec::new(cv)?;
        let mut epochs = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let trace = Scenario::new("calibrate", params.clone(), variation, network.clone(), seed).run_pattern_one()?;
            epochs.push(trace.epochs_to_recall.unwrap_or(network.max_epochs + 1) as f64);
        }
        let med = median(&epochs);
        residual += (med.unwrap_or(f64::INFINITY) - target).abs();
        mean_dev += (epochs.iter().sum::<f64>() / epochs.len() as f64 - target).abs();
        points.push(CalibrationPoint {
            cv,
            target,
            median_epochs: med,
        });
    }
    Ok((residual, mean_dev, points))
}

/// Grid search over the gradual-SET schedule, cycle noise and device/cycle
/// split minimizing `sum |median_epochs(cv) - target(cv)|`; ties go to the
/// smaller mean-epoch deviation, then to grid order. The input parameters are
/// returned unchanged when they already meet every target.
pub fn calibrate_epochs(
    base: &DeviceParams,
    network: &crate::hopfield::NetworkConfig,
    targets: &[(f64, f64)],
    grid: &CalibrationGrid,
    seeds: &[u64],
    exec: Execution,
) -> Result<CalibrationResult> {
    if targets.is_empty() || seeds.is_empty() {
        return Err(Error::param("calibration needs at least one target and one seed"));
    }
    base.validate()?;
    let (residual, _, points) = evaluate(base, network, targets, seeds)?;
    if residual == 0.0 {
        return Ok(CalibrationResult {
            params: base.clone(),
            residual,
            points,
            candidates_evaluated: 1,
        });
    }

    let mut candidates = vec![base.clone()];
    candidates.extend(grid.candidates(base));
    let scored = exec.map(&candidates, |p| evaluate(p, network, targets, seeds));

    let mut best: Option<(usize, f64, f64, Vec<CalibrationPoint>)> = None;
    for (k, s) in scored.into_iter().enumerate() {
        let (r, m, pts) = s?;
        let better = match &best {
            None => true,
            Some((_, br, bm, _)) => r < *br || (r == *br && m < *bm),
        };
        if better {
            best = Some((k, r, m, pts));
        }
    }
    let (k, residual, _, points) = best.expect("at least the base candidate");
    Ok(CalibrationResult {
        params: candidates.swap_remove(k),
        residual,
        points,
        candidates_evaluated: candidates.len() + 1,
    })
}

/// The four measured cases and their epochs to recall.
pub fn measured_epoch_targets() -> Vec<(f64, f64)> {
    vec![(0.60, 11.0), (0.40, 9.0), (0.24, 5.0), (0.09, 1.0)]
}

// ---------------------------------------------------------------------------
// Learning outputs

#[derive(Serialize)]
struct EpochDoc<'a> {
    epoch: usize,
    /// Keyed by 1-based neuron number.
    currents: std::collections::BTreeMap<usize, f64>,
    fired: Vec<usize>,
    recalled: bool,
    false_firings: Vec<usize>,
    energy: f64,
    map_file: &'a str,
}

#[derive(Serialize)]
struct TraceDoc<'a> {
    scenario: &'a Scenario,
    pattern: Vec<usize>,
    missing_pixel: usize,
    threshold: f64,
    epochs_to_recall: Option<usize>,
    total_energy: f64,
    ledger: EnergyLedger,
    epochs: Vec<EpochDoc<'a>>,
}

/// Outputs of the two-pattern protocol on one scenario.
#[derive(Clone, Debug)]
pub struct LearnOutcome {
    pub scenario: Scenario,
    pub first: LearningTrace,
    pub second: LearningTrace,
    pub final_raw_map: Vec<Vec<f64>>,
    pub initial_map: Vec<Vec<f64>>,
}

pub fn run_learn(scenario: &Scenario) -> Result<LearnOutcome> {
    let mut array: CrossbarState = scenario.build_array()?;
    let initial_map = array.initial_resistances();
    let (first, second) = run_two_pattern_protocol(&mut array, &scenario.network, &scenario.streams())?;
    Ok(LearnOutcome {
        scenario: scenario.clone(),
        first,
        second,
        final_raw_map: array.resistance_map(false),
        initial_map,
    })
}

fn cv_tag(cv: f64) -> String {
    format!("{cv:.2}")
}

/// Writes the per-scenario learning files into `dir`:
/// `fig4_epoch{k}.csv`, `fig5_{cv}.csv`, `fig6_{cv}.csv`, `trace_{cv}.json`.
pub fn write_learn_outputs(outcome: &LearnOutcome, dir: &Path, prov: &Provenance) -> Result<Vec<PathBuf>> {
    let sc = &outcome.scenario;
    let name = sc.name.as_str();
    let tag = cv_tag(sc.variation.cv);
    let mut files = Vec::new();

    // Normalized maps: epoch 0, pattern-1 epochs, then pattern-2 epochs continuing the count.
    let maps = outcome.first.maps.iter().chain(outcome.second.maps.iter().skip(1));
    let mut map_names = Vec::new();
    for (k, map) in maps.enumerate() {
        let file = format!("fig4_epoch{k}.csv");
        let path = dir.join(&file);
        write_csv(name, &path, prov, |w| write_map_csv(w, map))?;
        map_names.push(file);
        files.push(path);
    }

    let path = dir.join(format!("fig5_{tag}.csv"));
    write_csv(name, &path, prov, |w| {
        writeln!(w, "wl,bl,initial_ohms,final_ohms")?;
        for (wl, (r0, r1)) in outcome.initial_map.iter().zip(&outcome.final_raw_map).enumerate() {
            for (bl, (a, b)) in r0.iter().zip(r1).enumerate() {
                writeln!(w, "{},{},{},{}", wl + 1, bl + 1, fmt_sig6(*a), fmt_sig6(*b))?;
            }
        }
        Ok(())
    })?;
    files.push(path);

    let t = &outcome.first;
    let max_term = max_recall_current(&outcome.initial_map, sc.network.recall_on_count, sc.network.v_read)?;
    let (pattern, missing) = Pattern::first();
    let silent: Vec<usize> = (0..pattern.len()).filter(|&k| k == missing || !pattern.is_on(k)).collect();
    let path = dir.join(format!("fig6_{tag}.csv"));
    write_csv(name, &path, prov, |w| {
        let cols: Vec<String> = silent.iter().map(|k| format!("n{}_amps", k + 1)).collect();
        writeln!(
            w,
            "epoch,missing_current_amps,threshold_c1p5_amps,threshold_c2_amps,recalled,{}",
            cols.join(",")
        )?;
        for e in &t.epochs {
            let cur: Vec<String> = silent
                .iter()
                .map(|k| fmt_sig6(e.recall_currents.get(k).copied().unwrap_or(0.0)))
                .collect();
            writeln!(
                w,
                "{},{},{},{},{},{}",
                e.epoch_index,
                fmt_sig6(e.recall_currents[&t.missing_pixel]),
                fmt_sig6(1.5 * max_term),
                fmt_sig6(2.0 * max_term),
                e.recalled,
                cur.join(",")
            )?;
        }
        Ok(())
    })?;
    files.push(path);

    let path = dir.join(format!("trace_{tag}.json"));
    let doc = |trace: &LearningTrace, offset: usize| -> Result<TraceDoc<'_>> {
        Ok(TraceDoc {
            scenario: sc,
            pattern: trace.pattern.iter().map(|k| k + 1).collect(),
            missing_pixel: trace.missing_pixel + 1,
            threshold: trace.threshold,
            epochs_to_recall: trace.epochs_to_recall,
            total_energy: trace.total_energy,
            ledger: EnergyLedger::from_trace(trace, &sc.device)?,
            epochs: trace
                .epochs
                .iter()
                .map(|e| EpochDoc {
                    epoch: e.epoch_index,
                    currents: e.recall_currents.iter().map(|(&k, &v)| (k + 1, v)).collect(),
                    fired: e.fired_in_recall.iter().map(|k| k + 1).collect(),
                    recalled: e.recalled,
                    false_firings: e.false_firings.iter().map(|k| k + 1).collect(),
                    energy: e.epoch_energy,
                    map_file: &map_names[offset + e.epoch_index],
                })
                .collect(),
        })
    };
    #[derive(Serialize)]
    struct Both<'a> {
        pattern_1: TraceDoc<'a>,
        pattern_2: TraceDoc<'a>,
    }
    let both = Both {
        pattern_1: doc(&outcome.first, 0)?,
        pattern_2: doc(&outcome.second, outcome.first.epochs.len())?,
    };
    write_json(name, &path, prov, &both)?;
    files.push(path);
    Ok(files)
}

pub fn write_sensitivity(result: &SensitivityResult, path: &Path, prov: &Provenance) -> Result<()> {
    write_json(&result.scenario, path, prov, result)
}

/// Writes the sweep table as `fig7.csv` under `out`.
pub fn write_sweep(rows: &[crate::metrics::SweepRow], out: &Path, prov: &Provenance) -> Result<PathBuf> {
    let path = out.join("fig7.csv");
    write_csv("sweep", &path, prov, |w| write_sweep_csv(w, rows))?;
    Ok(path)
}

/// Writes `calibration.json` and `calibrated.toml`, the latter being
/// `config_toml` (a full configuration carrying the tuned device).
pub fn write_calibration(
    result: &CalibrationResult,
    config_toml: &str,
    out: &Path,
    prov: &Provenance,
) -> Result<Vec<PathBuf>> {
    let json = out.join("calibration.json");
    write_json("calibrate", &json, prov, result)?;
    let toml = out.join("calibrated.toml");
    write_file("calibrate", &toml, |buf| {
        prov.write_header(buf)?;
        buf.write_all(config_toml.as_bytes())
    })?;
    Ok(vec![json, toml])
}

// ---------------------------------------------------------------------------
// Whole tree

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureSettings {
    pub characterize: CharacterizeOptions,
    pub sweep_seeds: Vec<u64>,
    pub sensitivity_grid: Vec<f64>,
    pub replay: NoiseReplay,
}

/// Regenerates every figure's data under `out`: characterization at the top
/// level, one directory per scenario with its learning and sensitivity
/// files, and `fig7.csv` over the scenarios' cvs.
pub fn reproduce_figures(
    scenarios: &[Scenario],
    settings: &FigureSettings,
    out: &Path,
    config_hash: &str,
    exec: Execution,
) -> Result<Vec<PathBuf>> {
    let first = scenarios
        .first()
        .ok_or_else(|| Error::param("reproduce_figures needs at least one scenario"))?;
    let mut names: Vec<&str> = scenarios.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::param("scenario names must be unique"));
    }
    let prov = Provenance::new(first.seed, config_hash);

    let ch = characterize_device(&first.device, &settings.characterize, first.seed)?;
    let mut files = write_characterization(&ch, out, &prov)?;

    let per_scenario = exec.map(scenarios, |sc| -> Result<Vec<PathBuf>> {
        let prov = prov.with_seed(sc.seed);
        let dir = out.join(&sc.name);
        let outcome = run_learn(sc)?;
        let mut files = write_learn_outputs(&outcome, &dir, &prov)?;
        if outcome.first.converged() {
            let s = read_voltage_sensitivity(sc, &settings.sensitivity_grid, settings.replay, Execution::Sequential)?;
            let path = dir.join(format!("sensitivity_{}.json", cv_tag(sc.variation.cv)));
            write_sensitivity(&s, &path, &prov)?;
            files.push(path);
        }
        Ok(files)
    });
    for f in per_scenario {
        files.extend(f?);
    }

    let variations: Vec<VariationSpec> = scenarios.iter().map(|s| s.variation).collect();
    let rows = variation_sweep(&variations, &settings.sweep_seeds, &first.device, &first.network, exec)?;
    files.push(write_sweep(&rows, out, &prov)?);
    Ok(files)
}

//! Behavioral model of one PCM cell with its selection transistor.
//!
//! Resistance moves in log space. A full RESET re-draws the amorphous
//! resistance from a lognormal around the device median; each gradual-SET
//! pulse removes a fixed log decrement (optionally larger for the first pulse
//! after a RESET) plus Gaussian cycle-to-cycle noise, and the result never goes
//! below the fully crystalline floor. Reads are pure Ohm's law.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// DC threshold-switching voltage of a fully RESET cell. Documentation only.
pub const DC_THRESHOLD_VOLTAGE: f64 = 0.8;
/// Current at which DC threshold switching is observed. Documentation only.
pub const DC_SWITCHING_CURRENT: f64 = 2.0e-6;
/// Wordline (gate) voltage used for every access.
pub const WORDLINE_VOLTAGE: f64 = 3.3;
/// Width of the update-phase coincidence window.
pub const COINCIDENCE_WINDOW: f64 = 100e-6;

/// A rectangular-ish voltage pulse. Timing is metadata; only the amplitude
/// selects the regime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pulse {
    pub amplitude: f64,
    pub rise: f64,
    pub width: f64,
    pub fall: f64,
}

impl Pulse {
    pub fn new(amplitude: f64, rise: f64, width: f64, fall: f64) -> Result<Self> {
        let p = Pulse {
            amplitude,
            rise,
            width,
            fall,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0) {
            return Err(Error::param(format!(
                "pulse amplitude must be > 0, got {}",
                self.amplitude
            )));
        }
        for (name, v) in [("rise", self.rise), ("width", self.width), ("fall", self.fall)] {
            if !(v >= 0.0) {
                return Err(Error::param(format!("pulse {name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// 1 V, 50 ns / 300 ns / 1 us.
    pub fn default_set() -> Self {
        Pulse {
            amplitude: 1.0,
            rise: 50e-9,
            width: 300e-9,
            fall: 1e-6,
        }
    }

    /// 1.5 V, 5 ns / 50 ns / 5 ns. Device characterization quotes a 20 ns
    /// rise for the same pulse; it does not affect the model.
    pub fn default_reset() -> Self {
        Pulse {
            amplitude: 1.5,
            rise: 5e-9,
            width: 50e-9,
            fall: 5e-9,
        }
    }

    /// 0.85 V with the SET timing.
    pub fn default_gradual_set() -> Self {
        Pulse {
            amplitude: 0.85,
            ..Pulse::default_set()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseRegime {
    Reset,
    Set,
    GradualSet,
    Read,
}

/// Device parameters. The defaults describe the characterized device; see
/// [`DeviceParams::calibrated`] for the set used by the learning experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceParams {
    /// Median amorphous (RESET) resistance, ohms.
    pub r_reset_median: f64,
    /// Fully crystalline resistance; hard lower bound for every cell, ohms.
    pub r_set_floor: f64,
    /// Number of unscaled gradual-SET pulses that traverse median RESET to the floor.
    pub gradual_levels: u32,
    /// Log-sd of per-pulse cycle-to-cycle noise.
    pub sigma_c2c: f64,
    /// Energy of one gradual-SET event, joules.
    pub e_prog: f64,
    /// Energy of one RESET event, joules.
    pub reset_energy: f64,
    /// Share of energy dissipated in the phase-change material.
    pub pcm_energy_fraction: f64,
    pub v_read_default: f64,
    /// Sensing time per cell during recall, seconds.
    pub read_duration: f64,
    /// Share of the initial log-variance carried by the per-device factor.
    pub device_variance_share: f64,
    /// Multiplier on every gradual-SET log decrement.
    pub step_scale: f64,
    /// Extra multiplier on the first gradual-SET pulse after a RESET.
    pub first_step_scale: f64,
    pub set_pulse: Pulse,
    pub reset_pulse: Pulse,
    pub gradual_set_pulse: Pulse,
    /// Amplitudes at or above this are a full RESET.
    pub reset_min_amplitude: f64,
    /// Amplitudes at or below this are a read.
    pub read_max_amplitude: f64,
    /// Half-width of the amplitude band around `gradual_set_pulse` treated as gradual SET.
    pub gradual_band: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            r_reset_median: 3.0e6,
            r_set_floor: 1.0e4,
            gradual_levels: 9,
            sigma_c2c: 0.10,
            e_prog: 1.92e-10,
            reset_energy: 1.92e-10,
            pcm_energy_fraction: 0.10,
            v_read_default: 0.1,
            read_duration: 300e-9,
            device_variance_share: 0.8,
            step_scale: 1.0,
            first_step_scale: 1.0,
            set_pulse: Pulse::default_set(),
            reset_pulse: Pulse::default_reset(),
            gradual_set_pulse: Pulse::default_gradual_set(),
            reset_min_amplitude: 1.5,
            read_max_amplitude: 0.1,
            gradual_band: 0.05,
        }
    }
}

impl DeviceParams {
    /// Step schedule and noise fitted by `harness::calibrate_epochs` against
    /// the epochs-to-recall of the four measured variation cases. The
    /// training pulses are much weaker than the 0.85 V characterization
    /// pulse, hence the small `step_scale`.
    pub fn calibrated() -> Self {
        DeviceParams {
            sigma_c2c: CALIBRATED_SIGMA_C2C,
            step_scale: CALIBRATED_STEP_SCALE,
            first_step_scale: CALIBRATED_FIRST_STEP_SCALE,
            device_variance_share: CALIBRATED_DEVICE_SHARE,
            ..DeviceParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_set_floor > 0.0 && self.r_reset_median > self.r_set_floor) {
            return Err(Error::param(format!(
                "need r_reset_median > r_set_floor > 0, got {} and {}",
                self.r_reset_median, self.r_set_floor
            )));
        }
        if self.gradual_levels < 1 {
            return Err(Error::param("gradual_levels must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.pcm_energy_fraction) {
            return Err(Error::param("pcm_energy_fraction must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.device_variance_share) {
            return Err(Error::param("device_variance_share must be in [0, 1]"));
        }
        for (name, v) in [
            ("sigma_c2c", self.sigma_c2c),
            ("e_prog", self.e_prog),
            ("reset_energy", self.reset_energy),
            ("read_duration", self.read_duration),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        for (name, v) in [
            ("step_scale", self.step_scale),
            ("first_step_scale", self.first_step_scale),
            ("v_read_default", self.v_read_default),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        self.set_pulse.validate()?;
        self.reset_pulse.validate()?;
        self.gradual_set_pulse.validate()?;
        Ok(())
    }

    /// Unscaled log decrement of one gradual-SET pulse, `ln(r_reset/r_floor) / levels`.
    pub fn base_log_step(&self) -> f64 {
        (self.r_reset_median / self.r_set_floor).ln() / self.gradual_levels as f64
    }

    /// Resistance ratio of one unscaled pulse.
    pub fn step_factor(&self) -> f64 {
        (-self.base_log_step()).exp()
    }

    /// Log decrement of the pulse with the given index since the last RESET.
    pub fn log_step(&self, pulse_index: u32) -> f64 {
        let step = self.base_log_step() * self.step_scale;
        if pulse_index == 0 {
            step * self.first_step_scale
        } else {
            step
        }
    }

    pub fn classify(&self, pulse: &Pulse) -> Option<PulseRegime> {
        let a = pulse.amplitude;
        if a >= self.reset_min_amplitude {
            Some(PulseRegime::Reset)
        } else if a <= self.read_max_amplitude {
            Some(PulseRegime::Read)
        } else if (a - self.gradual_set_pulse.amplitude).abs() <= self.gradual_band {
            Some(PulseRegime::GradualSet)
        } else if a >= self.set_pulse.amplitude - self.gradual_band {
            Some(PulseRegime::Set)
        } else {
            None
        }
    }
}

/// Output of `pcmsyn calibrate` on the default configuration.
pub const CALIBRATED_STEP_SCALE: f64 = 0.10;
pub const CALIBRATED_FIRST_STEP_SCALE: f64 = 13.0;
pub const CALIBRATED_SIGMA_C2C: f64 = 0.05;
pub const CALIBRATED_DEVICE_SHARE: f64 = 0.8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    #[default]
    Lognormal,
}

/// Spread of the initial RESET resistance across an array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationSpec {
    /// Coefficient of variation (std / mean).
    pub cv: f64,
    #[serde(default)]
    pub distribution: Distribution,
}

impl VariationSpec {
    pub fn new(cv: f64) -> Result<Self> {
        let v = VariationSpec {
            cv,
            distribution: Distribution::Lognormal,
        };
        v.validate()?;
        Ok(v)
    }

    /// The four measured arrays: 60 %, 40 %, 24 % and 9 %.
    pub fn measured_cases() -> [VariationSpec; 4] {
        [0.60, 0.40, 0.24, 0.09].map(|cv| VariationSpec {
            cv,
            distribution: Distribution::Lognormal,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..2.0).contains(&self.cv) {
            return Err(Error::param(format!("cv must be in [0, 2), got {}", self.cv)));
        }
        Ok(())
    }

    /// Total log-variance of a lognormal with this CV.
    pub fn log_variance(&self) -> f64 {
        (1.0 + self.cv * self.cv).ln()
    }
}

/// One PCM cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    resistance: f64,
    device_factor: f64,
    initial_reset_resistance: Option<f64>,
    pulses_since_reset: u32,
}

impl CellState {
    /// A fresh cell at the median RESET resistance scaled by its device factor.
    /// Call [`CellState::apply_full_reset`] before an experiment.
    pub fn new(params: &DeviceParams, device_factor: f64) -> Self {
        CellState {
            resistance: (params.r_reset_median * device_factor).max(params.r_set_floor),
            device_factor,
            initial_reset_resistance: None,
            pulses_since_reset: 0,
        }
    }

    pub fn resistance(&self) -> f64 {
        self.resistance
    }

    pub fn device_factor(&self) -> f64 {
        self.device_factor
    }

    pub fn initial_reset_resistance(&self) -> Option<f64> {
        self.initial_reset_resistance
    }

    pub fn pulses_since_reset(&self) -> u32 {
        self.pulses_since_reset
    }

    /// Resistance over the experiment's initial RESET resistance, or 1.0
    /// before the first reset.
    pub fn normalized_resistance(&self) -> f64 {
        match self.initial_reset_resistance {
            Some(r0) => self.resistance / r0,
            None => 1.0,
        }
    }

    /// Re-draws the amorphous resistance. The first reset of a cell fixes its
    /// initial RESET resistance. Returns the RESET energy.
    pub fn apply_full_reset<R: Rng + ?Sized>(
        &mut self,
        params: &DeviceParams,
        variation: &VariationSpec,
        rng: &mut R,
    ) -> Result<f64> {
        self.resistance = sample_reset_resistance(params, variation, self.device_factor, rng)?;
        self.pulses_since_reset = 0;
        if self.initial_reset_resistance.is_none() {
            self.initial_reset_resistance = Some(self.resistance);
        }
        Ok(params.reset_energy)
    }

    /// Full crystallization to just above the floor.
    pub fn apply_full_set<R: Rng + ?Sized>(&mut self, params: &DeviceParams, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.resistance = params.r_set_floor * (params.sigma_c2c * z).abs().exp();
        self.pulses_since_reset = 0;
        params.e_prog
    }

    /// One gradual-SET pulse. Returns its programming energy.
    pub fn apply_gradual_set<R: Rng + ?Sized>(&mut self, params: &DeviceParams, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let step = params.log_step(self.pulses_since_reset);
        let log_r = self.resistance.ln() - step + params.sigma_c2c * z;
        self.resistance = log_r.exp().max(params.r_set_floor);
        self.pulses_since_reset = self.pulses_since_reset.saturating_add(1);
        params.e_prog
    }

    /// Current through the cell at the given read voltage.
    pub fn read_current(&self, v_read: f64) -> f64 {
        v_read / self.resistance
    }

    /// Dispatches on the pulse amplitude. Reads return zero energy.
    pub fn apply_pulse<R: Rng + ?Sized>(
        &mut self,
        pulse: &Pulse,
        params: &DeviceParams,
        variation: &VariationSpec,
        rng: &mut R,
    ) -> Result<f64> {
        match params.classify(pulse) {
            Some(PulseRegime::Reset) => self.apply_full_reset(params, variation, rng),
            Some(PulseRegime::Set) => Ok(self.apply_full_set(params, rng)),
            Some(PulseRegime::GradualSet) => Ok(self.apply_gradual_set(params, rng)),
            Some(PulseRegime::Read) => Ok(0.0),
            None => Err(Error::param(format!(
                "pulse amplitude {} V falls in no configured regime",
                pulse.amplitude
            ))),
        }
    }
}

/// Per-device multiplicative offset, lognormal with median 1 carrying the
/// device-to-device share of the log-variance.
pub fn sample_device_factor<R: Rng + ?Sized>(
    params: &DeviceParams,
    variation: &VariationSpec,
    rng: &mut R,
) -> Result<f64> {
    variation.validate()?;
    let sigma = (params.device_variance_share * variation.log_variance()).sqrt();
    let z: f64 = rng.sample(StandardNormal);
    Ok((sigma * z).exp())
}

/// Draws a RESET resistance around `r_reset_median * device_factor` with the
/// cycle-to-cycle share of the log-variance, clamped at the floor. A cell's
/// device factor and this draw together give the array the full CV.
pub fn sample_reset_resistance<R: Rng + ?Sized>(
    params: &DeviceParams,
    variation: &VariationSpec,
    device_factor: f64,
    rng: &mut R,
) -> Result<f64> {
    variation.validate()?;
    if !(device_factor > 0.0) {
        return Err(Error::param(format!("device_factor must be > 0, got {device_factor}")));
    }
    let sigma = ((1.0 - params.device_variance_share) * variation.log_variance()).sqrt();
    let z: f64 = rng.sample(StandardNormal);
    let r = params.r_reset_median * device_factor * (sigma * z).exp();
    Ok(r.max(params.r_set_floor))
}

/// Splits synaptic energy into (phase-change material, selection transistor).
pub fn split_energy(total: f64, params: &DeviceParams) -> Result<(f64, f64)> {
    if !(total >= 0.0) {
        return Err(Error::param(format!("energy must be >= 0, got {total}")));
    }
    let pcm = params.pcm_energy_fraction * total;
    Ok((pcm, total - pcm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;

    fn noiseless() -> DeviceParams {
        DeviceParams {
            sigma_c2c: 0.0,
            ..DeviceParams::default()
        }
    }

    fn zero() -> VariationSpec {
        VariationSpec::new(0.0).unwrap()
    }

    #[test]
    fn zero_variation_reset_is_the_median() {
        let p = DeviceParams::default();
        let mut rng = Streams::new(1).stream("t");
        let r = sample_reset_resistance(&p, &zero(), 1.0, &mut rng).unwrap();
        assert_eq!(r, 3.0e6);
    }

    #[test]
    fn invalid_variation_and_factor_are_rejected() {
        let p = DeviceParams::default();
        let mut rng = Streams::new(1).stream("t");
        let bad = VariationSpec {
            cv: 2.0,
            distribution: Distribution::Lognormal,
        };
        assert!(matches!(
            sample_reset_resistance(&p, &bad, 1.0, &mut rng),
            Err(Error::Param(_))
        ));
        assert!(VariationSpec::new(-0.1).is_err());
        assert!(sample_reset_resistance(&p, &zero(), 0.0, &mut rng).is_err());
    }

    #[test]
    fn full_reset_records_initial_once() {
        let p = DeviceParams::default();
        let v = VariationSpec::new(0.6).unwrap();
        let mut rng = Streams::new(3).stream("t");
        let mut cell = CellState::new(&p, 1.0);
        assert_eq!(cell.initial_reset_resistance(), None);
        let e = cell.apply_full_reset(&p, &v, &mut rng).unwrap();
        assert_eq!(e, p.reset_energy);
        let first = cell.resistance();
        assert_eq!(cell.initial_reset_resistance(), Some(first));
        cell.apply_full_reset(&p, &v, &mut rng).unwrap();
        assert_ne!(cell.resistance(), first);
        assert_eq!(cell.initial_reset_resistance(), Some(first));
    }

    #[test]
    fn zero_variation_reset_ignores_prior_state() {
        let p = noiseless();
        let mut rng = Streams::new(3).stream("t");
        let mut cell = CellState::new(&p, 1.0);
        for _ in 0..4 {
            cell.apply_gradual_set(&p, &mut rng);
        }
        cell.apply_full_reset(&p, &zero(), &mut rng).unwrap();
        assert_eq!(cell.resistance(), 3.0e6);
        assert_eq!(cell.pulses_since_reset(), 0);
    }

    #[test]
    fn nine_noiseless_pulses_reach_the_floor() {
        let p = noiseless();
        let mut rng = Streams::new(0).stream("t");
        let mut cell = CellState::new(&p, 1.0);
        let mut prev = cell.resistance();
        for _ in 0..9 {
            cell.apply_gradual_set(&p, &mut rng);
            assert!(cell.resistance() < prev);
            prev = cell.resistance();
        }
        assert!(cell.resistance() <= 1.1 * p.r_set_floor);
        assert!(cell.resistance() >= p.r_set_floor);
    }

    #[test]
    fn one_pulse_factor() {
        // (1e4 / 3e6)^(1/9)
        let alpha = (1.0e4_f64 / 3.0e6).powf(1.0 / 9.0);
        let p = noiseless();
        assert!((p.step_factor() - alpha).abs() < 1e-15);
        assert!((alpha - 0.5305).abs() < 1e-4);
        let mut cell = CellState::new(&p, 1.0);
        cell.apply_gradual_set(&p, &mut Streams::new(0).stream("t"));
        assert!((cell.resistance() - 3.0e6 * alpha).abs() / (3.0e6 * alpha) < 1e-12);
    }

    #[test]
    fn floor_is_a_fixed_point() {
        let p = noiseless();
        let mut rng = Streams::new(0).stream("t");
        let mut cell = CellState::new(&p, 1.0);
        for _ in 0..20 {
            cell.apply_gradual_set(&p, &mut rng);
        }
        assert_eq!(cell.resistance(), p.r_set_floor);
        cell.apply_gradual_set(&p, &mut rng);
        assert_eq!(cell.resistance(), p.r_set_floor);
    }

    #[test]
    fn noisy_staircases_differ() {
        let p = DeviceParams::default();
        let s = Streams::new(11);
        let run = |k: u64| {
            let mut rng = s.indexed("stair", k);
            let mut cell = CellState::new(&p, 1.0);
            (0..9)
                .map(|_| {
                    cell.apply_gradual_set(&p, &mut rng);
                    cell.resistance()
                })
                .collect::<Vec<_>>()
        };
        assert_ne!(run(0), run(1));
    }

    #[test]
    fn first_step_scale_only_affects_first_pulse() {
        let p = DeviceParams {
            step_scale: 0.5,
            first_step_scale: 3.0,
            ..noiseless()
        };
        let base = p.base_log_step();
        assert!((p.log_step(0) - 1.5 * base).abs() < 1e-15);
        assert!((p.log_step(1) - 0.5 * base).abs() < 1e-15);
        assert!((p.log_step(7) - 0.5 * base).abs() < 1e-15);
    }

    #[test]
    fn read_current_is_ohms_law() {
        let p = DeviceParams::default();
        let floor = CellState {
            resistance: 1.0e4,
            ..CellState::new(&p, 1.0)
        };
        assert!((floor.read_current(0.1) - 1.0e-5).abs() < 1e-20);
        let reset = CellState::new(&p, 1.0);
        assert!((reset.read_current(0.1) - 3.333_333e-8).abs() < 1e-13);
        assert_eq!(reset.read_current(0.0), 0.0);
        let before = reset;
        for _ in 0..10 {
            reset.read_current(0.1);
        }
        assert_eq!(before, reset);
    }

    #[test]
    fn energy_split() {
        let p = DeviceParams::default();
        let (pcm, tr) = split_energy(52.8e-9, &p).unwrap();
        assert!((pcm - 5.28e-9).abs() < 1e-21);
        assert!((tr - 47.52e-9).abs() < 1e-21);
        assert_eq!(split_energy(0.0, &p).unwrap(), (0.0, 0.0));
        let (pcm, tr) = split_energy(1.0, &p).unwrap();
        assert!((pcm - 0.10).abs() < 1e-15 && (tr - 0.90).abs() < 1e-15);
        assert!(split_energy(-1.0, &p).is_err());
    }

    #[test]
    fn regimes() {
        let p = DeviceParams::default();
        assert_eq!(p.classify(&p.reset_pulse), Some(PulseRegime::Reset));
        assert_eq!(p.classify(&p.set_pulse), Some(PulseRegime::Set));
        assert_eq!(p.classify(&p.gradual_set_pulse), Some(PulseRegime::GradualSet));
        let read = Pulse::new(0.1, 0.0, 300e-9, 0.0).unwrap();
        assert_eq!(p.classify(&read), Some(PulseRegime::Read));
        let odd = Pulse::new(0.5, 0.0, 1e-6, 0.0).unwrap();
        assert_eq!(p.classify(&odd), None);
        assert!(Pulse::new(0.0, 0.0, 1e-6, 0.0).is_err());
        assert!(Pulse::new(1.0, -1.0, 1e-6, 0.0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(DeviceParams::default().validate().is_ok());
        assert!(DeviceParams::calibrated().validate().is_ok());
        let bad = DeviceParams {
            r_set_floor: 4.0e6,
            ..DeviceParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = DeviceParams {
            gradual_levels: 0,
            ..DeviceParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = DeviceParams {
            pcm_energy_fraction: 1.5,
            ..DeviceParams::default()
        };
        assert!(bad.validate().is_err());
    }
}

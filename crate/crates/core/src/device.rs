//! Behavioral model of a single phase-change synapse.
//!
//! A cell is a bounded resistance. SET pulses crystallize a fixed fraction of
//! the remaining distance to the fully-SET floor (with multiplicative
//! cycle-to-cycle noise), RESET pulses re-amorphize the cell to a lognormal
//! draw around a target median, and reads are ohmic and non-destructive.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};

/// Device-level constants. All values in SI units (ohms, volts).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    /// Fully-SET resistance floor.
    pub r_min: f64,
    /// Fully-RESET resistance ceiling.
    pub r_max: f64,
    pub r_reset_full_median: f64,
    pub r_reset_partial_median: f64,
    /// Fraction of `R - r_min` removed by one SET pulse.
    pub alpha_set: f64,
    /// Relative std of the multiplicative noise on each SET update.
    pub sigma_c2c: f64,
    pub v_set_threshold: f64,
    pub v_reset_threshold: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            r_min: 10e3,
            r_max: 10e6,
            r_reset_full_median: 1e6,
            r_reset_partial_median: 1e6,
            alpha_set: 0.6,
            sigma_c2c: 0.05,
            v_set_threshold: 0.5,
            v_reset_threshold: 1.2,
        }
    }
}

impl DeviceParams {
    /// The same parameters with cycle-to-cycle noise switched off.
    pub fn noise_free(self) -> Self {
        Self {
            sigma_c2c: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> SimResult<()> {
        let all = [
            self.r_min,
            self.r_max,
            self.r_reset_full_median,
            self.r_reset_partial_median,
            self.alpha_set,
            self.sigma_c2c,
            self.v_set_threshold,
            self.v_reset_threshold,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(SimError::InvalidParams("non-finite value".into()));
        }
        if !(0.0 < self.r_min
            && self.r_min < self.r_reset_partial_median
            && self.r_reset_partial_median <= self.r_reset_full_median
            && self.r_reset_full_median <= self.r_max)
        {
            return Err(SimError::InvalidParams(
                "require 0 < r_min < r_reset_partial_median <= r_reset_full_median <= r_max".into(),
            ));
        }
        if !(self.alpha_set > 0.0 && self.alpha_set < 1.0) {
            return Err(SimError::InvalidParams(
                "alpha_set must lie in (0, 1)".into(),
            ));
        }
        if self.sigma_c2c < 0.0 {
            return Err(SimError::InvalidParams("sigma_c2c must be >= 0".into()));
        }
        if self.v_set_threshold >= self.v_reset_threshold {
            return Err(SimError::InvalidParams(
                "v_set_threshold must be below v_reset_threshold".into(),
            ));
        }
        Ok(())
    }

    fn clamp(&self, r: f64) -> f64 {
        r.clamp(self.r_min, self.r_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PulseRole {
    Set,
    Reset,
    Read,
}

/// Trapezoidal voltage pulse: linear rise, flat top, linear fall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub amplitude: f64,
    pub t_rise: f64,
    pub t_width: f64,
    pub t_fall: f64,
    pub role: PulseRole,
}

impl PulseSpec {
    /// 1 V SET pulse, 50 ns / 300 ns / 1 us.
    pub const fn paper_set() -> Self {
        Self {
            amplitude: 1.0,
            t_rise: 50e-9,
            t_width: 300e-9,
            t_fall: 1e-6,
            role: PulseRole::Set,
        }
    }

    /// 1.5 V RESET pulse, 20 ns / 50 ns / 5 ns.
    pub const fn paper_reset() -> Self {
        Self {
            amplitude: 1.5,
            t_rise: 20e-9,
            t_width: 50e-9,
            t_fall: 5e-9,
            role: PulseRole::Reset,
        }
    }

    /// Rectangular read pulse filling one 100 us coactivity window.
    pub const fn read(v_read: f64) -> Self {
        Self {
            amplitude: v_read,
            t_rise: 0.0,
            t_width: 100e-6,
            t_fall: 0.0,
            role: PulseRole::Read,
        }
    }

    /// Checks shape invariants and, for reads, that the pulse cannot disturb the cell.
    pub fn validate(&self, params: &DeviceParams) -> SimResult<()> {
        let fields = [self.amplitude, self.t_rise, self.t_width, self.t_fall];
        if fields.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(SimError::InvalidPulse(
                "amplitude and times must be finite and >= 0".into(),
            ));
        }
        if self.role == PulseRole::Read && self.amplitude > params.v_set_threshold {
            return Err(SimError::InvalidPulse(format!(
                "read amplitude {} V exceeds the SET threshold {} V",
                self.amplitude, params.v_set_threshold
            )));
        }
        Ok(())
    }

    fn require(&self, role: PulseRole, threshold: f64) -> SimResult<()> {
        if self.role != role {
            return Err(SimError::WrongPulseRole {
                expected: role,
                found: self.role,
            });
        }
        if self.amplitude < threshold {
            return Err(SimError::AmplitudeBelowThreshold {
                role,
                amplitude: self.amplitude,
                threshold,
            });
        }
        Ok(())
    }
}

/// Energy dissipated in a resistor of value `resistance_before` by a trapezoidal pulse.
///
/// The integral of `v(t)^2 / R` over a linear ramp of duration `t` is `V^2 t / 3R`,
/// so the total is `V^2 / R * (t_rise / 3 + t_width + t_fall / 3)`.
pub fn pulse_energy(pulse: &PulseSpec, resistance_before: f64) -> f64 {
    let effective_time = pulse.t_rise / 3.0 + pulse.t_width + pulse.t_fall / 3.0;
    pulse.amplitude * pulse.amplitude / resistance_before * effective_time
}

/// Ohmic read current through a cell.
pub fn read_current(cell: &PcmCell, v_read: f64) -> f64 {
    v_read / cell.resistance
}

/// Lognormal value with the given median and coefficient of variation, from a standard normal draw.
pub(crate) fn lognormal_from_normal(median: f64, cv: f64, z: f64) -> f64 {
    let shape = (1.0 + cv * cv).ln().sqrt();
    median * (shape * z).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcmCell {
    resistance: f64,
    pulse_count_set: u32,
}

impl PcmCell {
    /// A freshly programmed cell; the resistance is clamped into the device window.
    pub fn new(resistance: f64, params: &DeviceParams) -> Self {
        Self {
            resistance: params.clamp(resistance),
            pulse_count_set: 0,
        }
    }

    pub fn resistance(&self) -> f64 {
        self.resistance
    }

    pub fn conductance(&self) -> f64 {
        1.0 / self.resistance
    }

    pub fn pulse_count_set(&self) -> u32 {
        self.pulse_count_set
    }

    /// One gradual-SET step: `R' = r_min + (R - r_min)(1 - alpha_set)(1 + eps)`, clamped.
    ///
    /// Exactly one standard normal is drawn per call regardless of `sigma_c2c`,
    /// so the stream position does not depend on the noise level.
    pub fn apply_set_pulse<R: Rng + ?Sized>(
        self,
        pulse: &PulseSpec,
        params: &DeviceParams,
        rng: &mut R,
    ) -> SimResult<(PcmCell, f64)> {
        pulse.require(PulseRole::Set, params.v_set_threshold)?;
        let energy = pulse_energy(pulse, self.resistance);
        let z: f64 = rng.sample(StandardNormal);
        let eps = params.sigma_c2c * z;
        let relaxed = params.r_min
            + (self.resistance - params.r_min) * (1.0 - params.alpha_set) * (1.0 + eps);
        let cell = PcmCell {
            resistance: params.clamp(relaxed),
            pulse_count_set: self.pulse_count_set.saturating_add(1),
        };
        Ok((cell, energy))
    }

    /// RESET to a lognormal draw with median `target_median` and relative spread `rel_spread`.
    pub fn apply_reset_pulse<R: Rng + ?Sized>(
        self,
        pulse: &PulseSpec,
        params: &DeviceParams,
        target_median: f64,
        rel_spread: f64,
        rng: &mut R,
    ) -> SimResult<(PcmCell, f64)> {
        pulse.require(PulseRole::Reset, params.v_reset_threshold)?;
        if !target_median.is_finite()
            || target_median <= 0.0
            || !rel_spread.is_finite()
            || rel_spread < 0.0
        {
            return Err(SimError::InvalidParams(format!(
                "RESET target median {target_median} / spread {rel_spread} out of range"
            )));
        }
        let energy = pulse_energy(pulse, self.resistance);
        let z: f64 = rng.sample(StandardNormal);
        let cell = PcmCell {
            resistance: params.clamp(lognormal_from_normal(target_median, rel_spread, z)),
            pulse_count_set: 0,
        };
        Ok((cell, energy))
    }
}

//! Recurrent integrate-and-fire network mapped onto the crossbar.
//!
//! Neuron `i` owns bitline `i` (its input) and wordline `i` (its output).
//! A firing neuron gates its wordline and drives a SET pulse on its bitline,
//! so coactive neurons strengthen the synapses between them. A silent neuron
//! only reads its bitline; the summed current from the firing neurons'
//! gated cells is compared with its threshold and, if above, the neuron
//! fires on the next iteration.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crossbar::{CrossbarArray, NeuronSet};
use crate::device::{DeviceParams, PulseRole, PulseSpec};
use crate::error::{SimError, SimResult};

/// Binary stimulus: `true` marks an externally stimulated (ON) neuron.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pattern {
    pub bits: Vec<bool>,
}

impl Pattern {
    pub fn from_on_set(n: usize, on: &NeuronSet) -> SimResult<Self> {
        if let Some(&last) = on.iter().next_back() {
            if last >= n {
                return Err(SimError::IndexOutOfRange { index: last, n });
            }
        }
        Ok(Self {
            bits: (0..n).map(|i| on.contains(&i)).collect(),
        })
    }

    /// Builds a pattern from 1-based neuron numbers, as neurons are labelled in figures.
    pub fn from_neuron_numbers(n: usize, numbers: &[usize]) -> SimResult<Self> {
        let on = numbers
            .iter()
            .map(|&k| {
                k.checked_sub(1)
                    .ok_or(SimError::IndexOutOfRange { index: k, n })
            })
            .collect::<SimResult<NeuronSet>>()?;
        Self::from_on_set(n, &on)
    }

    /// Neurons #1, 2, 3, 4, 6 ON.
    pub fn pattern_one() -> Self {
        Self::from_neuron_numbers(10, &[1, 2, 3, 4, 6]).expect("static pattern")
    }

    /// Neurons #5, 7, 8, 9, 10 ON.
    pub fn pattern_two() -> Self {
        Self::from_neuron_numbers(10, &[5, 7, 8, 9, 10]).expect("static pattern")
    }

    /// Pattern one with neuron #6 missing.
    pub fn pattern_one_partial() -> Self {
        Self::from_neuron_numbers(10, &[1, 2, 3, 4]).expect("static pattern")
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn on_set(&self) -> NeuronSet {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    fn check_len(&self, n: usize) -> SimResult<()> {
        if self.bits.len() != n {
            return Err(SimError::DimensionMismatch {
                expected: n,
                found: self.bits.len(),
            });
        }
        Ok(())
    }
}

/// Which wordlines are gated when probing the untrained array for thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdGating {
    /// The recall stimulus's ON set.
    #[default]
    Stimulus,
    /// Every wordline.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolParams {
    pub v_read: f64,
    pub read_pulse: PulseSpec,
    pub program_pulse: PulseSpec,
    pub threshold_factor: f64,
    pub include_diagonal: bool,
    pub pulses_per_coactivation: u32,
    #[serde(default)]
    pub threshold_gating: ThresholdGating,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            v_read: 0.1,
            read_pulse: PulseSpec::read(0.1),
            program_pulse: PulseSpec::paper_set(),
            threshold_factor: 2.0,
            include_diagonal: true,
            pulses_per_coactivation: 1,
            threshold_gating: ThresholdGating::Stimulus,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self, device: &DeviceParams) -> SimResult<()> {
        if !(self.threshold_factor.is_finite() && self.threshold_factor >= 1.0) {
            return Err(SimError::InvalidConfig(format!(
                "threshold_factor {} must be >= 1",
                self.threshold_factor
            )));
        }
        if self.pulses_per_coactivation == 0 {
            return Err(SimError::InvalidConfig(
                "pulses_per_coactivation must be >= 1".into(),
            ));
        }
        if self.read_pulse.role != PulseRole::Read || self.program_pulse.role != PulseRole::Set {
            return Err(SimError::InvalidConfig(
                "read_pulse must have role Read and program_pulse role Set".into(),
            ));
        }
        if self.read_pulse.amplitude != self.v_read {
            return Err(SimError::InvalidConfig(format!(
                "v_read {} V differs from read_pulse amplitude {} V",
                self.v_read, self.read_pulse.amplitude
            )));
        }
        self.read_pulse.validate(device)?;
        self.program_pulse.validate(device)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronState {
    pub firing: bool,
    /// Last bitline read; `None` for neurons that were firing and did not read.
    #[serde(rename = "input_current_A")]
    pub input_current: Option<f64>,
    #[serde(rename = "threshold_A")]
    pub threshold: f64,
}

/// One pattern presentation within a training epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: u32,
    /// Index of the presented pattern within the configured list.
    pub pattern: usize,
    pub firing_set: NeuronSet,
    /// Read current per neuron; `None` for firing neurons.
    #[serde(rename = "currents_A")]
    pub currents: Vec<Option<f64>>,
    #[serde(rename = "program_energy_J")]
    pub program_energy: f64,
    #[serde(rename = "read_energy_J")]
    pub read_energy: f64,
    pub programmed_cells: usize,
    #[serde(
        rename = "resistance_snapshot_ohm",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub resistance_snapshot: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeStep {
    pub step: usize,
    pub firing_set: NeuronSet,
    pub neurons: Vec<NeuronState>,
    #[serde(rename = "read_energy_J")]
    pub read_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub final_set: NeuronSet,
    pub steps: Vec<ProbeStep>,
    #[serde(rename = "read_energy_J")]
    pub read_energy: f64,
    /// False when the firing set was still growing after `max_steps` reads.
    pub converged: bool,
}

/// Per-neuron firing thresholds: `threshold_factor` times the current each
/// neuron reads on the (untrained) array with the stimulus's wordlines gated.
pub fn compute_thresholds(
    array: &CrossbarArray,
    stimulus: &Pattern,
    pp: &ProtocolParams,
) -> SimResult<Vec<f64>> {
    stimulus.check_len(array.n())?;
    let on = stimulus.on_set();
    if on.is_empty() {
        return Err(SimError::EmptyStimulus);
    }
    let gated = match pp.threshold_gating {
        ThresholdGating::Stimulus => on,
        ThresholdGating::All => (0..array.n()).collect(),
    };
    (0..array.n())
        .map(|i| Ok(pp.threshold_factor * array.read_bitline(i, &gated, &pp.read_pulse)?.current))
        .collect()
}

/// One presentation of `pattern`: program the coactive block, then let every
/// silent neuron read its bitline against the firing set.
pub fn training_epoch<R: Rng + ?Sized>(
    array: &CrossbarArray,
    pattern: &Pattern,
    pp: &ProtocolParams,
    epoch: u32,
    rng: &mut R,
) -> SimResult<(CrossbarArray, EpochTrace)> {
    let n = array.n();
    pattern.check_len(n)?;
    let firing = pattern.on_set();

    let mut current = array.clone();
    let mut program_energy = 0.0;
    let mut programmed_cells = 0;
    for _ in 0..pp.pulses_per_coactivation {
        if pp.include_diagonal {
            let p = current.program_cells(&firing, &firing, &pp.program_pulse, rng)?;
            program_energy += p.energy;
            programmed_cells += p.programmed_count;
            current = p.array;
        } else {
            for &bl in &firing {
                let driven: NeuronSet = [bl].into_iter().collect();
                let mut gated = firing.clone();
                gated.remove(&bl);
                let p = current.program_cells(&driven, &gated, &pp.program_pulse, rng)?;
                program_energy += p.energy;
                programmed_cells += p.programmed_count;
                current = p.array;
            }
        }
    }

    let mut currents = vec![None; n];
    let mut read_energy = 0.0;
    for (i, slot) in currents.iter_mut().enumerate() {
        if firing.contains(&i) {
            continue;
        }
        let r = current.read_bitline(i, &firing, &pp.read_pulse)?;
        *slot = Some(r.current);
        read_energy += r.energy;
    }

    let trace = EpochTrace {
        epoch,
        pattern: 0,
        firing_set: firing,
        currents,
        program_energy,
        read_energy,
        programmed_cells,
        resistance_snapshot: None,
    };
    Ok((current, trace))
}

/// Read-only pattern completion: starting from the ON neurons of `partial`,
/// silent neurons whose bitline current strictly exceeds their threshold join
/// the firing set on the next step, until nothing changes or `max_steps` reads
/// have been made.
pub fn recall_probe(
    array: &CrossbarArray,
    partial: &Pattern,
    thresholds: &[f64],
    pp: &ProtocolParams,
    max_steps: usize,
) -> SimResult<ProbeOutcome> {
    let n = array.n();
    partial.check_len(n)?;
    if thresholds.len() != n {
        return Err(SimError::DimensionMismatch {
            expected: n,
            found: thresholds.len(),
        });
    }
    let mut firing = partial.on_set();
    if firing.is_empty() {
        return Err(SimError::EmptyStimulus);
    }

    let mut steps = Vec::new();
    let mut read_energy = 0.0;
    let mut converged = false;
    for step in 0..max_steps {
        let mut neurons = Vec::with_capacity(n);
        let mut recruits = NeuronSet::new();
        let mut step_energy = 0.0;
        for (i, &threshold) in thresholds.iter().enumerate() {
            if firing.contains(&i) {
                neurons.push(NeuronState {
                    firing: true,
                    input_current: None,
                    threshold,
                });
                continue;
            }
            let r = array.read_bitline(i, &firing, &pp.read_pulse)?;
            step_energy += r.energy;
            if r.current > threshold {
                recruits.insert(i);
            }
            neurons.push(NeuronState {
                firing: false,
                input_current: Some(r.current),
                threshold,
            });
        }
        read_energy += step_energy;
        steps.push(ProbeStep {
            step,
            firing_set: firing.clone(),
            neurons,
            read_energy: step_energy,
        });
        if recruits.is_empty() {
            converged = true;
            break;
        }
        firing.extend(recruits);
    }

    Ok(ProbeOutcome {
        final_set: firing,
        steps,
        read_energy,
        converged,
    })
}

/// Exact match: every target neuron recalled and no spurious neuron firing.
pub fn recall_success(final_set: &NeuronSet, target: &Pattern) -> bool {
    *final_set == target.on_set()
}

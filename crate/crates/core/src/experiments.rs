//! End-to-end learning and recall runs, variation sweeps, and derived metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crossbar::{ArrayStats, CrossbarArray, InitScheme, NeuronSet};
use crate::device::{DeviceParams, PcmCell, PulseSpec};
use crate::error::{SimError, SimResult};
use crate::network::{
    compute_thresholds, recall_probe, recall_success, training_epoch, EpochTrace, Pattern,
    ProbeStep, ProtocolParams,
};
use crate::rng;

/// Sweep settings carried alongside an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub cvs: Vec<f64>,
    pub seeds_per_cv: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub device: DeviceParams,
    pub protocol: ProtocolParams,
    pub init: InitScheme,
    pub patterns: Vec<Pattern>,
    pub recall_stimulus: Pattern,
    pub recall_target: Pattern,
    pub max_epochs: u32,
    pub seed: u64,
    /// Snapshot the array every this many epochs (plus epoch 0 and the last epoch); 0 disables.
    pub snapshot_every: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl ExperimentConfig {
    /// 10x10 array, patterns 1 and 2, recall of pattern 1 from neurons #1-4, no initial spread.
    pub fn paper_default() -> Self {
        Self {
            n: 10,
            device: DeviceParams::default(),
            protocol: ProtocolParams::default(),
            init: InitScheme::tuned_full_reset(0.0),
            patterns: vec![Pattern::pattern_one(), Pattern::pattern_two()],
            recall_stimulus: Pattern::pattern_one_partial(),
            recall_target: Pattern::pattern_one(),
            max_epochs: 20,
            seed: 0,
            snapshot_every: 1,
            sweep: None,
        }
    }

    pub fn validate(&self) -> SimResult<()> {
        if self.n < 2 {
            return Err(SimError::InvalidDimension(self.n));
        }
        self.device.validate()?;
        self.protocol.validate(&self.device)?;
        self.init.validate(&self.device)?;
        if self.patterns.is_empty() {
            return Err(SimError::InvalidConfig("patterns must be non-empty".into()));
        }
        for p in self
            .patterns
            .iter()
            .chain([&self.recall_stimulus, &self.recall_target])
        {
            if p.len() != self.n {
                return Err(SimError::DimensionMismatch {
                    expected: self.n,
                    found: p.len(),
                });
            }
        }
        let stimulus = self.recall_stimulus.on_set();
        if stimulus.is_empty() {
            return Err(SimError::EmptyStimulus);
        }
        if !stimulus.is_subset(&self.recall_target.on_set()) {
            return Err(SimError::InvalidConfig(
                "recall_target must contain every recall_stimulus neuron".into(),
            ));
        }
        if let Some(sweep) = &self.sweep {
            validate_cvs(&sweep.cvs)?;
        }
        Ok(())
    }
}

fn validate_cvs(cvs: &[f64]) -> SimResult<()> {
    if cvs.is_empty() {
        return Err(SimError::InvalidConfig(
            "sweep cvs must be non-empty".into(),
        ));
    }
    if cvs
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]).is_none_or(|o| o.is_gt()))
    {
        return Err(SimError::InvalidConfig(
            "sweep cvs must be sorted ascending".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    #[serde(rename = "training_program_J")]
    pub training_program: f64,
    #[serde(rename = "training_read_J")]
    pub training_read: f64,
    #[serde(rename = "probe_read_J")]
    pub probe_read: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.training_program + self.training_read + self.probe_read
    }
}

/// Recall probe made after the training of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub epoch: u32,
    pub final_set: NeuronSet,
    pub success: bool,
    pub converged: bool,
    #[serde(rename = "read_energy_J")]
    pub read_energy: f64,
    pub steps: Vec<ProbeStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    /// First epoch whose probe recalled the target exactly; `null` if never reached.
    pub epochs_to_recall: Option<u32>,
    pub epochs_run: u32,
    #[serde(rename = "total_energy_J")]
    pub total_energy: f64,
    pub energy_breakdown: EnergyBreakdown,
    #[serde(rename = "thresholds_A")]
    pub thresholds: Vec<f64>,
    pub initial_stats: ArrayStats,
    pub final_stats: ArrayStats,
    pub traces: Vec<EpochTrace>,
    pub probes: Vec<ProbeRecord>,
    /// Weight contrast of the recall target at epoch 0, 1, ...; empty if the target is degenerate.
    pub contrast_history: Vec<f64>,
    pub device: DeviceParams,
    #[serde(
        rename = "initial_resistances_ohm",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub initial_resistances: Option<Vec<Vec<f64>>>,
}

impl RunReport {
    pub fn recalled(&self) -> bool {
        self.epochs_to_recall.is_some()
    }
}

/// Train on every configured pattern once per epoch, probe recall after each
/// epoch, and stop at the first exact recall or after `max_epochs`.
pub fn learn_and_recall(config: &ExperimentConfig) -> SimResult<RunReport> {
    config.validate()?;
    let pp = &config.protocol;
    let mut init_rng = rng::stream(config.seed, rng::INIT_STREAM);
    let mut learn_rng = rng::stream(config.seed, rng::LEARN_STREAM);

    let initial = CrossbarArray::init(config.n, &config.init, &config.device, &mut init_rng)?;
    let thresholds = compute_thresholds(&initial, &config.recall_stimulus, pp)?;
    let contrast_enabled = weight_contrast(&initial, &config.recall_target).is_ok();
    let mut contrast_history = Vec::new();
    if contrast_enabled {
        contrast_history.push(weight_contrast(&initial, &config.recall_target)?);
    }

    let mut array = initial.clone();
    let mut energy = EnergyBreakdown {
        training_program: 0.0,
        training_read: 0.0,
        probe_read: 0.0,
    };
    let mut traces = Vec::new();
    let mut probes = Vec::new();
    let mut epochs_to_recall = None;
    let mut epochs_run = 0;

    for epoch in 1..=config.max_epochs {
        for (k, pattern) in config.patterns.iter().enumerate() {
            let (next, mut trace) = training_epoch(&array, pattern, pp, epoch, &mut learn_rng)?;
            trace.pattern = k;
            energy.training_program += trace.program_energy;
            energy.training_read += trace.read_energy;
            traces.push(trace);
            array = next;
        }

        let probe = recall_probe(&array, &config.recall_stimulus, &thresholds, pp, config.n)?;
        let success = recall_success(&probe.final_set, &config.recall_target);
        energy.probe_read += probe.read_energy;
        probes.push(ProbeRecord {
            epoch,
            final_set: probe.final_set,
            success,
            converged: probe.converged,
            read_energy: probe.read_energy,
            steps: probe.steps,
        });
        if contrast_enabled {
            contrast_history.push(weight_contrast(&array, &config.recall_target)?);
        }
        epochs_run = epoch;

        let last = success || epoch == config.max_epochs;
        if config.snapshot_every > 0 && (epoch % config.snapshot_every == 0 || last) {
            if let Some(trace) = traces.last_mut() {
                trace.resistance_snapshot = Some(array.resistances());
            }
        }
        if success {
            epochs_to_recall = Some(epoch);
            break;
        }
    }

    Ok(RunReport {
        seed: config.seed,
        epochs_to_recall,
        epochs_run,
        total_energy: energy.total(),
        energy_breakdown: energy,
        thresholds,
        initial_stats: initial.stats(),
        final_stats: array.stats(),
        traces,
        probes,
        contrast_history,
        device: config.device,
        initial_resistances: (config.snapshot_every > 0).then(|| initial.resistances()),
    })
}

/// Aggregated ensemble result for one initial variation level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cv: f64,
    /// Median epochs-to-recall; runs that never recall rank above every
    /// finite value, and the median is infinite if it lands on one of them.
    pub median_epochs: f64,
    #[serde(rename = "mean_energy_J")]
    pub mean_energy: f64,
    pub success_rate: f64,
}

impl SweepRow {
    pub fn from_reports(cv: f64, reports: &[RunReport]) -> Self {
        let mut epochs: Vec<f64> = reports
            .iter()
            .map(|r| r.epochs_to_recall.map_or(f64::INFINITY, f64::from))
            .collect();
        epochs.sort_by(f64::total_cmp);
        let count = reports.len();
        let median_epochs = match count {
            0 => f64::NAN,
            _ if count % 2 == 1 => epochs[count / 2],
            _ => 0.5 * (epochs[count / 2 - 1] + epochs[count / 2]),
        };
        Self {
            cv,
            median_epochs,
            mean_energy: reports.iter().map(|r| r.total_energy).sum::<f64>() / count as f64,
            success_rate: reports.iter().filter(|r| r.recalled()).count() as f64 / count as f64,
        }
    }
}

/// Runs `seeds` independent copies of `base` at initial variation `cv`, in parallel.
///
/// Job `k` uses seed `job_seed(base.seed, cv_index, k)`; results come back in job order.
pub fn run_ensemble(
    base: &ExperimentConfig,
    cv: f64,
    cv_index: usize,
    seeds: usize,
) -> SimResult<Vec<RunReport>> {
    (0..seeds)
        .into_par_iter()
        .map(|k| {
            let config = ExperimentConfig {
                init: base.init.with_cv(cv),
                seed: rng::job_seed(base.seed, cv_index as u64, k as u64),
                snapshot_every: 0,
                sweep: None,
                ..base.clone()
            };
            learn_and_recall(&config)
        })
        .collect()
}

pub fn variation_sweep(
    base: &ExperimentConfig,
    cvs: &[f64],
    seeds_per_cv: usize,
) -> SimResult<Vec<SweepRow>> {
    validate_cvs(cvs)?;
    if seeds_per_cv == 0 {
        return Err(SimError::InvalidConfig("seeds_per_cv must be >= 1".into()));
    }
    cvs.iter()
        .enumerate()
        .map(|(idx, &cv)| {
            let reports = run_ensemble(base, cv, idx, seeds_per_cv)?;
            Ok(SweepRow::from_reports(cv, &reports))
        })
        .collect()
}

/// Mean conductance of the pattern's ON x ON block over the mean conductance of every other cell.
pub fn weight_contrast(array: &CrossbarArray, pattern: &Pattern) -> SimResult<f64> {
    if pattern.len() != array.n() {
        return Err(SimError::DimensionMismatch {
            expected: array.n(),
            found: pattern.len(),
        });
    }
    let on = pattern.on_set();
    let (mut inside, mut n_in, mut outside, mut n_out) = (0.0, 0usize, 0.0, 0usize);
    for ((i, j), cell) in array.cells() {
        if on.contains(&i) && on.contains(&j) {
            inside += cell.conductance();
            n_in += 1;
        } else {
            outside += cell.conductance();
            n_out += 1;
        }
    }
    if n_in == 0 || n_out == 0 {
        return Err(SimError::DegeneratePattern);
    }
    Ok((inside / n_in as f64) / (outside / n_out as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    #[serde(rename = "bin_low_ohm")]
    pub low: f64,
    #[serde(rename = "bin_high_ohm")]
    pub high: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSnapshot {
    pub epoch: u32,
    pub stats: ArrayStats,
    pub histogram: Vec<HistogramBin>,
    pub normalized_weights: Vec<Vec<f64>>,
}

pub const BINS_PER_DECADE: f64 = 10.0;

/// Log-spaced histogram over `[r_min, r_max]` with `BINS_PER_DECADE` bins per decade.
pub fn log_histogram(
    resistances: impl IntoIterator<Item = f64>,
    device: &DeviceParams,
) -> Vec<HistogramBin> {
    let span = (device.r_max / device.r_min).ln();
    let bins = (BINS_PER_DECADE * (device.r_max / device.r_min).log10())
        .ceil()
        .max(1.0) as usize;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|k| HistogramBin {
            low: device.r_min * (span * k as f64 / bins as f64).exp(),
            high: device.r_min * (span * (k + 1) as f64 / bins as f64).exp(),
            count: 0,
        })
        .collect();
    for r in resistances {
        let pos = (r / device.r_min).ln() / span * bins as f64;
        let k = (pos.floor().max(0.0) as usize).min(bins - 1);
        out[k].count += 1;
    }
    out
}

/// Resistance histograms and weights normalized to the initial array, for
/// epoch 0 and every snapshot stored in the report.
pub fn distribution_history(report: &RunReport) -> SimResult<Vec<DistributionSnapshot>> {
    let initial = report
        .initial_resistances
        .as_ref()
        .ok_or(SimError::NoSnapshots)?;
    let device = &report.device;
    let baseline = CrossbarArray::from_resistances(initial, device)?;
    let snapshots = std::iter::once((0, initial)).chain(
        report
            .traces
            .iter()
            .filter_map(|t| t.resistance_snapshot.as_ref().map(|s| (t.epoch, s))),
    );
    snapshots
        .map(|(epoch, matrix)| {
            let array = CrossbarArray::from_resistances(matrix, device)?;
            Ok(DistributionSnapshot {
                epoch,
                stats: array.stats(),
                histogram: log_histogram(matrix.iter().flatten().copied(), device),
                normalized_weights: array.normalized_weights(&baseline)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub pulse: u32,
    #[serde(rename = "resistance_ohm")]
    pub resistance: f64,
    #[serde(rename = "energy_J")]
    pub energy: f64,
}

/// Gradual-SET trajectory of one cell starting at `r_start`: point 0 is the
/// starting state, point `k` the state after `k` SET pulses together with the
/// energy of that pulse.
pub fn gradual_set_curve(
    device: &DeviceParams,
    pulse: &PulseSpec,
    r_start: f64,
    pulses: u32,
    seed: u64,
) -> SimResult<Vec<CurvePoint>> {
    device.validate()?;
    pulse.validate(device)?;
    let mut rng = rng::stream(seed, rng::LEARN_STREAM);
    let mut cell = PcmCell::new(r_start, device);
    let mut out = vec![CurvePoint {
        pulse: 0,
        resistance: cell.resistance(),
        energy: 0.0,
    }];
    for k in 1..=pulses {
        let (next, energy) = cell.apply_set_pulse(pulse, device, &mut rng)?;
        cell = next;
        out.push(CurvePoint {
            pulse: k,
            resistance: cell.resistance(),
            energy,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_free() -> ExperimentConfig {
        let mut c = ExperimentConfig::paper_default();
        c.device = c.device.noise_free();
        c
    }

    #[test]
    fn paper_default_is_valid() {
        ExperimentConfig::paper_default().validate().unwrap();
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::paper_default();
        c.patterns.clear();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::paper_default();
        c.recall_target = Pattern::pattern_two();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::paper_default();
        c.sweep = Some(SweepSpec {
            cvs: vec![0.6, 0.09],
            seeds_per_cv: 3,
        });
        assert!(c.validate().is_err());
    }

    #[test]
    fn noise_free_run_recalls_in_one_epoch() {
        let r = learn_and_recall(&noise_free()).unwrap();
        assert_eq!(r.epochs_to_recall, Some(1));
        assert_eq!(r.traces.len(), 2);
        assert_eq!(r.probes.len(), 1);
        assert_eq!(r.probes[0].final_set, Pattern::pattern_one().on_set());
        assert_eq!(r.total_energy, r.energy_breakdown.total());
    }

    #[test]
    fn contrast_examples() {
        let base = CrossbarArray::uniform(10, 1e6, &DeviceParams::default().noise_free()).unwrap();
        assert!((weight_contrast(&base, &Pattern::pattern_one()).unwrap() - 1.0).abs() < 1e-12);
        let r = learn_and_recall(&noise_free()).unwrap();
        // Pattern 2's block is also strengthened, so the "other" population is
        // 50 cells at 1 MOhm and 25 cells at 406 kOhm.
        let g_on = 1.0 / 406e3;
        let g_off = (50.0 / 1e6 + 25.0 / 406e3) / 75.0;
        assert!((r.contrast_history[1] - g_on / g_off).abs() < 1e-12);
        let all_on = Pattern::from_on_set(10, &(0..10).collect()).unwrap();
        assert_eq!(
            weight_contrast(&base, &all_on).unwrap_err(),
            SimError::DegeneratePattern
        );
        let none = Pattern::from_on_set(10, &NeuronSet::new()).unwrap();
        assert_eq!(
            weight_contrast(&base, &none).unwrap_err(),
            SimError::DegeneratePattern
        );
    }

    #[test]
    fn single_pattern_contrast_matches_closed_form() {
        let mut c = noise_free();
        c.patterns = vec![Pattern::pattern_one()];
        let r = learn_and_recall(&c).unwrap();
        assert!((r.contrast_history[1] - 1e6 / 406e3).abs() < 1e-12);
    }

    #[test]
    fn contrast_non_decreasing_noise_free() {
        let mut c = noise_free();
        c.recall_target = Pattern::pattern_one();
        // Unreachable target keeps training going for all epochs.
        c.recall_stimulus = Pattern::from_neuron_numbers(10, &[1]).unwrap();
        c.max_epochs = 10;
        c.protocol.threshold_factor = 1e6;
        let r = learn_and_recall(&c).unwrap();
        assert_eq!(r.epochs_to_recall, None);
        assert_eq!(r.contrast_history.len(), 11);
        assert!(r.contrast_history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn sweep_row_median_handles_not_reached() {
        let mut r = learn_and_recall(&noise_free()).unwrap();
        r.total_energy = 1.0;
        let mut miss = r.clone();
        miss.epochs_to_recall = None;
        miss.total_energy = 3.0;
        let row = SweepRow::from_reports(0.1, &[r.clone(), miss.clone(), miss.clone()]);
        assert!(row.median_epochs.is_infinite());
        assert!((row.success_rate - 1.0 / 3.0).abs() < 1e-15);
        let row = SweepRow::from_reports(0.1, &[r.clone(), r.clone(), miss]);
        assert_eq!(row.median_epochs, 1.0);
        assert!((row.mean_energy - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_cv_sweep_has_no_spread() {
        let c = noise_free();
        let single = learn_and_recall(&c).unwrap();
        let reports = run_ensemble(&c, 0.0, 0, 8).unwrap();
        assert!(reports
            .iter()
            .all(|r| r.epochs_to_recall == single.epochs_to_recall
                && r.total_energy == single.total_energy));
        let rows = variation_sweep(&c, &[0.0], 8).unwrap();
        assert_eq!(rows[0].median_epochs, 1.0);
        assert_eq!(rows[0].mean_energy, single.total_energy);
        assert_eq!(rows[0].success_rate, 1.0);
    }

    #[test]
    fn sweep_rejects_bad_input() {
        let c = noise_free();
        assert!(variation_sweep(&c, &[], 4).is_err());
        assert!(variation_sweep(&c, &[0.5, 0.1], 4).is_err());
        assert!(variation_sweep(&c, &[0.1], 0).is_err());
    }

    #[test]
    fn histogram_examples() {
        let r = learn_and_recall(&noise_free()).unwrap();
        let h = distribution_history(&r).unwrap();
        assert_eq!(h[0].epoch, 0);
        assert_eq!(h[0].histogram.iter().filter(|b| b.count > 0).count(), 1);
        assert_eq!(h[0].histogram.iter().map(|b| b.count).sum::<usize>(), 100);
        let last = h.last().unwrap();
        assert_eq!(last.epoch, 1);
        let occupied: Vec<_> = last.histogram.iter().filter(|b| b.count > 0).collect();
        assert_eq!(occupied.len(), 2);
        assert_eq!(occupied.iter().map(|b| b.count).sum::<usize>(), 100);
        let on1 = Pattern::pattern_one().on_set();
        let on2 = Pattern::pattern_two().on_set();
        for (i, row) in last.normalized_weights.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                let trained = (on1.contains(&i) && on1.contains(&j))
                    || (on2.contains(&i) && on2.contains(&j));
                if !trained {
                    assert_eq!(w, 1.0);
                }
            }
        }
    }

    #[test]
    fn history_requires_snapshots() {
        let mut c = noise_free();
        c.snapshot_every = 0;
        let r = learn_and_recall(&c).unwrap();
        assert_eq!(distribution_history(&r).unwrap_err(), SimError::NoSnapshots);
    }

    #[test]
    fn histogram_edges_cover_window() {
        let d = DeviceParams::default();
        let h = log_histogram([d.r_min, d.r_max], &d);
        assert_eq!(h.len(), 30);
        assert!((h[0].low - d.r_min).abs() < 1e-6);
        assert!((h[29].high - d.r_max).abs() < 1e-3);
        assert_eq!(h[0].count, 1);
        assert_eq!(h[29].count, 1);
    }

    #[test]
    fn device_curve_noise_free_is_geometric() {
        let d = DeviceParams::default().noise_free();
        let curve = gradual_set_curve(&d, &PulseSpec::paper_set(), 1e6, 10, 0).unwrap();
        assert_eq!(curve.len(), 11);
        for p in &curve {
            let expected = d.r_min + (1e6 - d.r_min) * 0.4f64.powi(p.pulse as i32);
            assert!((p.resistance - expected).abs() <= 1e-12 * expected);
        }
    }
}

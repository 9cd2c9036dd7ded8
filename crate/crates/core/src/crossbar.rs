//! N x N array of 1T1R phase-change cells.
//!
//! Cell `(i, j)` sits on bitline `i` and wordline `j`. The selection
//! transistor is an ideal switch: a cell conducts only when its wordline is
//! gated, so a bitline read sums the currents of gated cells on that row and
//! programming touches exactly the driven x gated block.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::device::{pulse_energy, read_current, DeviceParams, PcmCell, PulseRole, PulseSpec};
use crate::error::{SimError, SimResult};

/// Sorted set of neuron (line) indices.
pub type NeuronSet = BTreeSet<usize>;

/// How the array is brought to its initial high-resistance state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitVariant {
    /// The same RESET pulse applied to every cell, landing in a partial RESET state.
    UniformPartialReset(f64),
    /// Per-cell tuned RESET amplitudes, landing in the full RESET state.
    TunedFullReset(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitScheme {
    pub variant: InitVariant,
    /// Target median resistance; falls back to the variant's device median when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub median: Option<f64>,
}

impl InitScheme {
    pub fn uniform_partial_reset(cv: f64) -> Self {
        Self {
            variant: InitVariant::UniformPartialReset(cv),
            median: None,
        }
    }

    pub fn tuned_full_reset(cv: f64) -> Self {
        Self {
            variant: InitVariant::TunedFullReset(cv),
            median: None,
        }
    }

    pub fn cv(&self) -> f64 {
        match self.variant {
            InitVariant::UniformPartialReset(cv) | InitVariant::TunedFullReset(cv) => cv,
        }
    }

    /// Same variant and median with a different target spread.
    pub fn with_cv(self, cv: f64) -> Self {
        let variant = match self.variant {
            InitVariant::UniformPartialReset(_) => InitVariant::UniformPartialReset(cv),
            InitVariant::TunedFullReset(_) => InitVariant::TunedFullReset(cv),
        };
        Self { variant, ..self }
    }

    pub fn median(&self, params: &DeviceParams) -> f64 {
        self.median.unwrap_or(match self.variant {
            InitVariant::UniformPartialReset(_) => params.r_reset_partial_median,
            InitVariant::TunedFullReset(_) => params.r_reset_full_median,
        })
    }

    pub fn validate(&self, params: &DeviceParams) -> SimResult<()> {
        let cv = self.cv();
        if !(0.0..2.0).contains(&cv) {
            return Err(SimError::InvalidConfig(format!(
                "init cv {cv} outside [0, 2)"
            )));
        }
        let median = self.median(params);
        if !(median.is_finite() && median > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "init median {median} must be > 0"
            )));
        }
        Ok(())
    }
}

/// Population statistics of the array's resistances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayStats {
    #[serde(rename = "mean_ohm")]
    pub mean: f64,
    #[serde(rename = "std_ohm")]
    pub std: f64,
    pub cv: f64,
    #[serde(rename = "min_ohm")]
    pub min: f64,
    #[serde(rename = "max_ohm")]
    pub max: f64,
    #[serde(rename = "median_ohm")]
    pub median: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitlineRead {
    pub current: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Programming {
    pub array: CrossbarArray,
    pub energy: f64,
    pub programmed_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossbarArray {
    n: usize,
    cells: Vec<PcmCell>,
    params: DeviceParams,
}

impl CrossbarArray {
    /// RESET every cell once according to `scheme`, row-major.
    pub fn init<R: Rng + ?Sized>(
        n: usize,
        scheme: &InitScheme,
        params: &DeviceParams,
        rng: &mut R,
    ) -> SimResult<Self> {
        if n < 2 {
            return Err(SimError::InvalidDimension(n));
        }
        params.validate()?;
        scheme.validate(params)?;
        let median = scheme.median(params);
        let cv = scheme.cv();
        let reset = PulseSpec::paper_reset();
        let mut cells = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            let (cell, _) = PcmCell::new(params.r_max, params)
                .apply_reset_pulse(&reset, params, median, cv, rng)?;
            cells.push(cell);
        }
        Ok(Self {
            n,
            cells,
            params: *params,
        })
    }

    /// Every cell at the same resistance (clamped to the device window).
    pub fn uniform(n: usize, resistance: f64, params: &DeviceParams) -> SimResult<Self> {
        if n < 2 {
            return Err(SimError::InvalidDimension(n));
        }
        Ok(Self {
            n,
            cells: vec![PcmCell::new(resistance, params); n * n],
            params: *params,
        })
    }

    /// Builds an array from a row-major resistance matrix (row = bitline).
    pub fn from_resistances(rows: &[Vec<f64>], params: &DeviceParams) -> SimResult<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(SimError::InvalidDimension(n));
        }
        let mut cells = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(SimError::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for &r in row {
                if !(r >= params.r_min && r <= params.r_max) {
                    return Err(SimError::InvalidConfig(format!(
                        "resistance {r} ohm outside [{}, {}]",
                        params.r_min, params.r_max
                    )));
                }
                cells.push(PcmCell::new(r, params));
            }
        }
        Ok(Self {
            n,
            cells,
            params: *params,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &DeviceParams {
        &self.params
    }

    pub fn cell(&self, bl: usize, wl: usize) -> &PcmCell {
        &self.cells[bl * self.n + wl]
    }

    pub fn resistance(&self, bl: usize, wl: usize) -> f64 {
        self.cell(bl, wl).resistance()
    }

    pub fn cells(&self) -> impl Iterator<Item = ((usize, usize), &PcmCell)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .map(move |(k, c)| ((k / self.n, k % self.n), c))
    }

    /// Row-major resistance matrix, row = bitline.
    pub fn resistances(&self) -> Vec<Vec<f64>> {
        self.cells
            .chunks(self.n)
            .map(|row| row.iter().map(PcmCell::resistance).collect())
            .collect()
    }

    fn check_index(&self, index: usize) -> SimResult<()> {
        if index >= self.n {
            Err(SimError::IndexOutOfRange { index, n: self.n })
        } else {
            Ok(())
        }
    }

    fn check_set(&self, set: &NeuronSet) -> SimResult<()> {
        match set.iter().next_back() {
            Some(&last) => self.check_index(last),
            None => Ok(()),
        }
    }

    /// Total current into bitline `bl` with the given wordlines gated, and the read energy.
    pub fn read_bitline(
        &self,
        bl: usize,
        gated: &NeuronSet,
        read: &PulseSpec,
    ) -> SimResult<BitlineRead> {
        self.check_index(bl)?;
        self.check_set(gated)?;
        if read.role != PulseRole::Read {
            return Err(SimError::WrongPulseRole {
                expected: PulseRole::Read,
                found: read.role,
            });
        }
        let mut out = BitlineRead {
            current: 0.0,
            energy: 0.0,
        };
        for &wl in gated {
            let cell = self.cell(bl, wl);
            out.current += read_current(cell, read.amplitude);
            out.energy += pulse_energy(read, cell.resistance());
        }
        Ok(out)
    }

    /// Applies one SET pulse to every cell in `driven x gated`, visiting cells row-major.
    pub fn program_cells<R: Rng + ?Sized>(
        &self,
        driven: &NeuronSet,
        gated: &NeuronSet,
        pulse: &PulseSpec,
        rng: &mut R,
    ) -> SimResult<Programming> {
        self.check_set(driven)?;
        self.check_set(gated)?;
        let mut array = self.clone();
        let mut energy = 0.0;
        let mut programmed_count = 0;
        for &bl in driven {
            for &wl in gated {
                let slot = &mut array.cells[bl * self.n + wl];
                let (cell, e) = slot.apply_set_pulse(pulse, &self.params, rng)?;
                *slot = cell;
                energy += e;
                programmed_count += 1;
            }
        }
        Ok(Programming {
            array,
            energy,
            programmed_count,
        })
    }

    pub fn stats(&self) -> ArrayStats {
        let mut rs: Vec<f64> = self.cells.iter().map(PcmCell::resistance).collect();
        let count = rs.len() as f64;
        let mean = rs.iter().sum::<f64>() / count;
        let var = rs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / count;
        let std = var.sqrt();
        rs.sort_by(f64::total_cmp);
        let mid = rs.len() / 2;
        let median = if rs.len().is_multiple_of(2) {
            0.5 * (rs[mid - 1] + rs[mid])
        } else {
            rs[mid]
        };
        ArrayStats {
            mean,
            std,
            cv: std / mean,
            min: rs[0],
            max: rs[rs.len() - 1],
            median,
        }
    }

    /// Element-wise `resistance / baseline resistance`.
    pub fn normalized_weights(&self, baseline: &CrossbarArray) -> SimResult<Vec<Vec<f64>>> {
        if baseline.n != self.n {
            return Err(SimError::DimensionMismatch {
                expected: self.n,
                found: baseline.n,
            });
        }
        Ok(self
            .cells
            .chunks(self.n)
            .zip(baseline.cells.chunks(self.n))
            .map(|(row, base)| {
                row.iter()
                    .zip(base)
                    .map(|(c, b)| c.resistance() / b.resistance())
                    .collect()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(items: &[usize]) -> NeuronSet {
        items.iter().copied().collect()
    }

    fn quiet() -> DeviceParams {
        DeviceParams::default().noise_free()
    }

    #[test]
    fn init_rejects_small_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = CrossbarArray::init(1, &InitScheme::tuned_full_reset(0.0), &quiet(), &mut rng);
        assert_eq!(err.unwrap_err(), SimError::InvalidDimension(1));
    }

    #[test]
    fn init_zero_cv_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = CrossbarArray::init(10, &InitScheme::tuned_full_reset(0.0), &quiet(), &mut rng)
            .unwrap();
        assert!(a.cells().all(|(_, c)| c.resistance() == 1e6));
        let s = a.stats();
        assert_eq!(s.cv, 0.0);
        assert_eq!(s.mean, 1e6);
        assert_eq!(s.median, 1e6);
    }

    #[test]
    fn init_scheme_medians() {
        let p = DeviceParams {
            r_reset_partial_median: 200e3,
            ..quiet()
        };
        assert_eq!(InitScheme::uniform_partial_reset(0.6).median(&p), 200e3);
        assert_eq!(InitScheme::tuned_full_reset(0.09).median(&p), 1e6);
        let explicit = InitScheme {
            median: Some(3e6),
            ..InitScheme::tuned_full_reset(0.0)
        };
        assert_eq!(explicit.median(&p), 3e6);
        assert!(InitScheme::tuned_full_reset(2.0).validate(&p).is_err());
    }

    #[test]
    fn low_cv_single_seed_within_sampling_bound() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a =
                CrossbarArray::init(10, &InitScheme::tuned_full_reset(0.09), &quiet(), &mut rng)
                    .unwrap();
            let cv = a.stats().cv;
            assert!((cv - 0.09).abs() <= 0.3 * 0.09, "seed {seed}: cv {cv}");
        }
    }

    #[test]
    fn read_empty_gate_set() {
        let a = CrossbarArray::uniform(10, 1e6, &quiet()).unwrap();
        let r = a
            .read_bitline(3, &NeuronSet::new(), &PulseSpec::read(0.1))
            .unwrap();
        assert_eq!(r.current, 0.0);
        assert_eq!(r.energy, 0.0);
    }

    #[test]
    fn read_four_gated_uniform() {
        let a = CrossbarArray::uniform(10, 1e6, &quiet()).unwrap();
        let r = a
            .read_bitline(7, &set(&[0, 1, 2, 3]), &PulseSpec::read(0.1))
            .unwrap();
        assert!((r.current - 400e-9).abs() < 1e-20);
        assert!((r.energy - 4e-12).abs() < 1e-24);
    }

    #[test]
    fn read_out_of_range() {
        let a = CrossbarArray::uniform(4, 1e6, &quiet()).unwrap();
        let read = PulseSpec::read(0.1);
        assert_eq!(
            a.read_bitline(4, &NeuronSet::new(), &read).unwrap_err(),
            SimError::IndexOutOfRange { index: 4, n: 4 }
        );
        assert!(a.read_bitline(0, &set(&[9]), &read).is_err());
        assert!(a
            .read_bitline(0, &set(&[0]), &PulseSpec::paper_set())
            .is_err());
    }

    #[test]
    fn program_single_cell() {
        let a = CrossbarArray::uniform(10, 1e6, &quiet()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = a
            .program_cells(&set(&[0]), &set(&[0]), &PulseSpec::paper_set(), &mut rng)
            .unwrap();
        assert_eq!(p.programmed_count, 1);
        let changed = p
            .array
            .cells()
            .filter(|((i, j), c)| c != &a.cell(*i, *j))
            .count();
        assert_eq!(changed, 1);
        assert!((p.array.resistance(0, 0) - 406e3).abs() < 1e-6);
    }

    #[test]
    fn program_pattern_block() {
        let a = CrossbarArray::uniform(10, 1e6, &quiet()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let on = set(&[0, 1, 2, 3, 5]);
        let p = a
            .program_cells(&on, &on, &PulseSpec::paper_set(), &mut rng)
            .unwrap();
        assert_eq!(p.programmed_count, 25);
        for ((i, j), c) in p.array.cells() {
            let inside = on.contains(&i) && on.contains(&j);
            assert_eq!(c.resistance() < 1e6, inside, "cell ({i},{j})");
        }
    }

    #[test]
    fn program_empty_driven() {
        let a = CrossbarArray::uniform(10, 1e6, &quiet()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = a
            .program_cells(
                &NeuronSet::new(),
                &set(&[1, 2]),
                &PulseSpec::paper_set(),
                &mut rng,
            )
            .unwrap();
        assert_eq!(p.programmed_count, 0);
        assert_eq!(p.energy, 0.0);
        assert_eq!(p.array, a);
    }

    #[test]
    fn program_propagates_threshold_error() {
        let a = CrossbarArray::uniform(10, 1e6, &quiet()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut weak = PulseSpec::paper_set();
        weak.amplitude = 0.2;
        let err = a
            .program_cells(&set(&[0]), &set(&[0]), &weak, &mut rng)
            .unwrap_err();
        assert!(matches!(err, SimError::AmplitudeBelowThreshold { .. }));
        assert!(a
            .program_cells(&set(&[10]), &set(&[0]), &PulseSpec::paper_set(), &mut rng)
            .is_err());
    }

    #[test]
    fn two_cell_population_stats() {
        // 2x2 array holding {1, 3, 1, 3} MOhm has the same population moments as {1, 3}.
        let p = quiet();
        let a = CrossbarArray::from_resistances(&[vec![1e6, 3e6], vec![1e6, 3e6]], &p).unwrap();
        let s = a.stats();
        assert_eq!(s.mean, 2e6);
        assert_eq!(s.std, 1e6);
        assert_eq!(s.cv, 0.5);
        assert_eq!(s.median, 2e6);
        assert_eq!((s.min, s.max), (1e6, 3e6));
    }

    #[test]
    fn from_resistances_validates() {
        let p = quiet();
        assert!(CrossbarArray::from_resistances(&[vec![1e6, 1e6], vec![1e6]], &p).is_err());
        assert!(CrossbarArray::from_resistances(&[vec![1e6, 1e6], vec![1e6, 1.0]], &p).is_err());
        assert!(CrossbarArray::from_resistances(&[vec![1e6]], &p).is_err());
    }

    #[test]
    fn normalized_weights_after_one_set() {
        let base = CrossbarArray::uniform(10, 1e6, &quiet()).unwrap();
        assert!(base
            .normalized_weights(&base)
            .unwrap()
            .iter()
            .flatten()
            .all(|&w| w == 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = base
            .program_cells(&set(&[2]), &set(&[5]), &PulseSpec::paper_set(), &mut rng)
            .unwrap();
        let w = p.array.normalized_weights(&base).unwrap();
        for (i, row) in w.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if (i, j) == (2, 5) {
                    assert!((v - 0.406).abs() < 1e-12);
                } else {
                    assert_eq!(v, 1.0);
                }
            }
        }
        let other = CrossbarArray::uniform(3, 1e6, &quiet()).unwrap();
        assert!(matches!(
            base.normalized_weights(&other),
            Err(SimError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn normalized_weights_decrease_with_repeated_programming() {
        let base = CrossbarArray::uniform(10, 1e6, &quiet()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let block = set(&[1, 4]);
        let mut a = base.clone();
        let mut last = 1.0;
        for _ in 0..8 {
            a = a
                .program_cells(&block, &block, &PulseSpec::paper_set(), &mut rng)
                .unwrap()
                .array;
            let w = a.normalized_weights(&base).unwrap()[1][4];
            assert!(w < last);
            last = w;
        }
    }

    #[test]
    fn training_makes_distribution_wider_downward() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = CrossbarArray::init(
            10,
            &InitScheme::tuned_full_reset(0.09),
            &DeviceParams::default(),
            &mut rng,
        )
        .unwrap();
        let before = a.stats();
        let on = set(&[0, 1, 2, 3, 5]);
        let trained = a
            .program_cells(&on, &on, &PulseSpec::paper_set(), &mut rng)
            .unwrap()
            .array;
        let after = trained.stats();
        assert!(after.min < before.min);
        assert!(after.cv > before.cv);
    }
}

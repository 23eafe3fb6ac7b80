//! Synthetic rainfall with planted wet/dry patterns and known labels.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma};

use crate::grid::{CalendarIndex, GridGeometry, RainfallField};
use crate::matrix::Matrix;
use crate::stats::sample_categorical;
use crate::{Error, Result};

/// South-west corner of synthetic grids (degrees lat, lon).
pub const SYNTH_ORIGIN: (f64, f64) = (8.0, 68.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthEmission {
    pub dry_mean_mm: f64,
    pub wet_mean_mm: f64,
    pub wet_shape: f64,
}

impl Default for SynthEmission {
    fn default() -> Self {
        Self { dry_mean_mm: 1.0, wet_mean_mm: 15.0, wet_shape: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub n_years: usize,
    pub n_patterns: usize,
    /// `n_patterns` vectors of per-location wet probabilities.
    pub pattern_wet_probs: Vec<Vec<f64>>,
    pub transition: Matrix<f64>,
    pub emission: SynthEmission,
    pub flip_noise: f64,
    pub seed: u64,
    pub first_year: i32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self::banded(8, 8, 2, 4, 0.9, 0.1, 0)
    }
}

impl SynthSpec {
    /// Patterns wet (probability 0.9) on disjoint bands of consecutive
    /// location ids and dry (0.05) elsewhere; each pattern persists with
    /// probability `stay` and otherwise moves uniformly to another.
    pub fn banded(
        grid_rows: usize,
        grid_cols: usize,
        n_years: usize,
        n_patterns: usize,
        stay: f64,
        flip_noise: f64,
        seed: u64,
    ) -> Self {
        let n_loc = grid_rows * grid_cols;
        let pattern_wet_probs = (0..n_patterns)
            .map(|k| (0..n_loc).map(|s| if s * n_patterns / n_loc.max(1) == k { 0.9 } else { 0.05 }).collect())
            .collect();
        let mut transition = Matrix::filled(n_patterns, n_patterns, 0.0);
        for i in 0..n_patterns {
            for j in 0..n_patterns {
                let p = if n_patterns == 1 {
                    1.0
                } else if i == j {
                    stay
                } else {
                    (1.0 - stay) / (n_patterns - 1) as f64
                };
                transition.set(i, j, p);
            }
        }
        Self {
            grid_rows,
            grid_cols,
            n_years,
            n_patterns,
            pattern_wet_probs,
            transition,
            emission: SynthEmission::default(),
            flip_noise,
            seed,
            first_year: 2000,
        }
    }

    pub fn n_locations(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    pub fn validate(&self) -> Result<()> {
        let n_loc = self.n_locations();
        let k = self.n_patterns;
        if n_loc == 0 || self.n_years == 0 || k == 0 {
            return Err(Error::InvalidParameter("grid, years and patterns must all be non-empty".into()));
        }
        if self.pattern_wet_probs.len() != k || self.pattern_wet_probs.iter().any(|p| p.len() != n_loc) {
            return Err(Error::Dimension(format!("pattern_wet_probs must be {k} vectors of length {n_loc}")));
        }
        if self.pattern_wet_probs.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter("wet probabilities must lie in [0, 1]".into()));
        }
        if self.transition.rows() != k || self.transition.cols() != k {
            return Err(Error::Dimension(format!("transition must be {k}x{k}")));
        }
        for i in 0..k {
            let row = self.transition.row(i);
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::NotStochastic(format!("transition row {i} sums to {sum}")));
            }
        }
        if !(0.0..0.5).contains(&self.flip_noise) {
            return Err(Error::InvalidParameter(format!("flip_noise must lie in [0, 0.5), got {}", self.flip_noise)));
        }
        let e = &self.emission;
        for (name, v) in [("dry_mean_mm", e.dry_mean_mm), ("wet_mean_mm", e.wet_mean_mm), ("wet_shape", e.wet_shape)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub field: RainfallField,
    pub z: Matrix<u8>,
    pub u: Vec<usize>,
    /// Pattern with the highest wet probability at each location.
    pub v: Vec<usize>,
}

pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let n_loc = spec.n_locations();
    let k = spec.n_patterns;
    let geometry = GridGeometry::rectangular(spec.grid_rows, spec.grid_cols, SYNTH_ORIGIN);
    let calendar = CalendarIndex::full_seasons(spec.first_year, spec.n_years);
    let n_days = calendar.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let uniform_start = alloc::vec![1.0 / k as f64; k];
    let mut u = Vec::with_capacity(n_days);
    for season in calendar.seasons() {
        let mut cur = sample_categorical(&uniform_start, rng.random());
        for t in season.clone() {
            if t > season.start {
                cur = sample_categorical(spec.transition.row(cur), rng.random());
            }
            u.push(cur);
        }
    }

    let mut z = Matrix::filled(n_loc, n_days, 0u8);
    for (t, &ut) in u.iter().enumerate() {
        for s in 0..n_loc {
            let mut wet = rng.random::<f64>() < spec.pattern_wet_probs[ut][s];
            if rng.random::<f64>() < spec.flip_noise {
                wet = !wet;
            }
            z.set(s, t, u8::from(wet));
        }
    }

    let e = &spec.emission;
    let dry = Exp::new(1.0 / e.dry_mean_mm).map_err(|err| Error::InvalidParameter(format!("dry emission: {err}")))?;
    let wet = Gamma::new(e.wet_shape, e.wet_mean_mm / e.wet_shape)
        .map_err(|err| Error::InvalidParameter(format!("wet emission: {err}")))?;
    let mut x = Matrix::filled(n_loc, n_days, 0.0);
    for t in 0..n_days {
        for s in 0..n_loc {
            let value = if z.get(s, t) == 1 { wet.sample(&mut rng) } else { dry.sample(&mut rng) };
            x.set(s, t, value);
        }
    }

    let v = (0..n_loc)
        .map(|s| {
            let mut best = 0;
            for kk in 1..k {
                if spec.pattern_wet_probs[kk][s] > spec.pattern_wet_probs[best][s] {
                    best = kk;
                }
            }
            best
        })
        .collect();
    let field = RainfallField::new(geometry, calendar, x)?;
    Ok(SynthOutput { field, z, u, v })
}

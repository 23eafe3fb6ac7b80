//! Gibbs sampling over `(Z, U, V)` with maximum-a-posteriori tracking.
//!
//! A sweep updates the wet/dry sites in two half-sweeps. Site `(s,t)` has
//! colour `(c(s) + t) mod 2`, where `c` is the two-colouring of the location
//! graph, so no two sites of one colour share a spatial or temporal edge and
//! each half-sweep is an exact parallel Gibbs step. The day labels are then
//! updated in order, then the location labels, and finally the cluster
//! prototypes are refreshed from the new state.
//!
//! Every random draw is addressed by `(sweep, phase, site)` (see
//! [`crate::rng`]), so the output is identical for any worker count.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::baselines::kmeans_restarts;
use crate::grid::{CalendarIndex, RainfallField};
use crate::matrix::Matrix;
use crate::model::{
    bern_logs, density_terms_cached, label_counts, refresh_prototypes_with_aggregate, z_log_weights,
    ClusterPrototypes, LatentState, ModelParams,
};
use crate::rng::{CounterRng, INIT_STREAM};
use crate::spells::{threshold_discretize, Threshold};
use crate::stats::{normalize_log_weights, sample_categorical};
use crate::{exec, Error, Result};

const PHASE_U: u64 = 2;
const PHASE_V: u64 = 3;
/// Iteration cap and restart count of the k-means used to initialize labels.
const INIT_KMEANS_ITER: usize = 100;
const INIT_KMEANS_RESTARTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Initialization {
    /// `z(s,t) = 1[x(s,t) > μ_s]`, labels by k-means on the columns and rows of `z`.
    ThresholdLocalMean,
    /// Independent fair coins for `z`, uniform labels.
    Random,
    Given(LatentState),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplerConfig {
    pub n_sweeps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub init: Initialization,
    /// Keep the highest-density state visited after burn-in. When off, the
    /// reported MAP state is the final state.
    pub track_mode: bool,
    /// Threads used by the `parallel` feature; ignored otherwise.
    pub worker_count: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_sweeps: 500,
            burn_in: 100,
            seed: 0,
            init: Initialization::ThresholdLocalMean,
            track_mode: true,
            worker_count: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sweeps == 0 {
            return Err(Error::InvalidParameter("n_sweeps must be >= 1".into()));
        }
        if self.burn_in >= self.n_sweeps {
            return Err(Error::InvalidParameter(format!(
                "burn_in ({}) must be smaller than n_sweeps ({})",
                self.burn_in, self.n_sweeps
            )));
        }
        if self.worker_count == 0 {
            return Err(Error::InvalidParameter("worker_count must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepStats {
    /// One-based sweep number.
    pub sweep: usize,
    /// Joint log density after the sweep and prototype refresh.
    pub log_density: f64,
    pub changed_z: usize,
    pub changed_u: usize,
    pub changed_v: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerResult {
    pub map_state: LatentState,
    pub map_prototypes: ClusterPrototypes,
    pub map_log_density: f64,
    /// Sweep at which the MAP state was reached.
    pub map_sweep: usize,
    pub final_state: LatentState,
    pub final_prototypes: ClusterPrototypes,
    pub final_log_density: f64,
    pub trace: Vec<SweepStats>,
    /// Best density so far, for every sweep from `burn_in + 1` on.
    pub map_trace: Vec<f64>,
}

/// Starting state and its prototypes.
pub fn initialize(
    field: &RainfallField,
    params: &ModelParams,
    config: &SamplerConfig,
) -> Result<(LatentState, ClusterPrototypes)> {
    params.validate()?;
    let (n_loc, n_days) = (field.n_locations(), field.n_days());
    let state = match &config.init {
        Initialization::Given(state) => {
            state.check(field, params)?;
            state.clone()
        }
        Initialization::Random => {
            let rng = CounterRng::new(config.seed);
            let mut draws = rng.at(INIT_STREAM, 0);
            let mut z = Matrix::filled(n_loc, n_days, 0u8);
            for s in 0..n_loc {
                for t in 0..n_days {
                    z.set(s, t, u8::from(draws.random::<f64>() < 0.5));
                }
            }
            let u = (0..n_days).map(|_| draws.random_range(0..params.max_clusters_u)).collect();
            let v = (0..n_loc).map(|_| draws.random_range(0..params.max_clusters_v)).collect();
            LatentState { z, u, v }
        }
        Initialization::ThresholdLocalMean => {
            let z = threshold_discretize(field, Threshold::LocalMean)?;
            let as_f64 = |v: Vec<u8>| v.into_iter().map(f64::from).collect::<Vec<f64>>();
            let columns: Vec<Vec<f64>> = (0..n_days).map(|t| as_f64(z.column(t))).collect();
            let rows: Vec<Vec<f64>> = (0..n_loc).map(|s| as_f64(z.row(s).to_vec())).collect();
            let u = kmeans_restarts(&columns, params.max_clusters_u.min(n_days), config.seed, INIT_KMEANS_ITER, INIT_KMEANS_RESTARTS)?
                .clustering
                .labels;
            let v = kmeans_restarts(&rows, params.max_clusters_v.min(n_loc), !config.seed, INIT_KMEANS_ITER, INIT_KMEANS_RESTARTS)?
                .clustering
                .labels;
            LatentState { z, u, v }
        }
    };
    let y = field.daily_aggregate();
    let proto = refresh_prototypes_with_aggregate(&state, &y, params);
    Ok((state, proto))
}

/// Step-by-step sampler over a fixed field.
#[derive(Debug, Clone)]
pub struct GibbsSampler<'a> {
    field: &'a RainfallField,
    params: ModelParams,
    rng: CounterRng,
    y: Vec<f64>,
    /// `[ln p(x|dry), ln p(x|wet)]` per site, indexed `s * D + t`.
    emission: Vec<[f64; 2]>,
    /// Sites `(s, t)` of each checkerboard colour.
    colors: [Vec<(usize, usize)>; 2],
    state: LatentState,
    proto: ClusterPrototypes,
    sweeps_done: usize,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(field: &'a RainfallField, params: ModelParams, state: LatentState, seed: u64) -> Result<Self> {
        params.validate()?;
        state.check(field, &params)?;
        let (n_loc, n_days) = (field.n_locations(), field.n_days());
        let x = field.x();
        let mut emission = Vec::with_capacity(n_loc * n_days);
        let mut colors = [Vec::new(), Vec::new()];
        for s in 0..n_loc {
            for t in 0..n_days {
                emission.push(params.emission.log_likelihoods(x.get(s, t)));
                colors[site_color(field, s, t)].push((s, t));
            }
        }
        let y = field.daily_aggregate();
        let proto = refresh_prototypes_with_aggregate(&state, &y, &params);
        Ok(Self { field, params, rng: CounterRng::new(seed), y, emission, colors, state, proto, sweeps_done: 0 })
    }

    pub fn state(&self) -> &LatentState {
        &self.state
    }

    pub fn prototypes(&self) -> &ClusterPrototypes {
        &self.proto
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps_done
    }

    pub fn log_density(&self) -> f64 {
        density_terms_cached(&self.state, self.field, &self.y, &self.params, &self.proto, &self.emission).total()
    }

    /// One full sweep followed by a prototype refresh.
    pub fn sweep(&mut self) -> SweepStats {
        let sweep = self.sweeps_done as u64;
        let changed_z = self.update_z(sweep, 0) + self.update_z(sweep, 1);
        let changed_u = self.update_u(sweep);
        let changed_v = self.update_v(sweep);
        self.proto = refresh_prototypes_with_aggregate(&self.state, &self.y, &self.params);
        self.sweeps_done += 1;
        SweepStats { sweep: self.sweeps_done, log_density: self.log_density(), changed_z, changed_u, changed_v }
    }

    fn update_z(&mut self, sweep: u64, color: usize) -> usize {
        let n_days = self.field.n_days();
        let n_loc = self.field.n_locations();
        let uniforms = self.rng.fill(CounterRng::sweep_stream(sweep, color as u64), n_loc * n_days);
        let log_pi = prototype_logs(&self.proto.pi);
        let log_tau = prototype_logs(&self.proto.tau);
        let sites = &self.colors[color];
        let (field, params, state, emission) = (self.field, &self.params, &self.state, &self.emission);
        let draws: Vec<u8> = exec::map_range(sites.len(), |i| {
            let (s, t) = sites[i];
            let mut w = z_log_weights(
                s,
                t,
                &state.z,
                field,
                params,
                log_pi[state.u[t] * n_loc + s],
                log_tau[state.v[s] * n_days + t],
                emission[s * n_days + t],
            );
            normalize_log_weights(&mut w);
            u8::from(uniforms[s * n_days + t] < w[1])
        });
        let mut changed = 0;
        for (&(s, t), &new) in sites.iter().zip(&draws) {
            if self.state.z.get(s, t) != new {
                changed += 1;
                self.state.z.set(s, t, new);
            }
        }
        changed
    }

    fn update_u(&mut self, sweep: u64) -> usize {
        let k = self.params.max_clusters_u;
        let n_loc = self.field.n_locations();
        let (base, odds) = link_tables(&self.proto.pi);
        let (params, proto, z, y) = (&self.params, &self.proto, &self.state.z, &self.y);
        let lik: Vec<Vec<f64>> = exec::map_range(self.field.n_days(), |t| {
            let wet: Vec<usize> = (0..n_loc).filter(|&s| z.get(s, t) == 1).collect();
            (0..k)
                .map(|label| {
                    let row = &odds[label * n_loc..(label + 1) * n_loc];
                    let link = base[label] + wet.iter().map(|&s| row[s]).sum::<f64>();
                    params.lambda_ss * link + params.aggregate_log_potential(y[t], proto.mu_agg[label])
                })
                .collect()
        });
        let stream = CounterRng::sweep_stream(sweep, PHASE_U);
        resample_labels(&mut self.state.u, &lik, self.params.eta, &self.rng, stream)
    }

    fn update_v(&mut self, sweep: u64) -> usize {
        let k = self.params.max_clusters_v;
        let n_days = self.field.n_days();
        let (base, odds) = link_tables(&self.proto.tau);
        let (params, z) = (&self.params, &self.state.z);
        let lik: Vec<Vec<f64>> = exec::map_range(self.field.n_locations(), |s| {
            let wet: Vec<usize> = (0..n_days).filter(|&t| z.get(s, t) == 1).collect();
            (0..k)
                .map(|label| {
                    let row = &odds[label * n_days..(label + 1) * n_days];
                    params.lambda_st * (base[label] + wet.iter().map(|&t| row[t]).sum::<f64>())
                })
                .collect()
        });
        let stream = CounterRng::sweep_stream(sweep, PHASE_V);
        resample_labels(&mut self.state.v, &lik, self.params.zeta, &self.rng, stream)
    }

    pub fn into_parts(self) -> (LatentState, ClusterPrototypes) {
        (self.state, self.proto)
    }
}

/// Checkerboard colour of site `(s, t)`.
pub fn site_color(field: &RainfallField, s: usize, t: usize) -> usize {
    (usize::from(field.geometry().color(s)) + t) % 2
}

/// Per prototype row, `Σ ln(1 − p)`, and per entry the log-odds
/// `ln p − ln(1 − p)`, so a row's Bernoulli log-likelihood of a binary
/// vector is the base plus the log-odds of its ones.
fn link_tables(m: &Matrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let base = (0..m.rows()).map(|r| m.row(r).iter().map(|&p| libm::log(1.0 - p)).sum()).collect();
    let odds = m.as_slice().iter().map(|&p| libm::log(p) - libm::log(1.0 - p)).collect();
    (base, odds)
}

fn prototype_logs(m: &Matrix<f64>) -> Vec<[f64; 2]> {
    m.as_slice().iter().map(|&p| bern_logs(p)).collect()
}

/// Sequential collapsed update of a label vector: item `i` is redrawn from
/// `ln(n_{k,-i} + c/K) + lik[i][k]` with counts kept current.
fn resample_labels(labels: &mut [usize], lik: &[Vec<f64>], concentration: f64, rng: &CounterRng, stream: u64) -> usize {
    let k = lik.first().map_or(0, Vec::len);
    let alpha = concentration / k as f64;
    let mut counts = label_counts(labels, k);
    let mut changed = 0;
    let uniforms = rng.fill(stream, lik.len());
    let mut w = alloc::vec![0.0; k];
    for (i, row) in lik.iter().enumerate() {
        let old = labels[i];
        counts[old] -= 1;
        for (label, slot) in w.iter_mut().enumerate() {
            *slot = libm::log(counts[label] as f64 + alpha) + row[label];
        }
        normalize_log_weights(&mut w);
        let new = sample_categorical(&w, uniforms[i]);
        counts[new] += 1;
        if new != old {
            labels[i] = new;
            changed += 1;
        }
    }
    changed
}

/// Initializes and runs the sampler.
pub fn run(field: &RainfallField, params: &ModelParams, config: &SamplerConfig) -> Result<SamplerResult> {
    config.validate()?;
    with_workers(config.worker_count, || {
        let (state, _) = initialize(field, params, config)?;
        let sampler = GibbsSampler::new(field, *params, state, config.seed)?;
        Ok(drive(sampler, config))
    })
}

fn drive(mut sampler: GibbsSampler<'_>, config: &SamplerConfig) -> SamplerResult {
    let mut trace = Vec::with_capacity(config.n_sweeps);
    let mut map_trace = Vec::with_capacity(config.n_sweeps - config.burn_in);
    let mut best: Option<(LatentState, ClusterPrototypes, f64, usize)> = None;
    for _ in 0..config.n_sweeps {
        let stats = sampler.sweep();
        trace.push(stats);
        if stats.sweep > config.burn_in && config.track_mode {
            if best.as_ref().is_none_or(|b| stats.log_density > b.2) {
                best = Some((sampler.state.clone(), sampler.proto.clone(), stats.log_density, stats.sweep));
            }
            map_trace.push(best.as_ref().map_or(stats.log_density, |b| b.2));
        } else if stats.sweep > config.burn_in {
            map_trace.push(stats.log_density);
        }
    }
    let final_log_density = trace.last().map_or_else(|| sampler.log_density(), |s| s.log_density);
    let final_sweep = sampler.sweeps_done;
    let (final_state, final_prototypes) = sampler.into_parts();
    let (map_state, map_prototypes, map_log_density, map_sweep) =
        best.unwrap_or_else(|| (final_state.clone(), final_prototypes.clone(), final_log_density, final_sweep));
    SamplerResult {
        map_state,
        map_prototypes,
        map_log_density,
        map_sweep,
        final_state,
        final_prototypes,
        final_log_density,
        trace,
        map_trace,
    }
}

#[cfg(feature = "parallel")]
fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {workers} workers: {e}")))?;
    pool.install(f)
}

#[cfg(not(feature = "parallel"))]
fn with_workers<T>(_workers: usize, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f()
}

/// Number of `t` with `u(t+1) = u(t)`. By default every adjacent pair of the
/// concatenated series counts; `exclude_cross_season` skips pairs that
/// straddle a season boundary.
pub fn self_transition_count(u: &[usize], calendar: &CalendarIndex, exclude_cross_season: bool) -> usize {
    (0..u.len().saturating_sub(1))
        .filter(|&t| u[t] == u[t + 1] && (!exclude_cross_season || calendar.is_consecutive(t)))
        .count()
}

//! Unnormalized joint density of `(Z, U, V, X)` and its single-site conditionals.
//!
//! The density is a product of
//!
//! - occupancy priors on `U` and `V` (Dirichlet–multinomial with symmetric
//!   concentration `η/K_u`, `ζ/K_v`),
//! - Potts agreement potentials `exp(J·1[z = z'])` on temporal edges (consecutive
//!   days of one season) and spatial edges (rook neighbours), each undirected
//!   edge counted once,
//! - Bernoulli links from `Z(s,t)` to the day prototype `π[U(t)][s]` and the
//!   location prototype `τ[V(s)][t]`, raised to `λ_ss` and `λ_st`,
//! - a zero-inflated exponential (dry) / zero-inflated gamma (wet) emission,
//! - a Gaussian link between `U(t)` and the daily aggregate `Y(t)`.
//!
//! Prototypes are treated as fixed inputs here; [`refresh_prototypes`] updates
//! them from a state.

use alloc::format;
use alloc::vec::Vec;

use crate::grid::RainfallField;
use crate::matrix::Matrix;
use crate::stats::{self, log_bernoulli};
use crate::{Error, Result};

/// Prototype probabilities are clamped to `[EPS, 1 - EPS]`.
pub const PROTOTYPE_EPS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionParams {
    /// Rate of the dry-state exponential, 1/mm.
    pub dry_rate: f64,
    pub wet_shape: f64,
    /// Rate of the wet-state gamma, 1/mm.
    pub wet_rate: f64,
    /// Point mass at exactly zero rain under the dry state.
    pub zero_mass_dry: f64,
    /// Point mass at exactly zero rain under the wet state.
    pub zero_mass_wet: f64,
}

impl Default for EmissionParams {
    fn default() -> Self {
        Self { dry_rate: 1.0, wet_shape: 2.0, wet_rate: 2.0 / 15.0, zero_mass_dry: 0.5, zero_mass_wet: 0.05 }
    }
}

impl EmissionParams {
    /// `ln ψ_DZ(z, x)`: point mass at zero plus a continuous density for `x > 0`.
    pub fn log_likelihood(&self, x: f64, wet: bool) -> f64 {
        let zero_mass = if wet { self.zero_mass_wet } else { self.zero_mass_dry };
        if x <= 0.0 {
            return libm::log(zero_mass);
        }
        let continuous = if wet {
            self.wet_shape * libm::log(self.wet_rate) - libm::lgamma(self.wet_shape)
                + (self.wet_shape - 1.0) * libm::log(x)
                - self.wet_rate * x
        } else {
            libm::log(self.dry_rate) - self.dry_rate * x
        };
        libm::log(1.0 - zero_mass) + continuous
    }

    /// `[ln p(x | dry), ln p(x | wet)]`.
    pub fn log_likelihoods(&self, x: f64) -> [f64; 2] {
        [self.log_likelihood(x, false), self.log_likelihood(x, true)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub j_temporal: f64,
    pub j_spatial: f64,
    pub lambda_ss: f64,
    pub lambda_st: f64,
    pub emission: EmissionParams,
    /// Width of the `U`–`Y` link in mm/day; `f64::INFINITY` switches it off.
    pub aggregate_sigma: f64,
    pub eta: f64,
    pub zeta: f64,
    pub max_clusters_u: usize,
    pub max_clusters_v: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            j_temporal: 1.0,
            j_spatial: 1.0,
            lambda_ss: 1.0,
            lambda_st: 1.0,
            emission: EmissionParams::default(),
            aggregate_sigma: f64::INFINITY,
            eta: 9.0,
            zeta: 9.0,
            max_clusters_u: 24,
            max_clusters_v: 30,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("j_temporal", self.j_temporal),
            ("j_spatial", self.j_spatial),
            ("lambda_ss", self.lambda_ss),
            ("lambda_st", self.lambda_st),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        let e = &self.emission;
        let positive = [
            ("dry_rate", e.dry_rate),
            ("wet_shape", e.wet_shape),
            ("wet_rate", e.wet_rate),
            ("eta", self.eta),
            ("zeta", self.zeta),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        for (name, v) in [("zero_mass_dry", e.zero_mass_dry), ("zero_mass_wet", e.zero_mass_wet)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if !(self.aggregate_sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "aggregate_sigma must be > 0, got {}",
                self.aggregate_sigma
            )));
        }
        if self.max_clusters_u == 0 || self.max_clusters_v == 0 {
            return Err(Error::InvalidParameter("max_clusters must be >= 1".into()));
        }
        Ok(())
    }

    /// `-(y - mu)² / (2σ²)`, zero when the aggregate link is off.
    #[inline]
    pub(crate) fn aggregate_log_potential(&self, y: f64, mu: f64) -> f64 {
        if self.aggregate_sigma.is_finite() {
            let d = y - mu;
            -d * d / (2.0 * self.aggregate_sigma * self.aggregate_sigma)
        } else {
            0.0
        }
    }
}

/// Binary states `z` (S×D, 1 = wet), day labels `u` and location labels `v`.
/// Labels are zero-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentState {
    pub z: Matrix<u8>,
    pub u: Vec<usize>,
    pub v: Vec<usize>,
}

impl LatentState {
    pub fn check(&self, field: &RainfallField, params: &ModelParams) -> Result<()> {
        let (n_loc, n_days) = (field.n_locations(), field.n_days());
        if self.z.rows() != n_loc || self.z.cols() != n_days {
            return Err(Error::Dimension(format!(
                "z is {}x{}, field is {n_loc}x{n_days}",
                self.z.rows(),
                self.z.cols()
            )));
        }
        if self.u.len() != n_days || self.v.len() != n_loc {
            return Err(Error::Dimension(format!(
                "u has {} entries (expected {n_days}), v has {} (expected {n_loc})",
                self.u.len(),
                self.v.len()
            )));
        }
        if let Some(&bad) = self.u.iter().find(|&&l| l >= params.max_clusters_u) {
            return Err(Error::Dimension(format!("u label {bad} >= max_clusters_u")));
        }
        if let Some(&bad) = self.v.iter().find(|&&l| l >= params.max_clusters_v) {
            return Err(Error::Dimension(format!("v label {bad} >= max_clusters_v")));
        }
        if self.z.as_slice().iter().any(|&b| b > 1) {
            return Err(Error::Dimension("z entries must be 0 or 1".into()));
        }
        Ok(())
    }
}

/// Cluster prototypes parameterizing the `Z`–`U`, `Z`–`V` and `U`–`Y` links.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPrototypes {
    /// `K_u × S` wet probabilities per day cluster.
    pub pi: Matrix<f64>,
    /// `K_v × D` wet probabilities per location cluster.
    pub tau: Matrix<f64>,
    /// Mean daily aggregate per day cluster.
    pub mu_agg: Vec<f64>,
    pub counts_u: Vec<usize>,
    pub counts_v: Vec<usize>,
}

impl ClusterPrototypes {
    fn check(&self, n_loc: usize, n_days: usize, params: &ModelParams) -> Result<()> {
        let ok = self.pi.rows() == params.max_clusters_u
            && self.pi.cols() == n_loc
            && self.tau.rows() == params.max_clusters_v
            && self.tau.cols() == n_days
            && self.mu_agg.len() == params.max_clusters_u;
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension("prototype dimensions do not match field and params".into()))
        }
    }
}

/// `ln` of the Dirichlet–multinomial occupancy prior with concentration `c`
/// split evenly over `counts.len()` labels.
pub fn log_label_prior(counts: &[usize], concentration: f64) -> f64 {
    let k = counts.len() as f64;
    let alpha = concentration / k;
    let n: usize = counts.iter().sum();
    let mut acc = libm::lgamma(concentration) - libm::lgamma(concentration + n as f64);
    for &c in counts {
        acc += libm::lgamma(c as f64 + alpha) - libm::lgamma(alpha);
    }
    acc
}

pub(crate) fn label_counts(labels: &[usize], k: usize) -> Vec<usize> {
    let mut counts = alloc::vec![0; k];
    for &l in labels {
        counts[l] += 1;
    }
    counts
}

/// Individual log-potential groups of the joint density.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DensityTerms {
    pub prior_u: f64,
    pub prior_v: f64,
    pub temporal: f64,
    pub spatial: f64,
    pub link_st: f64,
    pub link_ss: f64,
    pub emission: f64,
    pub aggregate: f64,
}

impl DensityTerms {
    pub fn total(&self) -> f64 {
        self.prior_u
            + self.prior_v
            + self.temporal
            + self.spatial
            + self.link_st
            + self.link_ss
            + self.emission
            + self.aggregate
    }
}

pub fn joint_log_density(
    state: &LatentState,
    field: &RainfallField,
    params: &ModelParams,
    proto: &ClusterPrototypes,
) -> Result<f64> {
    density_terms(state, field, params, proto).map(|t| t.total())
}

pub fn density_terms(
    state: &LatentState,
    field: &RainfallField,
    params: &ModelParams,
    proto: &ClusterPrototypes,
) -> Result<DensityTerms> {
    state.check(field, params)?;
    proto.check(field.n_locations(), field.n_days(), params)?;
    let y = field.daily_aggregate();
    Ok(density_terms_unchecked(state, field, &y, params, proto))
}

pub(crate) fn density_terms_unchecked(
    state: &LatentState,
    field: &RainfallField,
    y: &[f64],
    params: &ModelParams,
    proto: &ClusterPrototypes,
) -> DensityTerms {
    let x = field.x();
    let emission: Vec<[f64; 2]> = x.as_slice().iter().map(|&v| params.emission.log_likelihoods(v)).collect();
    density_terms_cached(state, field, y, params, proto, &emission)
}

/// As [`density_terms_unchecked`] with `[ln p(x|dry), ln p(x|wet)]` per site
/// supplied in row-major (`s * D + t`) order.
pub(crate) fn density_terms_cached(
    state: &LatentState,
    field: &RainfallField,
    y: &[f64],
    params: &ModelParams,
    proto: &ClusterPrototypes,
    emission: &[[f64; 2]],
) -> DensityTerms {
    let geom = field.geometry();
    let cal = field.calendar();
    let z = &state.z;
    let mut terms = DensityTerms {
        prior_u: log_label_prior(&label_counts(&state.u, params.max_clusters_u), params.eta),
        prior_v: log_label_prior(&label_counts(&state.v, params.max_clusters_v), params.zeta),
        ..Default::default()
    };

    let mut temporal_agree = 0usize;
    for s in 0..z.rows() {
        let row = z.row(s);
        for t in 0..row.len().saturating_sub(1) {
            if cal.is_consecutive(t) && row[t] == row[t + 1] {
                temporal_agree += 1;
            }
        }
    }
    terms.temporal = params.j_temporal * temporal_agree as f64;

    let mut spatial_agree = 0usize;
    for (a, b) in geom.edges() {
        spatial_agree += z.row(a).iter().zip(z.row(b)).filter(|(p, q)| p == q).count();
    }
    terms.spatial = params.j_spatial * spatial_agree as f64;

    let log_pi: Vec<[f64; 2]> = proto.pi.as_slice().iter().map(|&p| bern_logs(p)).collect();
    let log_tau: Vec<[f64; 2]> = proto.tau.as_slice().iter().map(|&p| bern_logs(p)).collect();
    let (n_loc, n_days) = (z.rows(), z.cols());
    for s in 0..n_loc {
        let vs = state.v[s];
        for t in 0..n_days {
            let zst = usize::from(z.get(s, t));
            terms.link_ss += log_pi[state.u[t] * n_loc + s][zst];
            terms.link_st += log_tau[vs * n_days + t][zst];
            terms.emission += emission[s * n_days + t][zst];
        }
    }
    terms.link_ss *= params.lambda_ss;
    terms.link_st *= params.lambda_st;

    terms.aggregate = y
        .iter()
        .zip(&state.u)
        .map(|(&yt, &ut)| params.aggregate_log_potential(yt, proto.mu_agg[ut]))
        .sum();
    terms
}

/// Log-weights of `Z(s,t) = 0` and `Z(s,t) = 1` given everything else.
pub(crate) fn z_log_weights(
    s: usize,
    t: usize,
    z: &Matrix<u8>,
    field: &RainfallField,
    params: &ModelParams,
    log_pi: [f64; 2],
    log_tau: [f64; 2],
    log_emission: [f64; 2],
) -> [f64; 2] {
    let cal = field.calendar();
    let mut wet_temporal = 0usize;
    let mut n_temporal = 0usize;
    if t > 0 && cal.is_consecutive(t - 1) {
        n_temporal += 1;
        wet_temporal += usize::from(z.get(s, t - 1));
    }
    if cal.is_consecutive(t) {
        n_temporal += 1;
        wet_temporal += usize::from(z.get(s, t + 1));
    }
    let neighbors = field.geometry().neighbors(s);
    let wet_spatial: usize = neighbors.iter().map(|&o| usize::from(z.get(o, t))).sum();
    let mut w = [0.0; 2];
    for (state, slot) in w.iter_mut().enumerate() {
        let (agree_t, agree_s) = if state == 1 {
            (wet_temporal, wet_spatial)
        } else {
            (n_temporal - wet_temporal, neighbors.len() - wet_spatial)
        };
        *slot = params.j_temporal * agree_t as f64
            + params.j_spatial * agree_s as f64
            + params.lambda_ss * log_pi[state]
            + params.lambda_st * log_tau[state]
            + log_emission[state];
    }
    w
}

#[inline]
pub(crate) fn bern_logs(p: f64) -> [f64; 2] {
    [libm::log(1.0 - p), libm::log(p)]
}

/// Probability that `Z(s,t) = 1` given all other variables.
pub fn conditional_z(
    s: usize,
    t: usize,
    state: &LatentState,
    field: &RainfallField,
    params: &ModelParams,
    proto: &ClusterPrototypes,
) -> f64 {
    let mut w = z_log_weights(
        s,
        t,
        &state.z,
        field,
        params,
        bern_logs(proto.pi.get(state.u[t], s)),
        bern_logs(proto.tau.get(state.v[s], t)),
        params.emission.log_likelihoods(field.x().get(s, t)),
    );
    stats::normalize_log_weights(&mut w);
    w[1]
}

/// Distribution of `U(t)` over `0..max_clusters_u` given all other variables.
pub fn conditional_u(
    t: usize,
    state: &LatentState,
    field: &RainfallField,
    params: &ModelParams,
    proto: &ClusterPrototypes,
) -> Vec<f64> {
    let k = params.max_clusters_u;
    let mut counts = label_counts(&state.u, k);
    counts[state.u[t]] -= 1;
    let alpha = params.eta / k as f64;
    let y_t: f64 = (0..field.n_locations()).map(|s| field.x().get(s, t)).sum();
    let mut w: Vec<f64> = (0..k)
        .map(|label| {
            let link: f64 = (0..field.n_locations())
                .map(|s| log_bernoulli(state.z.get(s, t), proto.pi.get(label, s)))
                .sum();
            libm::log(counts[label] as f64 + alpha)
                + params.lambda_ss * link
                + params.aggregate_log_potential(y_t, proto.mu_agg[label])
        })
        .collect();
    stats::normalize_log_weights(&mut w);
    w
}

/// Distribution of `V(s)` over `0..max_clusters_v` given all other variables.
pub fn conditional_v(
    s: usize,
    state: &LatentState,
    _field: &RainfallField,
    params: &ModelParams,
    proto: &ClusterPrototypes,
) -> Vec<f64> {
    let k = params.max_clusters_v;
    let mut counts = label_counts(&state.v, k);
    counts[state.v[s]] -= 1;
    let alpha = params.zeta / k as f64;
    let row = state.z.row(s);
    let mut w: Vec<f64> = (0..k)
        .map(|label| {
            let link: f64 = row.iter().enumerate().map(|(t, &z)| log_bernoulli(z, proto.tau.get(label, t))).sum();
            libm::log(counts[label] as f64 + alpha) + params.lambda_st * link
        })
        .collect();
    stats::normalize_log_weights(&mut w);
    w
}

#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROTOTYPE_EPS, 1.0 - PROTOTYPE_EPS)
}

/// Empirical prototypes of a state. Empty clusters get 0.5 probabilities and
/// the global mean aggregate.
pub fn refresh_prototypes(state: &LatentState, field: &RainfallField, params: &ModelParams) -> ClusterPrototypes {
    let y = field.daily_aggregate();
    refresh_prototypes_with_aggregate(state, &y, params)
}

pub(crate) fn refresh_prototypes_with_aggregate(
    state: &LatentState,
    y: &[f64],
    params: &ModelParams,
) -> ClusterPrototypes {
    let (ku, kv) = (params.max_clusters_u, params.max_clusters_v);
    let z = &state.z;
    let (n_loc, n_days) = (z.rows(), z.cols());
    let counts_u = label_counts(&state.u, ku);
    let counts_v = label_counts(&state.v, kv);

    let mut wet_u = Matrix::filled(ku, n_loc, 0usize);
    let mut wet_v = Matrix::filled(kv, n_days, 0usize);
    let mut y_sum = alloc::vec![0.0; ku];
    for s in 0..n_loc {
        let vs = state.v[s];
        for (t, &zst) in z.row(s).iter().enumerate() {
            if zst == 1 {
                let ut = state.u[t];
                wet_u.set(ut, s, wet_u.get(ut, s) + 1);
                wet_v.set(vs, t, wet_v.get(vs, t) + 1);
            }
        }
    }
    for (t, &ut) in state.u.iter().enumerate() {
        y_sum[ut] += y[t];
    }
    let global_mean = stats::mean(y).unwrap_or(0.0);

    let mut pi = Matrix::filled(ku, n_loc, 0.5);
    for label in 0..ku {
        if counts_u[label] > 0 {
            let n = counts_u[label] as f64;
            for s in 0..n_loc {
                pi.set(label, s, clamp_prob(wet_u.get(label, s) as f64 / n));
            }
        }
    }
    let mut tau = Matrix::filled(kv, n_days, 0.5);
    for label in 0..kv {
        if counts_v[label] > 0 {
            let n = counts_v[label] as f64;
            for t in 0..n_days {
                tau.set(label, t, clamp_prob(wet_v.get(label, t) as f64 / n));
            }
        }
    }
    let mu_agg = (0..ku)
        .map(|label| if counts_u[label] > 0 { y_sum[label] / counts_u[label] as f64 } else { global_mean })
        .collect();
    ClusterPrototypes { pi, tau, mu_agg, counts_u, counts_v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CalendarDay, CalendarIndex, GridGeometry};
    use alloc::vec;

    fn field(x: Vec<Vec<f64>>, coords: &[(f64, f64)]) -> RainfallField {
        let geom = GridGeometry::from_coordinates(coords).unwrap();
        let n_days = x[0].len();
        let days = (0..n_days).map(|d| CalendarDay { year: 2000, day_of_season: d as u16 }).collect();
        RainfallField::new(geom, CalendarIndex::from_days(days).unwrap(), Matrix::from_rows(&x).unwrap()).unwrap()
    }

    fn decoupled() -> ModelParams {
        ModelParams {
            j_temporal: 0.0,
            j_spatial: 0.0,
            lambda_ss: 0.0,
            lambda_st: 0.0,
            max_clusters_u: 2,
            max_clusters_v: 2,
            ..Default::default()
        }
    }

    #[test]
    fn zero_rain_bayes_with_point_masses() {
        let f = field(vec![vec![0.0]], &[(0.0, 0.0)]);
        let mut params = decoupled();
        params.emission.zero_mass_dry = 0.9;
        params.emission.zero_mass_wet = 0.01;
        let state = LatentState { z: Matrix::filled(1, 1, 0), u: vec![0], v: vec![0] };
        let proto = refresh_prototypes(&state, &f, &params);
        let p = conditional_z(0, 0, &state, &f, &params, &proto);
        assert!((p - 0.01 / 0.91).abs() < 1e-12);
        assert!((p - 0.0110).abs() < 1e-4);
    }

    #[test]
    fn decoupled_conditional_is_likelihood_ratio() {
        let f = field(vec![vec![3.0, 0.4]], &[(0.0, 0.0)]);
        let params = decoupled();
        let state = LatentState { z: Matrix::filled(1, 2, 1), u: vec![0, 1], v: vec![1] };
        let proto = refresh_prototypes(&state, &f, &params);
        for t in 0..2 {
            let x = f.x().get(0, t);
            let lw = params.emission.log_likelihood(x, true);
            let ld = params.emission.log_likelihood(x, false);
            let expected = 1.0 / (1.0 + libm::exp(ld - lw));
            assert!((conditional_z(0, t, &state, &f, &params, &proto) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn u_conditional_hand_normalization() {
        let f = field(vec![vec![5.0]], &[(0.0, 0.0)]);
        let params = ModelParams { lambda_ss: 1.0, ..decoupled() };
        let state = LatentState { z: Matrix::filled(1, 1, 1), u: vec![0], v: vec![0] };
        let proto = ClusterPrototypes {
            pi: Matrix::from_rows(&[vec![0.9], vec![0.1]]).unwrap(),
            tau: Matrix::filled(2, 1, 0.5),
            mu_agg: vec![0.0, 0.0],
            counts_u: vec![1, 0],
            counts_v: vec![1, 0],
        };
        let p = conditional_u(0, &state, &f, &params, &proto);
        assert!((p[0] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn v_conditional_hand_normalization_and_point_mass() {
        let f = field(vec![vec![5.0]], &[(0.0, 0.0)]);
        let params = ModelParams { lambda_st: 1.0, ..decoupled() };
        let state = LatentState { z: Matrix::filled(1, 1, 1), u: vec![0], v: vec![0] };
        let proto = ClusterPrototypes {
            pi: Matrix::filled(2, 1, 0.5),
            tau: Matrix::from_rows(&[vec![0.8], vec![0.2]]).unwrap(),
            mu_agg: vec![0.0, 0.0],
            counts_u: vec![1, 0],
            counts_v: vec![1, 0],
        };
        let p = conditional_v(0, &state, &f, &params, &proto);
        assert!((p[0] - 0.8).abs() < 1e-12);

        let single = ModelParams { max_clusters_v: 1, ..params };
        let proto1 = refresh_prototypes(&state, &f, &single);
        assert_eq!(conditional_v(0, &state, &f, &single, &proto1), vec![1.0]);
    }

    #[test]
    fn symmetric_labels_give_uniform_conditionals() {
        let coords = [(0.0, 0.0), (0.0, 1.0), (0.0, 2.0)];
        let f = field(vec![vec![1.0, 2.0, 0.0], vec![0.0, 3.0, 1.0], vec![4.0, 0.0, 0.0]], &coords);
        let params = ModelParams { max_clusters_u: 2, max_clusters_v: 2, ..Default::default() };
        let z = Matrix::from_rows(&[vec![0, 1, 0], vec![1, 1, 0], vec![1, 0, 0]]).unwrap();
        // with the updated item removed, both labels hold one item
        let state = LatentState { z, u: vec![0, 0, 1], v: vec![1, 0, 1] };
        let proto = ClusterPrototypes {
            pi: Matrix::filled(2, 3, 0.3),
            tau: Matrix::filled(2, 3, 0.6),
            mu_agg: vec![2.0, 2.0],
            counts_u: vec![2, 1],
            counts_v: vec![1, 2],
        };
        let pu = conditional_u(0, &state, &f, &params, &proto);
        assert!((pu[0] - 0.5).abs() < 1e-12);
        let pv = conditional_v(2, &state, &f, &params, &proto);
        assert!((pv[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn refresh_example_values() {
        let f = field(vec![vec![0.0, 0.0, 1.0], vec![1.0, 1.0, 1.0]], &[(0.0, 0.0), (0.0, 1.0)]);
        let params = ModelParams { max_clusters_u: 2, max_clusters_v: 1, ..Default::default() };
        let state = LatentState {
            z: Matrix::from_rows(&[vec![0, 0, 1], vec![1, 1, 1]]).unwrap(),
            u: vec![0, 0, 0],
            v: vec![0, 0],
        };
        let proto = refresh_prototypes(&state, &f, &params);
        assert!((proto.pi.get(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(proto.pi.get(0, 1), 0.999);
        assert_eq!(proto.pi.row(1), &[0.5, 0.5]);
        assert_eq!(proto.counts_u, vec![3, 0]);
        assert!((proto.mu_agg[1] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn mu_agg_is_cluster_mean() {
        let f = field(vec![vec![2.0, 6.0, 1.0]], &[(0.0, 0.0)]);
        let params = ModelParams { max_clusters_u: 2, max_clusters_v: 1, ..Default::default() };
        let state = LatentState { z: Matrix::filled(1, 3, 0), u: vec![1, 1, 0], v: vec![0] };
        let proto = refresh_prototypes(&state, &f, &params);
        assert_eq!(proto.mu_agg[1], 4.0);
    }

    #[test]
    fn decoupled_density_is_emission_plus_aggregate_plus_priors() {
        let f = field(vec![vec![0.0, 2.0], vec![7.0, 0.5]], &[(0.0, 0.0), (0.0, 1.0)]);
        let params = ModelParams { aggregate_sigma: 3.0, ..decoupled() };
        let state = LatentState { z: Matrix::from_rows(&[vec![0, 1], vec![1, 0]]).unwrap(), u: vec![0, 1], v: vec![1, 0] };
        let proto = refresh_prototypes(&state, &f, &params);
        let terms = density_terms(&state, &f, &params, &proto).unwrap();
        assert_eq!(terms.temporal, 0.0);
        assert_eq!(terms.spatial, 0.0);
        assert_eq!(terms.link_ss, 0.0);
        assert_eq!(terms.link_st, 0.0);
        let mut emission = 0.0;
        for s in 0..2 {
            for t in 0..2 {
                emission += params.emission.log_likelihood(f.x().get(s, t), state.z.get(s, t) == 1);
            }
        }
        assert!((terms.emission - emission).abs() < 1e-12);
        let total = joint_log_density(&state, &f, &params, &proto).unwrap();
        assert!((total - (terms.prior_u + terms.prior_v + emission + terms.aggregate)).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let f = field(vec![vec![0.0, 2.0]], &[(0.0, 0.0)]);
        let params = decoupled();
        let state = LatentState { z: Matrix::filled(1, 2, 0), u: vec![0, 0], v: vec![0] };
        let proto = refresh_prototypes(&state, &f, &params);
        let bad = LatentState { u: vec![0], ..state };
        assert!(matches!(joint_log_density(&bad, &f, &params, &proto), Err(Error::Dimension(_))));
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = ModelParams::default();
        assert!(p.validate().is_ok());
        p.emission.zero_mass_wet = 1.0;
        assert!(p.validate().is_err());
        let p = ModelParams { j_spatial: -1.0, ..Default::default() };
        assert!(p.validate().is_err());
    }
}

//! Baseline clusterers and the evaluation metrics used to compare them with
//! the random-field model.

mod eval;
mod kmeans;
mod spectral;

pub use eval::{
    adjusted_rand_index, evaluate_daily_clustering, evaluate_temporal_clustering, hamming_similarity_series,
    EvalReport, SimilaritySeries,
};
pub use kmeans::{kmeans, kmeans_restarts, KMeansResult, DEFAULT_MAX_ITER};
pub use spectral::{affinity_matrix, median_bandwidth, spectral, spectral_from_affinity, Affinity, SpectralResult};

use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    KMeans,
    SpectEuclid,
    SpectHamming,
    Mrf,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::KMeans => "kmeans",
            Method::SpectEuclid => "spect_euclid",
            Method::SpectHamming => "spect_hamming",
            Method::Mrf => "mrf",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    /// Cluster index per item, in `0..k`.
    pub labels: Vec<usize>,
    pub k: usize,
    pub objective: f64,
    pub method: Method,
}

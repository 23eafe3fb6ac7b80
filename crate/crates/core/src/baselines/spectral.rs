//! Spectral clustering with a Gaussian affinity and the symmetric normalized
//! Laplacian `L = I − D^{-1/2} A D^{-1/2}`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use super::kmeans::{kmeans, DEFAULT_MAX_ITER};
use super::{ClusteringResult, Method};
use crate::exec::map_range;
use crate::matrix::Matrix;
use crate::stats::{self, squared_distance};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Affinity {
    /// Euclidean distance between real-valued items.
    EuclidGaussian { bandwidth: Option<f64> },
    /// Hamming distance between binary items (entries `> 0.5` count as 1).
    HammingGaussian { bandwidth: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub clustering: ClusteringResult,
    /// Row-normalized spectral embedding, one row per item.
    pub embedding: Vec<Vec<f64>>,
    /// The `k` smallest Laplacian eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
}

fn distances(items: &[Vec<f64>], affinity: Affinity) -> Matrix<f64> {
    let n = items.len();
    let rows = map_range(n, |i| {
        (0..n)
            .map(|j| match affinity {
                Affinity::EuclidGaussian { .. } => libm::sqrt(squared_distance(&items[i], &items[j])),
                Affinity::HammingGaussian { .. } => {
                    items[i].iter().zip(&items[j]).filter(|(a, b)| (**a > 0.5) != (**b > 0.5)).count() as f64
                }
            })
            .collect::<Vec<f64>>()
    });
    Matrix::from_rows(&rows).expect("square")
}

/// Median of the positive off-diagonal distances, or 1 when there are none.
pub fn median_bandwidth(distances: &Matrix<f64>) -> f64 {
    let n = distances.rows();
    let positive: Vec<f64> =
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).map(|(i, j)| distances.get(i, j)).filter(|&d| d > 0.0).collect();
    stats::quantile(&positive, 0.5).unwrap_or(1.0)
}

/// Gaussian affinity `exp(−d²/(2h²))` with a zero diagonal.
pub fn affinity_matrix(items: &[Vec<f64>], affinity: Affinity) -> Result<Matrix<f64>> {
    if let Some(first) = items.first() {
        if items.iter().any(|v| v.len() != first.len()) {
            return Err(Error::Dimension("spectral items differ in length".into()));
        }
    }
    let d = distances(items, affinity);
    let bandwidth = match affinity {
        Affinity::EuclidGaussian { bandwidth } | Affinity::HammingGaussian { bandwidth } => {
            bandwidth.unwrap_or_else(|| median_bandwidth(&d))
        }
    };
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidParameter(alloc::format!("bandwidth must be > 0, got {bandwidth}")));
    }
    let scale = 2.0 * bandwidth * bandwidth;
    let n = items.len();
    let mut a = Matrix::filled(n, n, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let dij = d.get(i, j);
                a.set(i, j, libm::exp(-dij * dij / scale));
            }
        }
    }
    Ok(a)
}

pub fn spectral(items: &[Vec<f64>], k: usize, affinity: Affinity, seed: u64) -> Result<SpectralResult> {
    let a = affinity_matrix(items, affinity)?;
    let method = match affinity {
        Affinity::EuclidGaussian { .. } => Method::SpectEuclid,
        Affinity::HammingGaussian { .. } => Method::SpectHamming,
    };
    spectral_from_affinity(&a, k, seed, method)
}

/// Clusters from a precomputed symmetric, non-negative affinity matrix.
/// Isolated items (zero degree) are embedded at the origin.
pub fn spectral_from_affinity(a: &Matrix<f64>, k: usize, seed: u64, method: Method) -> Result<SpectralResult> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Dimension("affinity matrix must be square".into()));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(alloc::format!("k = {k} must lie in 1..={n}")));
    }
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = a.row(i).iter().sum();
            if d > 0.0 {
                1.0 / libm::sqrt(d)
            } else {
                0.0
            }
        })
        .collect();
    let laplacian = DMatrix::from_fn(n, n, |i, j| {
        let identity = if i == j { 1.0 } else { 0.0 };
        identity - inv_sqrt_deg[i] * a.get(i, j) * inv_sqrt_deg[j]
    });
    let eig = SymmetricEigen::try_new(laplacian, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("symmetric eigen-solver did not converge".into()))?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let chosen = &idx[..k];

    let embedding: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row: Vec<f64> = chosen.iter().map(|&c| eig.eigenvectors[(i, c)]).collect();
            let norm = libm::sqrt(row.iter().map(|v| v * v).sum::<f64>());
            if norm > 0.0 {
                row.iter().map(|v| v / norm).collect()
            } else {
                row
            }
        })
        .collect();
    let km = kmeans(&embedding, k, seed, DEFAULT_MAX_ITER)?;
    Ok(SpectralResult {
        clustering: ClusteringResult { labels: km.clustering.labels, k, objective: km.clustering.objective, method },
        embedding,
        eigenvalues: chosen.iter().map(|&c| eig.eigenvalues[c]).collect(),
    })
}

//! k-means++ seeding followed by Lloyd iterations.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ClusteringResult, Method};
use crate::stats::squared_distance;
use crate::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub clustering: ClusteringResult,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after each assignment step.
    pub objective_trace: Vec<f64>,
}

pub fn kmeans(vectors: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<KMeansResult> {
    let n = vectors.len();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds the {n} items")));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::Dimension("k-means vectors differ in length".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seeds(vectors, k, &mut rng);

    let mut assign = alloc::vec![usize::MAX; n];
    let mut dist = alloc::vec![0.0; n];
    let mut trace = Vec::new();
    for iter in 0..max_iter.max(1) {
        let mut changed = false;
        let mut objective = 0.0;
        for (i, v) in vectors.iter().enumerate() {
            let (best, d) = nearest(v, &centroids);
            objective += d;
            dist[i] = d;
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        trace.push(objective);
        if !changed || iter + 1 == max_iter {
            break;
        }

        let mut sums = alloc::vec![alloc::vec![0.0; dim]; k];
        let mut counts = alloc::vec![0usize; k];
        for (v, &a) in vectors.iter().zip(&assign) {
            counts[a] += 1;
            sums[a].iter_mut().zip(v).for_each(|(acc, x)| *acc += x);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                centroids[c] = sums[c].iter().map(|s| s * inv).collect();
            }
        }
        // empty clusters restart at the point farthest from its centroid
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n).fold(0, |best, i| if dist[i] > dist[best] { i } else { best });
                centroids[c] = vectors[far].clone();
                dist[far] = 0.0;
            }
        }
    }

    let objective = *trace.last().expect("at least one iteration");
    Ok(KMeansResult {
        clustering: ClusteringResult { labels: assign, k, objective, method: Method::KMeans },
        centroids,
        objective_trace: trace,
    })
}

/// Best of `restarts` runs (lowest objective, earliest on ties), each seeded
/// from a generator keyed by `seed`.
pub fn kmeans_restarts(vectors: &[Vec<f64>], k: usize, seed: u64, max_iter: usize, restarts: usize) -> Result<KMeansResult> {
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let run = kmeans(vectors, k, seeds.random(), max_iter)?;
        if best.as_ref().is_none_or(|b| run.clustering.objective < b.clustering.objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one run"))
}

/// Index and squared distance of the nearest centroid; ties go to the lower index.
fn nearest(v: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(v, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_seeds(vectors: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = vectors.iter().map(|v| squared_distance(v, &vectors[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && target < acc {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("positive mass"))
        } else {
            // all remaining points coincide with a seed
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, v) in vectors.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(v, &vectors[next]));
        }
    }
    chosen.into_iter().map(|i| vectors[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn one_point_per_cluster_has_zero_objective() {
        let pts = vec![vec![0.0, 1.0], vec![5.0, 2.0], vec![-3.0, 7.0]];
        let r = kmeans(&pts, 3, 1, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.clustering.objective, 0.0);
        let mut l = r.clustering.labels.clone();
        l.sort();
        assert_eq!(l, vec![0, 1, 2]);
    }

    #[test]
    fn single_cluster_is_global_mean() {
        let pts = vec![vec![0.0], vec![2.0], vec![4.0], vec![10.0]];
        let r = kmeans(&pts, 1, 3, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.centroids[0], vec![4.0]);
        // population variance 14 times n = 4
        assert!((r.clustering.objective - 56.0).abs() < 1e-12);
    }

    #[test]
    fn separated_pairs_grouped() {
        let pts = vec![vec![0.0, 0.0], vec![10.0, 10.0], vec![0.0, 1.0], vec![10.0, 11.0]];
        for seed in 0..20 {
            let r = kmeans(&pts, 2, seed, DEFAULT_MAX_ITER).unwrap();
            let l = &r.clustering.labels;
            assert_eq!(l[0], l[2]);
            assert_eq!(l[1], l[3]);
            assert_ne!(l[0], l[1]);
            assert!((r.clustering.objective - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn errors() {
        let pts = vec![vec![0.0]];
        assert!(kmeans(&pts, 0, 0, 10).is_err());
        assert!(kmeans(&pts, 2, 0, 10).is_err());
    }

    #[test]
    fn duplicates_do_not_break_seeding() {
        let pts = vec![vec![1.0, 1.0]; 5];
        let r = kmeans(&pts, 3, 9, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.clustering.objective, 0.0);
    }
}

//! Small numeric helpers shared across modules.
//!
//! Standard deviations are population (divide by `n`) throughout.

use alloc::vec::Vec;

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    let m = mean(values)?;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    Some((m, libm::sqrt(var)))
}

/// Pearson correlation; `None` when either series is constant or empty.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.is_empty() {
        return None;
    }
    let (ma, sa) = mean_std(a)?;
    let (mb, sb) = mean_std(b)?;
    if sa == 0.0 || sb == 0.0 {
        return None;
    }
    let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64;
    Some(cov / (sa * sb))
}

/// Linear-interpolation quantile (type 7) of an unsorted sample.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Normalizes log-weights in place into probabilities.
///
/// If every weight is `-inf` the result is uniform.
pub fn normalize_log_weights(weights: &mut [f64]) {
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        let p = 1.0 / weights.len() as f64;
        weights.iter_mut().for_each(|w| *w = p);
        return;
    }
    let mut total = 0.0;
    for w in weights.iter_mut() {
        *w = libm::exp(*w - max);
        total += *w;
    }
    weights.iter_mut().for_each(|w| *w /= total);
}

/// Draws an index from a probability vector using a uniform in `[0,1)`.
pub fn sample_categorical(probs: &[f64], uniform: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if uniform < acc {
            return i;
        }
    }
    // rounding left the cumulative sum just below 1
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// `ln Bernoulli(z; p)`.
#[inline]
pub fn log_bernoulli(z: u8, p: f64) -> f64 {
    if z == 1 {
        libm::log(p)
    } else {
        libm::log(1.0 - p)
    }
}

pub fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[10.0, 10.0, 10.0, 22.0]).unwrap();
        assert_eq!(m, 13.0);
        assert!((s - libm::sqrt(27.0)).abs() < 1e-12);
    }

    #[test]
    fn normalize_handles_all_negative_infinity() {
        let mut w = [f64::NEG_INFINITY, f64::NEG_INFINITY];
        normalize_log_weights(&mut w);
        assert_eq!(w, [0.5, 0.5]);
        let mut w = [0.0, libm::log(3.0)];
        normalize_log_weights(&mut w);
        assert!((w[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[4.0, 1.0, 2.0, 3.0], 0.5), Some(2.5));
        assert_eq!(quantile(&[7.0], 0.3), Some(7.0));
    }

    #[test]
    fn pearson_undefined_for_constant() {
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 2.0]), None);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
    }
}

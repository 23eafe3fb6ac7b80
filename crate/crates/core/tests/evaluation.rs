mod common;

use monsoon_core::baselines::{hamming_similarity_series, spectral, Affinity};
use monsoon_core::patterns::extract_spatial;
use monsoon_core::{LatentState, Matrix};

#[test]
fn similarity_is_one_when_days_equal_their_patterns() {
    let f = common::field(2, 2, vec![vec![5.0, 0.0, 6.0], vec![0.0, 4.0, 0.0], vec![3.0, 0.0, 2.0], vec![0.0, 1.0, 0.0]]);
    let z = Matrix::from_rows(&[vec![1, 0, 1], vec![0, 1, 0], vec![1, 0, 1], vec![0, 1, 0]]).unwrap();
    let state = LatentState { z: z.clone(), u: vec![0, 1, 0], v: vec![0; 4] };
    let set = extract_spatial(&f, &state);
    let sim = hamming_similarity_series(&f, &z, &state.u, &set).unwrap();
    assert_eq!(sim.per_day, vec![1.0; 3]);
    assert_eq!(sim.mean, 1.0);
    assert_eq!(sim.per_year, vec![(2000, 1.0)]);
    assert_eq!(sim.correlation_with_aggregate, None);
}

#[test]
fn one_mismatch_in_four_locations() {
    let f = common::field(2, 2, vec![vec![5.0, 5.0], vec![5.0, 5.0], vec![0.0, 0.0], vec![0.0, 1.0]]);
    let z = Matrix::from_rows(&[vec![1, 1], vec![1, 1], vec![0, 0], vec![0, 1]]).unwrap();
    let state = LatentState { z: z.clone(), u: vec![0, 1], v: vec![0; 4] };
    let mut set = extract_spatial(&f, &state);
    // both days measured against the first day's pattern
    set.cdp[1] = set.cdp[0].clone();
    let sim = hamming_similarity_series(&f, &z, &state.u, &set).unwrap();
    assert_eq!(sim.per_day, vec![1.0, 0.75]);
}

#[test]
fn heavier_days_with_more_mismatches_correlate_negatively() {
    // day t has t mismatches and aggregate 10 + 5t
    let n_days = 4;
    let cdp = [1u8, 1, 0, 0];
    let mut z = Matrix::filled(4, n_days, 0u8);
    let mut x = vec![vec![0.0; n_days]; 4];
    for t in 0..n_days {
        for s in 0..4 {
            let flip = s < t;
            z.set(s, t, if flip { 1 - cdp[s] } else { cdp[s] });
            x[s][t] = (10.0 + 5.0 * t as f64) / 4.0;
        }
    }
    let f = common::field(2, 2, x);
    let state = LatentState { z: z.clone(), u: vec![0; n_days], v: vec![0; 4] };
    let mut set = extract_spatial(&f, &state);
    set.cdp[0] = cdp.to_vec();
    let sim = hamming_similarity_series(&f, &z, &state.u, &set).unwrap();
    assert_eq!(sim.per_day, vec![1.0, 0.75, 0.5, 0.25]);
    // similarity is an exact decreasing affine function of Y
    assert!((sim.correlation_with_aggregate.unwrap() + 1.0).abs() < 1e-12);
}

#[test]
fn spectral_is_deterministic_given_seed() {
    let items: Vec<Vec<f64>> = (0..12).map(|i| vec![(i % 4) as f64, (i * 7 % 5) as f64, (i / 3) as f64]).collect();
    let a = spectral(&items, 3, Affinity::EuclidGaussian { bandwidth: None }, 5).unwrap();
    assert_eq!(a, spectral(&items, 3, Affinity::EuclidGaussian { bandwidth: None }, 5).unwrap());
}

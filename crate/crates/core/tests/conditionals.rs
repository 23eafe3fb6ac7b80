//! Single-site conditionals against ratios of the joint density, by
//! enumerating the updated variable on a 2×2-location, 3-day lattice.

mod common;

use monsoon_core::model::{conditional_u, conditional_v, conditional_z, joint_log_density, refresh_prototypes};
use monsoon_core::{ClusterPrototypes, EmissionParams, LatentState, Matrix, ModelParams, RainfallField};

fn lattice() -> RainfallField {
    common::field(2, 2, vec![vec![0.0, 3.5, 12.0], vec![0.4, 0.0, 25.0], vec![7.0, 1.2, 0.0], vec![2.2, 18.0, 0.9]])
}

fn params() -> ModelParams {
    ModelParams {
        j_temporal: 0.7,
        j_spatial: 1.3,
        lambda_ss: 0.9,
        lambda_st: 1.1,
        emission: EmissionParams { dry_rate: 0.8, wet_shape: 1.7, wet_rate: 0.15, zero_mass_dry: 0.4, zero_mass_wet: 0.1 },
        aggregate_sigma: 6.0,
        eta: 1.5,
        zeta: 2.5,
        max_clusters_u: 2,
        max_clusters_v: 2,
    }
}

/// Fixed, asymmetric prototypes so the links matter.
fn prototypes() -> ClusterPrototypes {
    ClusterPrototypes {
        pi: Matrix::from_rows(&[vec![0.2, 0.7, 0.4, 0.9], vec![0.6, 0.3, 0.8, 0.1]]).unwrap(),
        tau: Matrix::from_rows(&[vec![0.25, 0.55, 0.85], vec![0.75, 0.45, 0.05]]).unwrap(),
        mu_agg: vec![9.0, 30.0],
        counts_u: vec![0, 0],
        counts_v: vec![0, 0],
    }
}

fn state_from_bits(bits: u32, u: [usize; 3], v: [usize; 4]) -> LatentState {
    let mut z = Matrix::filled(4, 3, 0u8);
    for i in 0..12 {
        z.set(i / 3, i % 3, ((bits >> i) & 1) as u8);
    }
    LatentState { z, u: u.to_vec(), v: v.to_vec() }
}

/// Normalized `exp` of joint log densities.
fn brute(logs: &[f64]) -> Vec<f64> {
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[test]
fn z_conditionals_match_enumeration_for_every_configuration() {
    let (f, p, proto) = (lattice(), params(), prototypes());
    let mut worst: f64 = 0.0;
    for bits in 0..(1u32 << 12) {
        let state = state_from_bits(bits, [0, 1, 1], [1, 0, 0, 1]);
        for s in 0..4 {
            for t in 0..3 {
                let mut logs = [0.0; 2];
                for value in 0..2u8 {
                    let mut alt = state.clone();
                    alt.z.set(s, t, value);
                    logs[value as usize] = joint_log_density(&alt, &f, &p, &proto).unwrap();
                }
                let expect = brute(&logs);
                let p1 = conditional_z(s, t, &state, &f, &p, &proto);
                worst = worst.max(tv(&[1.0 - p1, p1], &expect));
            }
        }
    }
    assert!(worst < 1e-9, "worst total variation {worst}");
}

#[test]
fn label_conditionals_match_enumeration_for_every_labeling() {
    let (f, p, proto) = (lattice(), params(), prototypes());
    let mut worst: f64 = 0.0;
    for bits in [0u32, 0b1011_0110_1001, 0xfff, 0b0101_0101_0101] {
        for code in 0..(1usize << 7) {
            let u = [code & 1, (code >> 1) & 1, (code >> 2) & 1];
            let v = [(code >> 3) & 1, (code >> 4) & 1, (code >> 5) & 1, (code >> 6) & 1];
            let state = state_from_bits(bits, u, v);
            for t in 0..3 {
                let logs: Vec<f64> = (0..2)
                    .map(|label| {
                        let mut alt = state.clone();
                        alt.u[t] = label;
                        joint_log_density(&alt, &f, &p, &proto).unwrap()
                    })
                    .collect();
                worst = worst.max(tv(&conditional_u(t, &state, &f, &p, &proto), &brute(&logs)));
            }
            for s in 0..4 {
                let logs: Vec<f64> = (0..2)
                    .map(|label| {
                        let mut alt = state.clone();
                        alt.v[s] = label;
                        joint_log_density(&alt, &f, &p, &proto).unwrap()
                    })
                    .collect();
                worst = worst.max(tv(&conditional_v(s, &state, &f, &p, &proto), &brute(&logs)));
            }
        }
    }
    assert!(worst < 1e-9, "worst total variation {worst}");
}

#[test]
fn flipping_one_site_changes_density_by_its_incident_terms() {
    let f = common::field(2, 2, vec![vec![0.0, 4.0], vec![1.0, 9.0], vec![3.0, 0.0], vec![6.0, 2.0]]);
    let p = ModelParams { aggregate_sigma: 5.0, max_clusters_u: 2, max_clusters_v: 2, ..ModelParams::default() };
    let state = LatentState {
        z: Matrix::from_rows(&[vec![0, 1], vec![1, 1], vec![0, 0], vec![1, 0]]).unwrap(),
        u: vec![0, 1],
        v: vec![1, 0, 0, 1],
    };
    let proto = refresh_prototypes(&state, &f, &p);
    let (s, t) = (1, 0);
    let mut flipped = state.clone();
    flipped.z.set(s, t, 0);
    let delta = joint_log_density(&flipped, &f, &p, &proto).unwrap() - joint_log_density(&state, &f, &p, &proto).unwrap();

    // location 1 sits at row 0, col 1 of the 2×2 grid: neighbours 0 and 3
    let agree = |z: u8| {
        let temporal = u8::from(state.z.get(s, t + 1) == z) as f64;
        let spatial = [0, 3].iter().filter(|&&o| state.z.get(o, t) == z).count() as f64;
        p.j_temporal * temporal + p.j_spatial * spatial
    };
    let bern = |z: u8, q: f64| if z == 1 { q.ln() } else { (1.0 - q).ln() };
    let local = |z: u8| {
        agree(z)
            + p.lambda_ss * bern(z, proto.pi.get(state.u[t], s))
            + p.lambda_st * bern(z, proto.tau.get(state.v[s], t))
            + p.emission.log_likelihood(f.x().get(s, t), z == 1)
    };
    assert!((delta - (local(0) - local(1))).abs() < 1e-9);
}

#[test]
fn exhaustive_z_check_on_two_days() {
    // 2×2 grid × 2 days: all 2^8 configurations
    let f = common::field(2, 2, vec![vec![0.0, 5.0], vec![2.0, 0.0], vec![11.0, 0.3], vec![0.0, 0.0]]);
    let p = ModelParams { max_clusters_u: 2, max_clusters_v: 2, aggregate_sigma: 4.0, ..ModelParams::default() };
    for bits in 0..256u32 {
        let mut z = Matrix::filled(4, 2, 0u8);
        for i in 0..8 {
            z.set(i / 2, i % 2, ((bits >> i) & 1) as u8);
        }
        let state = LatentState { z, u: vec![0, 1], v: vec![0, 0, 1, 1] };
        let proto = refresh_prototypes(&state, &f, &p);
        for s in 0..4 {
            for t in 0..2 {
                let logs: Vec<f64> = (0..2u8)
                    .map(|value| {
                        let mut alt = state.clone();
                        alt.z.set(s, t, value);
                        joint_log_density(&alt, &f, &p, &proto).unwrap()
                    })
                    .collect();
                let expect = brute(&logs)[1];
                assert!((conditional_z(s, t, &state, &f, &p, &proto) - expect).abs() < 1e-12);
            }
        }
    }
}

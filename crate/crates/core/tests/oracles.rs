//! Library results checked against small independent reimplementations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lossy_anneal::algorithms::{run, Algorithm, CoolingSchedule, DropModel, RunSpec, TraceLevel};
use lossy_anneal::analysis::{
    batch_means_variance_rate, exact_avr, gibbs, matrix_bsa, matrix_lsa, matrix_rsa, stationary, tv_distance,
    Distribution, StateSpace, TransitionMatrix, DEFAULT_MATRIX_CAP, DEFAULT_STATE_CAP,
};
use lossy_anneal::network::{Configuration, InterferenceMode, NetworkModel};
use lossy_anneal::objective::conflict_bounds;
use lossy_anneal::presets::{four_node, ten_link_sinr, FOUR_NODE_EDGES, FOUR_NODE_WEIGHTS, TEN_LINK_SEED};

use nalgebra::DMatrix;

const W: [f64; 4] = FOUR_NODE_WEIGHTS;

fn adjacent(a: usize, b: usize) -> bool {
    FOUR_NODE_EDGES.iter().any(|&(u, v)| (u, v) == (a, b) || (u, v) == (b, a))
}

fn bits(s: usize) -> [u8; 4] {
    [(s >> 3 & 1) as u8, (s >> 2 & 1) as u8, (s >> 1 & 1) as u8, (s & 1) as u8]
}

fn index(x: [u8; 4]) -> usize {
    x.iter().fold(0, |acc, &b| acc * 2 + b as usize)
}

fn local(x: [u8; 4], j: usize) -> f64 {
    let clear = (0..4).all(|k| k == j || !adjacent(j, k) || x[k] == 0);
    if x[j] == 1 && clear {
        W[j]
    } else {
        0.0
    }
}

fn f(x: [u8; 4]) -> f64 {
    (0..4).map(|j| local(x, j)).sum()
}

fn metropolis(delta: f64, beta: f64) -> f64 {
    (beta * delta).exp().min(1.0)
}

#[test]
fn gibbs_matches_brute_force() {
    let (model, weights) = four_node();
    let space = StateSpace::for_model(&model, DEFAULT_STATE_CAP).unwrap();
    for beta in [0.0, 0.1, 0.5, 1.0, 3.0] {
        let raw: Vec<f64> = (0..16).map(|s| (beta * f(bits(s))).exp()).collect();
        let z: f64 = raw.iter().sum();
        let g = gibbs(&space, &model, &weights, beta).unwrap();
        for (s, r) in raw.iter().enumerate() {
            assert!((g.get(s) - r / z).abs() < 1e-14, "beta {beta} state {s}");
        }
    }
}

fn rsa_by_hand(beta: f64, p: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(16, 16);
    let c = 1.0 / 4.0;
    for s in 0..16 {
        let x = bits(s);
        for i in 0..4 {
            let mut y = x;
            y[i] = 1 - x[i];
            let nbrs: Vec<usize> = (0..4).filter(|&j| j != i && adjacent(i, j)).collect();
            let own = local(y, i) - local(x, i);
            let mut total = 0.0;
            for mask in 0..(1u32 << nbrs.len()) {
                let mut q = 1.0;
                let mut delta = own;
                for (k, &j) in nbrs.iter().enumerate() {
                    if mask >> k & 1 == 1 {
                        q *= 1.0 - p;
                        delta += local(y, j) - local(x, j);
                    } else {
                        q *= p;
                        delta += if y[i] > x[i] { -W[j] } else { 0.0 };
                    }
                }
                total += q * metropolis(delta, beta);
            }
            m[(s, index(y))] = c * total;
        }
        let off: f64 = m.row(s).iter().sum();
        m[(s, s)] = 1.0 - off;
    }
    m
}

#[test]
fn rsa_matrix_matches_double_loop() {
    let (model, weights) = four_node();
    let space = StateSpace::for_model(&model, DEFAULT_STATE_CAP).unwrap();
    let bounds = conflict_bounds(model.neighbor_sets(), &weights, 2).unwrap();
    for (beta, p) in [(0.1, 0.1), (0.5, 0.3), (1.0, 0.5), (2.0, 0.9)] {
        let drop = DropModel::independent(p).unwrap();
        let lib = matrix_rsa(&space, &model, &weights, &bounds, beta, &drop, DEFAULT_MATRIX_CAP).unwrap();
        let oracle = rsa_by_hand(beta, p);
        for r in 0..16 {
            for c in 0..16 {
                assert!((lib.get(r, c) - oracle[(r, c)]).abs() < 1e-14, "({r},{c}) beta {beta} p {p}");
            }
        }
    }
}

#[test]
fn lsa_scales_bsa_by_full_delivery_probability() {
    let (model, weights) = four_node();
    let space = StateSpace::for_model(&model, DEFAULT_STATE_CAP).unwrap();
    let drop = DropModel::independent(0.5).unwrap();
    let b = matrix_bsa(&space, &model, &weights, 1.0, DEFAULT_MATRIX_CAP).unwrap();
    let l = matrix_lsa(&space, &model, &weights, 1.0, &drop, DEFAULT_MATRIX_CAP).unwrap();
    for s in 0..16 {
        let x = bits(s);
        for i in 0..4 {
            let mut y = x;
            y[i] = 1 - x[i];
            let degree = (0..4).filter(|&j| j != i && adjacent(i, j)).count() as i32;
            let expected = 0.5f64.powi(degree) * b.get(s, index(y));
            assert!((l.get(s, index(y)) - expected).abs() < 1e-15);
        }
    }
    // Link c hears from three neighbors.
    let c_on = index([0, 0, 1, 0]);
    assert!((l.get(0, c_on) - 0.125 * b.get(0, c_on)).abs() < 1e-15);
}

#[test]
fn sinr_rates_match_direct_evaluation() {
    let model = ten_link_sinr(TEN_LINK_SEED, InterferenceMode::Truncated).unwrap();
    let full = ten_link_sinr(TEN_LINK_SEED, InterferenceMode::Full).unwrap();
    let NetworkModel::Sinr(sinr) = &model else {
        panic!("ten-link preset is an SINR model")
    };
    let powers = [0.0, 5.0, 10.0];
    let band = |g: f64| {
        let db = 10.0 * g.log10();
        if g <= 0.0 || db <= 10.0 {
            0.0
        } else if db <= 20.0 {
            1.0
        } else if db <= 30.0 {
            2.0
        } else {
            3.0
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let x: Vec<u8> = (0..10).map(|_| rng.gen_range(0..3)).collect();
        let cfg = Configuration::new(x.clone());
        let truncated = model.rates(&cfg).unwrap();
        let everyone = full.rates(&cfg).unwrap();
        for i in 0..10 {
            let g = &sinr.topology.gains;
            let signal = g[i][i] * powers[x[i] as usize];
            let near: f64 = sinr.neighbors.of(i).iter().map(|&j| g[j][i] * powers[x[j] as usize]).sum();
            let all: f64 = (0..10).filter(|&j| j != i).map(|j| g[j][i] * powers[x[j] as usize]).sum();
            assert_eq!(truncated[i], band(signal / (near + sinr.topology.noise_mw)));
            assert_eq!(everyone[i], band(signal / (all + sinr.topology.noise_mw)));
        }
    }
}

#[test]
fn uniform_to_gibbs_distance_matches_hand_sum() {
    let (model, weights) = four_node();
    let space = StateSpace::for_model(&model, DEFAULT_STATE_CAP).unwrap();
    let g = gibbs(&space, &model, &weights, 1.0).unwrap();
    let u = Distribution::uniform(16);
    let hand: f64 = 0.5 * (0..16).map(|s| (g.get(s) - 1.0 / 16.0).abs()).sum::<f64>();
    assert!((tv_distance(&u, &g).unwrap() - hand).abs() < 1e-15);
}

#[test]
fn exact_variance_rate_of_independent_chain_is_variance() {
    let pi = [0.1, 0.2, 0.3, 0.4];
    let m = DMatrix::from_fn(4, 4, |_, c| pi[c]);
    let p = TransitionMatrix::from_dense(m).unwrap();
    let dist = Distribution::new(pi.to_vec()).unwrap();
    let h = [1.0, -2.0, 0.5, 3.0];
    let mean: f64 = pi.iter().zip(&h).map(|(a, b)| a * b).sum();
    let var: f64 = pi.iter().zip(&h).map(|(a, b)| a * (b - mean).powi(2)).sum();
    assert!((exact_avr(&p, &dist, &h).unwrap() - var).abs() < 1e-12);
}

#[test]
fn batch_means_curve_is_flat_for_iid_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let series: Vec<f64> = (0..2_000_000).map(|_| f64::from(u8::from(rng.gen::<f64>() < 0.3))).collect();
    for (b, v) in batch_means_variance_rate(&series, &[1, 10, 100, 1000]).unwrap() {
        assert!((v - 0.21).abs() < 0.21 * 0.1, "batch {b}: {v}");
    }
}

#[test]
fn bsa_long_run_matches_gibbs() {
    let (model, weights) = four_node();
    let space = StateSpace::for_model(&model, DEFAULT_STATE_CAP).unwrap();
    let drop = DropModel::independent(0.3).unwrap();
    let out = run(
        &model,
        &RunSpec {
            algorithm: Algorithm::Bsa,
            weights: &weights,
            bounds: None,
            drop: &drop,
            schedule: CoolingSchedule::Fixed(0.1),
            x0: None,
            horizon: 500_000,
            seed: 11,
            trace: TraceLevel::Off,
        },
    )
    .unwrap();
    let mut counts = [0.0; 16];
    for x in out.trajectory.iter() {
        counts[space.index(x)] += 1.0;
    }
    let n = out.trajectory.len() as f64;
    let empirical = Distribution::new(counts.iter().map(|c| c / n).collect()).unwrap();
    let g = gibbs(&space, &model, &weights, 0.1).unwrap();
    assert!(tv_distance(&empirical, &g).unwrap() < 0.05);
    let b = matrix_bsa(&space, &model, &weights, 0.1, DEFAULT_MATRIX_CAP).unwrap();
    assert!(tv_distance(&stationary(&b).unwrap(), &g).unwrap() < 1e-12);
}

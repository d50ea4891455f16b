//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lossy_anneal::algorithms::{run, Algorithm, CoolingSchedule, DropModel, RunSpec, TraceLevel};
use lossy_anneal::analysis::{
    annealing_occupancy, cooling_constant_bound, critical_depth, detailed_balance_violation, empirical_avr, exact_avr, exponent_check,
    gibbs, matrix_bsa, matrix_lsa, matrix_rsa, optimal_set, peskun_check, stationary, tv_distance, AnnealingSpec,
    Distribution, StateSpace, DEFAULT_MATRIX_CAP, DEFAULT_STATE_CAP,
};
use lossy_anneal::network::{Configuration, InterferenceMode, NetworkModel};
use lossy_anneal::objective::{conflict_bounds, BoundTable, WeightVector};
use lossy_anneal::presets::{four_node, four_node_optimum, ten_link_sinr, TEN_LINK_SEED};
use lossy_anneal::queueing::{run_queueing, QueueSpec};
use lossy_anneal::scenario::{Scenario, BUNDLED};
use lossy_anneal::experiment::{cmd_run, RunOptions};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Four {
    model: NetworkModel,
    weights: WeightVector,
    space: StateSpace,
    bounds: BoundTable,
}

fn four() -> Four {
    let (model, weights) = four_node();
    let space = StateSpace::for_model(&model, DEFAULT_STATE_CAP).unwrap();
    let bounds = conflict_bounds(model.neighbor_sets(), &weights, 2).unwrap();
    Four {
        model,
        weights,
        space,
        bounds,
    }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

// 1: LSA keeps the Gibbs distribution stationary.
fn lsa_stationarity() -> Outcome {
    let start = Instant::now();
    let f = four();
    let mut worst: f64 = 0.0;
    for beta in [0.1, 1.0] {
        let pi = gibbs(&f.space, &f.model, &f.weights, beta).unwrap();
        for p in [0.1, 0.5] {
            let drop = DropModel::independent(p).unwrap();
            let m = matrix_lsa(&f.space, &f.model, &f.weights, beta, &drop, DEFAULT_MATRIX_CAP).unwrap();
            worst = worst.max(tv_distance(&stationary(&m).unwrap(), &pi).unwrap());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-10 && within(elapsed, Duration::from_secs(1)),
        format!("max TV {worst:.3e} (< 1e-10), {elapsed:.2?} (< 1 s)"),
    )
}

// 2: P^B >= P^R >= P^L off the diagonal.
fn peskun_ordering() -> Outcome {
    let start = Instant::now();
    let f = four();
    let mut all = true;
    let mut worst = f64::NEG_INFINITY;
    for beta in [0.1, 0.5, 1.0] {
        let pb = matrix_bsa(&f.space, &f.model, &f.weights, beta, DEFAULT_MATRIX_CAP).unwrap();
        for p in [0.1, 0.3, 0.5] {
            let drop = DropModel::independent(p).unwrap();
            let pl = matrix_lsa(&f.space, &f.model, &f.weights, beta, &drop, DEFAULT_MATRIX_CAP).unwrap();
            let pr = matrix_rsa(&f.space, &f.model, &f.weights, &f.bounds, beta, &drop, DEFAULT_MATRIX_CAP).unwrap();
            for (low, high) in [(&pr, &pb), (&pl, &pr)] {
                let r = peskun_check(low, high).unwrap();
                all &= r.holds;
                worst = worst.max(r.max_violation);
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        all && within(elapsed, Duration::from_secs(1)),
        format!("9 grid points, largest low-minus-high entry {worst:.3e} (tolerance 1e-12), {elapsed:.2?} (< 1 s)"),
    )
}

// 3: bounded estimates never exceed the true differential, equal with no loss.
fn subset_inequality() -> Outcome {
    let start = Instant::now();
    let f = four();
    let r = exponent_check(&f.space, &f.model, &f.weights, &f.bounds).unwrap();
    let elapsed = start.elapsed();
    outcome(
        r.passed() && within(elapsed, Duration::from_secs(1)),
        format!(
            "{} transitions, {} subsets, {} violations, {} full-set mismatches, {elapsed:.2?} (< 1 s)",
            r.transitions, r.subsets, r.violations, r.equality_failures
        ),
    )
}

// 4: BSA is a correct Metropolis chain for the Gibbs distribution.
fn bsa_correctness() -> Outcome {
    let f = four();
    let (mut tv, mut db) = (0.0f64, 0.0f64);
    for beta in [0.1, 0.5, 1.0] {
        let pi = gibbs(&f.space, &f.model, &f.weights, beta).unwrap();
        let m = matrix_bsa(&f.space, &f.model, &f.weights, beta, DEFAULT_MATRIX_CAP).unwrap();
        tv = tv.max(tv_distance(&stationary(&m).unwrap(), &pi).unwrap());
        db = db.max(detailed_balance_violation(&m, &pi));
    }
    outcome(
        tv < 1e-10 && db <= 1e-12,
        format!("max TV {tv:.3e} (< 1e-10), max pairwise balance gap {db:.3e} (<= 1e-12)"),
    )
}

fn sample(dist: &Distribution, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, p) in dist.probabilities().iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    dist.len() - 1
}

// 5: RSA concentrates on the optimum; long runs match exact stationary vectors.
fn concentration() -> Outcome {
    let start = Instant::now();
    let f = four();
    let (beta, p) = (1.0, 0.5);
    let drop = DropModel::independent(p).unwrap();
    let pr = matrix_rsa(&f.space, &f.model, &f.weights, &f.bounds, beta, &drop, DEFAULT_MATRIX_CAP).unwrap();
    let top = f.space.config(stationary(&pr).unwrap().argmax());
    let mut details = vec![format!("RSA argmax {top}")];
    let mut pass = top == four_node_optimum();
    for (k, alg) in Algorithm::ALL.into_iter().enumerate() {
        let m = match alg {
            Algorithm::Bsa => matrix_bsa(&f.space, &f.model, &f.weights, beta, DEFAULT_MATRIX_CAP),
            Algorithm::Lsa => matrix_lsa(&f.space, &f.model, &f.weights, beta, &drop, DEFAULT_MATRIX_CAP),
            Algorithm::Rsa => Ok(pr.clone()),
        }
        .unwrap();
        let exact = stationary(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(500 + k as u64);
        let x0 = f.space.config(sample(&exact, &mut rng));
        let out = run(
            &f.model,
            &RunSpec {
                algorithm: alg,
                weights: &f.weights,
                bounds: Some(&f.bounds),
                drop: &drop,
                schedule: CoolingSchedule::Fixed(beta),
                x0: Some(x0),
                horizon: 1_000_000,
                seed: 5,
                trace: TraceLevel::Off,
            },
        )
        .unwrap();
        let mut counts = vec![0.0; f.space.len()];
        for x in out.trajectory.iter().skip(1) {
            counts[f.space.index(x)] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        let empirical = Distribution::new(counts.iter().map(|c| c / total).collect()).unwrap();
        let tv = tv_distance(&empirical, &exact).unwrap();
        pass &= tv < 0.05;
        details.push(format!("{alg} TV {tv:.4}"));
    }
    let elapsed = start.elapsed();
    pass &= within(elapsed, Duration::from_secs(60));
    outcome(pass, format!("{} (< 0.05), {elapsed:.2?} (< 1 min)", details.join(", ")))
}

// 6: variance-rate ordering, exact and empirical.
fn variance_ordering() -> Outcome {
    const BATCH: usize = 20_000;
    const HORIZON: u64 = 3_000_000;
    const SEEDS: u64 = 10;
    let start = Instant::now();
    let f = four();
    let beta = 0.5;
    let target = f.space.index(&[0, 0, 1, 0]);
    let h: Vec<f64> = (0..f.space.len()).map(|k| f64::from(u8::from(k == target))).collect();
    let mut pass = true;
    let mut details = Vec::new();
    let pb = matrix_bsa(&f.space, &f.model, &f.weights, beta, DEFAULT_MATRIX_CAP).unwrap();
    for p in [0.1, 0.5] {
        let drop = DropModel::independent(p).unwrap();
        let pl = matrix_lsa(&f.space, &f.model, &f.weights, beta, &drop, DEFAULT_MATRIX_CAP).unwrap();
        let pr = matrix_rsa(&f.space, &f.model, &f.weights, &f.bounds, beta, &drop, DEFAULT_MATRIX_CAP).unwrap();
        let mut sigma = Vec::new();
        for (alg, m) in [(Algorithm::Bsa, &pb), (Algorithm::Lsa, &pl), (Algorithm::Rsa, &pr)] {
            let st = stationary(m).unwrap();
            let exact = exact_avr(m, &st, &h).unwrap();
            sigma.push(exact);
            let mut estimates = Vec::new();
            for seed in 1..=SEEDS {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let x0 = f.space.config(sample(&st, &mut rng));
                let out = run(
                    &f.model,
                    &RunSpec {
                        algorithm: alg,
                        weights: &f.weights,
                        bounds: Some(&f.bounds),
                        drop: &drop,
                        schedule: CoolingSchedule::Fixed(beta),
                        x0: Some(x0),
                        horizon: HORIZON,
                        seed,
                        trace: TraceLevel::Off,
                    },
                )
                .unwrap();
                let curve = empirical_avr(&out.trajectory, |x| f64::from(u8::from(f.space.index(x) == target)), &[BATCH]).unwrap();
                estimates.push(curve[0].1);
            }
            let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
            let rel = (mean - exact).abs() / exact;
            pass &= rel < 0.15;
            details.push(format!("p={p} {alg} exact {exact:.2} empirical {mean:.2} ({:.1}%)", 100.0 * rel));
        }
        let (b, l, r) = (sigma[0], sigma[1], sigma[2]);
        pass &= l >= b && l >= r && r >= b;
        details.push(format!("p={p} order lsa>=rsa>=bsa {}", l >= r && r >= b));
    }
    let elapsed = start.elapsed();
    pass &= within(elapsed, Duration::from_secs(300));
    outcome(
        pass,
        format!("batch {BATCH}, {SEEDS} seeds x {HORIZON} slots: {}; {elapsed:.2?} (< 5 min)", details.join("; ")),
    )
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn annealing_curve(f: &Four, d: f64, seeds: &[u64], checkpoints: &[u64]) -> lossy_anneal::analysis::AnnealingCurve {
    let drop = DropModel::independent(0.5).unwrap();
    annealing_occupancy(
        &f.model,
        &AnnealingSpec {
            algorithm: Algorithm::Rsa,
            weights: &f.weights,
            bounds: Some(&f.bounds),
            drop: &drop,
            schedule: CoolingSchedule::inverse_log(d).unwrap(),
            horizon: 1_000_000,
            seeds,
            checkpoints,
            x0: Some(Configuration::zeros(4)),
        },
        DEFAULT_STATE_CAP,
    )
    .unwrap()
}

// 7: RSA under inverse-log cooling with the critical-depth cooling constant.
fn annealing() -> Outcome {
    let start = Instant::now();
    let f = four();
    let d = critical_depth(&f.space, &f.model, &f.weights).unwrap();
    let seeds: Vec<u64> = (1..=10).collect();
    let checkpoints: Vec<u64> = (1..=10).map(|k| k * 100_000).collect();
    let curve = annealing_curve(&f, d, &seeds, &checkpoints);
    let last = *curve.mean.last().unwrap();
    let trend: Vec<(f64, f64)> = curve
        .checkpoints
        .iter()
        .zip(&curve.mean)
        .map(|(t, m)| (*t as f64, *m))
        .collect();
    let s = slope(&trend);
    let elapsed = start.elapsed();
    outcome(
        last > 0.9 && s >= 0.0 && within(elapsed, Duration::from_secs(300)),
        format!(
            "d = {d}, occupancy of the optimum at 1e6 slots {last:.4} (> 0.9), last-decade slope {s:.3e} (>= 0), {elapsed:.2?} (< 5 min)"
        ),
    )
}

// Not a criterion: the same experiment with the much larger constant
// 2 Σ V(x,x'), which cools too slowly to concentrate within the horizon.
fn annealing_conservative() -> String {
    let f = four();
    let d = cooling_constant_bound(&f.space, &f.model, &f.weights).unwrap();
    let seeds: Vec<u64> = (1..=10).collect();
    let curve = annealing_curve(&f, d, &seeds, &[100_000, 1_000_000]);
    format!(
        "d = {d}: occupancy of the optimum {:.4} at 1e5 slots, {:.4} at 1e6 slots",
        curve.mean[0], curve.mean[1]
    )
}

fn queue_ratios(model: &NetworkModel, p: f64, arrival: f64, c_max: f64, horizon: u64, seeds: u64) -> (f64, f64) {
    let drop = DropModel::independent(p).unwrap();
    let n = model.links();
    let mut rsa_lsa = 0.0;
    let mut lsa_bsa = 0.0;
    for seed in 1..=seeds {
        let mean = |algorithm| {
            run_queueing(
                model,
                &QueueSpec {
                    algorithm,
                    drop: &drop,
                    schedule: CoolingSchedule::Fixed(1.0),
                    arrivals: vec![arrival; n],
                    c_max: vec![c_max; n],
                    horizon,
                    seed,
                },
            )
            .expect("stale-weight bounds stay sound")
            .network_mean()
        };
        let (b, l, r) = (mean(Algorithm::Bsa), mean(Algorithm::Lsa), mean(Algorithm::Rsa));
        rsa_lsa += r / l;
        lsa_bsa += l / b;
    }
    (rsa_lsa / seeds as f64, lsa_bsa / seeds as f64)
}

// 8: RSA shortens queues relative to LSA; LSA is worse than BSA.
fn queueing() -> Outcome {
    const SEEDS: u64 = 10;
    const HORIZON: u64 = 100_000;
    let start = Instant::now();
    let (four_model, _) = four_node();
    let ten = ten_link_sinr(TEN_LINK_SEED, InterferenceMode::Truncated).unwrap();
    let mut pass = true;
    let mut details = Vec::new();
    let cases = [("four-link", &four_model, 0.5, 1.0), ("ten-link", &ten, 0.1, 3.0), ("ten-link", &ten, 0.3, 3.0)];
    for (name, model, p, c_max) in cases {
        let (rl, lb) = queue_ratios(model, p, 0.2, c_max, HORIZON, SEEDS);
        pass &= rl < 1.0 && lb > 1.0;
        details.push(format!("{name} p={p}: rsa/lsa {rl:.3}, lsa/bsa {lb:.3}"));
    }
    let elapsed = start.elapsed();
    pass &= within(elapsed, Duration::from_secs(600));
    outcome(
        pass,
        format!("arrival 0.2, {SEEDS} seeds x {HORIZON} slots, stale bounds sound throughout: {}; {elapsed:.2?} (< 10 min)", details.join("; ")),
    )
}

fn shrink(mut s: Scenario) -> Scenario {
    s.horizon = s.horizon.min(20_000);
    s.seeds.truncate(2);
    if let Some(a) = &mut s.annealing {
        a.checkpoints.retain(|&t| t <= 20_000);
    }
    s
}

fn csv_bytes(s: &Scenario, threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let results = pool.install(|| cmd_run(s, Path::new("."), &RunOptions::default())).unwrap();
    let mut buf = Vec::new();
    results.write_csv(&mut buf).unwrap();
    buf
}

// 9: reruns produce byte-identical CSV.
fn determinism() -> Outcome {
    let mut pass = true;
    let mut rows = 0;
    for b in BUNDLED {
        let s = shrink(Scenario::parse(b.text).unwrap());
        let first = csv_bytes(&s, 1);
        let second = csv_bytes(&s, 3);
        pass &= first == second && first.len() > 100;
        rows += first.iter().filter(|&&c| c == b'\n').count();
    }
    outcome(
        pass,
        format!("{} bundled scenarios rerun on 1 and 3 threads, {rows} CSV lines compared", BUNDLED.len()),
    )
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags such as `--nocapture`; a name filter
    // that matches nothing here skips the suite.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filter.is_empty() && !filter.iter().any(|f| "acceptance".contains(f.as_str())) {
        return ExitCode::SUCCESS;
    }
    let (model, weights) = four_node();
    let space = StateSpace::for_model(&model, DEFAULT_STATE_CAP).unwrap();
    let (opt, _) = optimal_set(&space, &model, &weights).unwrap();
    assert_eq!(opt, vec![space.index(four_node_optimum().levels())]);

    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 9] = [
        ("LSA stationarity", lsa_stationarity),
        ("Peskun ordering", peskun_ordering),
        ("subset inequality", subset_inequality),
        ("BSA Metropolis correctness", bsa_correctness),
        ("optimal-state concentration", concentration),
        ("variance-rate ordering", variance_ordering),
        ("annealing optimality", annealing),
        ("queueing improvement", queueing),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!("criterion {} {name}: {} ({})", k + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if k == 6 {
            println!("  note: {}", annealing_conservative());
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Executes scenarios and collects tidy result rows.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::algorithms::{Algorithm, CoolingSchedule, Simulator, StaticContext};
use crate::analysis::{
    annealing_occupancy, exact_avr, exponent_check, gibbs, matrix_for, optimal_set, peskun_check, stationary,
    detailed_balance_violation, tv_distance, AnnealingSpec, StateSpace, DEFAULT_MATRIX_CAP, DEFAULT_STATE_CAP,
};
use crate::error::{Error, Result};
use crate::network::{Configuration, NetworkModel};
use crate::objective::{total_objective, BoundTable, WeightVector};
use crate::queueing::{run_queueing, QueueSpec};
use crate::scenario::{drop_model, AxisSpec, Metric, Point, Scenario};

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Largest state space for exact analysis (dense matrices).
    pub cap: usize,
    /// Replaces the scenario's seed list.
    pub seed: Option<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_MATRIX_CAP,
            seed: None,
        }
    }
}

/// One tidy result value.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub scenario: String,
    pub algorithm: String,
    pub point: String,
    /// `None` for seed-independent values (exact quantities, seed averages).
    pub seed: Option<u64>,
    pub metric: String,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultSet {
    rows: Vec<Row>,
}

impl ResultSet {
    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = Row>) {
        self.rows.extend(rows);
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows matching an algorithm and metric.
    pub fn select<'a>(&'a self, algorithm: &'a str, metric: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.algorithm == algorithm && r.metric == metric)
    }

    fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            (&a.scenario, &a.algorithm, &a.point, a.seed, &a.metric).cmp(&(&b.scenario, &b.algorithm, &b.point, b.seed, &b.metric))
        });
    }

    /// Columns `scenario, algorithm, point, seed, metric, value`, sorted.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut sorted = self.clone();
        sorted.sort();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scenario", "algorithm", "point", "seed", "metric", "value"])?;
        for r in &sorted.rows {
            w.write_record([
                r.scenario.as_str(),
                r.algorithm.as_str(),
                r.point.as_str(),
                &r.seed.map(|s| s.to_string()).unwrap_or_default(),
                r.metric.as_str(),
                &format!("{:?}", r.value),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Context<'s> {
    scenario: &'s Scenario,
    model: NetworkModel,
    weights: WeightVector,
    base: &'s Path,
    seeds: Vec<u64>,
    cap: usize,
}

impl Context<'_> {
    fn row(&self, algorithm: &str, point: &Point, seed: Option<u64>, metric: impl Into<String>, value: f64) -> Row {
        Row {
            scenario: self.scenario.name.clone(),
            algorithm: algorithm.to_string(),
            point: point.to_string(),
            seed,
            metric: metric.into(),
            value,
        }
    }

    fn bounds_for(&self, algorithm: Algorithm, point: &Point) -> Result<Option<BoundTable>> {
        if algorithm == Algorithm::Rsa {
            Ok(Some(self.scenario.bound_table(&self.model, &self.weights, point, self.base)?))
        } else {
            Ok(None)
        }
    }
}

/// Runs every (algorithm, point, seed) cell of a scenario.
pub fn cmd_run(scenario: &Scenario, base: &Path, options: &RunOptions) -> Result<ResultSet> {
    scenario.validate()?;
    let model = scenario.build_model(base)?;
    let weights = scenario.weight_vector(model.links())?;
    let seeds = options.seed.map(|s| vec![s]).unwrap_or_else(|| scenario.seeds.clone());
    let ctx = Context {
        scenario,
        model,
        weights,
        base,
        seeds,
        cap: options.cap,
    };
    let points = scenario.points();
    let mut results = ResultSet::default();

    let wants = |m: Metric| scenario.metrics.contains(&m);
    let simulated = [
        Metric::Occupancy,
        Metric::AcceptanceRate,
        Metric::MeanObjective,
        Metric::VarianceRate,
    ]
    .into_iter()
    .any(wants);

    let mut cells = Vec::new();
    for point in &points {
        for &algorithm in &scenario.algorithms {
            for &seed in &ctx.seeds {
                cells.push((*point, algorithm, seed));
            }
        }
    }

    if simulated {
        let rows: Vec<Vec<Row>> = cells
            .par_iter()
            .map(|(point, algorithm, seed)| simulate_cell(&ctx, point, *algorithm, *seed))
            .collect::<Result<_>>()?;
        results.extend(rows.into_iter().flatten());
    }

    if wants(Metric::Queue) {
        let summaries: Vec<(Point, Algorithm, u64, f64, Vec<Row>)> = cells
            .par_iter()
            .map(|(point, algorithm, seed)| queue_cell(&ctx, point, *algorithm, *seed))
            .collect::<Result<_>>()?;
        let mut by_cell: BTreeMap<(String, u64), BTreeMap<Algorithm, f64>> = BTreeMap::new();
        for (point, algorithm, seed, mean, rows) in summaries {
            results.extend(rows);
            by_cell
                .entry((point.to_string(), seed))
                .or_default()
                .insert(algorithm, mean);
        }
        results.extend(queue_ratios(&ctx, &points, &by_cell));
    }

    if [Metric::Stationary, Metric::Gibbs, Metric::ExactVarianceRate].into_iter().any(wants) {
        for point in &points {
            results.extend(exact_rows(&ctx, point)?);
        }
    }

    if wants(Metric::Annealing) {
        for point in &points {
            for &algorithm in &scenario.algorithms {
                results.extend(annealing_rows(&ctx, point, algorithm)?);
            }
        }
    }

    results.sort();
    Ok(results)
}

fn simulate_cell(ctx: &Context<'_>, point: &Point, algorithm: Algorithm, seed: u64) -> Result<Vec<Row>> {
    let scenario = ctx.scenario;
    let model = &ctx.model;
    let drop = drop_model(point)?;
    let bounds = ctx.bounds_for(algorithm, point)?;
    crate::algorithms::check_run_inputs(model, algorithm, &ctx.weights, bounds.as_ref())?;
    let mut sim = Simulator::new(
        model,
        &drop,
        algorithm,
        point.schedule,
        scenario.initial_state(model.links()),
        seed,
    )?;
    let mut static_ctx = StaticContext {
        weights: &ctx.weights,
        bounds: bounds.as_ref(),
    };
    let variance = scenario
        .variance
        .as_ref()
        .filter(|_| scenario.metrics.contains(&Metric::VarianceRate));
    let target = variance.map(|v| Configuration::new(v.state.clone()));
    let burn_in = variance.map_or(0, |v| v.burn_in);

    let mut counts: BTreeMap<Configuration, u64> = BTreeMap::new();
    let mut series = Vec::new();
    let mut accepted = 0u64;
    let mut objective = 0.0;
    for t in 1..=scenario.horizon {
        let r = sim.step(&mut static_ctx)?;
        accepted += u64::from(r.accepted);
        objective += total_objective(model, ctx.weights.as_slice(), r.state.levels());
        if let Some(x) = &target {
            if t > burn_in {
                series.push(f64::from(u8::from(&r.state == x)));
            }
        }
        *counts.entry(r.state).or_insert(0) += 1;
    }

    let name = algorithm.name();
    let horizon = scenario.horizon as f64;
    let mut rows = Vec::new();
    if scenario.metrics.contains(&Metric::Occupancy) {
        for (x, c) in &counts {
            rows.push(ctx.row(name, point, Some(seed), format!("occupancy/{x}"), *c as f64 / horizon));
        }
    }
    if scenario.metrics.contains(&Metric::AcceptanceRate) {
        rows.push(ctx.row(name, point, Some(seed), "acceptance_rate", accepted as f64 / horizon));
    }
    if scenario.metrics.contains(&Metric::MeanObjective) {
        rows.push(ctx.row(name, point, Some(seed), "mean_objective", objective / horizon));
    }
    if let Some(v) = variance {
        for &b in &v.batch_sizes {
            match crate::analysis::batch_means_variance_rate(&series, &[b]) {
                Ok(curve) => rows.push(ctx.row(name, point, Some(seed), format!("variance_rate/{b}"), curve[0].1)),
                Err(Error::InsufficientData { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(rows)
}

fn queue_cell(ctx: &Context<'_>, point: &Point, algorithm: Algorithm, seed: u64) -> Result<(Point, Algorithm, u64, f64, Vec<Row>)> {
    let model = &ctx.model;
    let drop = drop_model(point)?;
    let n = model.links();
    let spec = QueueSpec {
        algorithm,
        drop: &drop,
        schedule: point.schedule,
        arrivals: vec![point.arrival.unwrap_or(0.0); n],
        c_max: vec![point.c_max.unwrap_or_else(|| model.max_rate()); n],
        horizon: ctx.scenario.horizon,
        seed,
    };
    let summary = run_queueing(model, &spec)?;
    let name = algorithm.name();
    let mut rows: Vec<Row> = summary
        .mean_queue
        .iter()
        .enumerate()
        .map(|(i, q)| ctx.row(name, point, Some(seed), format!("mean_queue/{i}"), *q))
        .collect();
    rows.push(ctx.row(name, point, Some(seed), "mean_queue/network", summary.network_mean()));
    rows.push(ctx.row(name, point, Some(seed), "max_queue_link", summary.max_link as f64));
    rows.push(ctx.row(
        name,
        point,
        Some(seed),
        "acceptance_rate",
        summary.accepted as f64 / ctx.scenario.horizon as f64,
    ));
    Ok((*point, algorithm, seed, summary.network_mean(), rows))
}

/// Per-seed and seed-averaged `rsa/lsa` and `lsa/bsa` network queue ratios.
fn queue_ratios(ctx: &Context<'_>, points: &[Point], by_cell: &BTreeMap<(String, u64), BTreeMap<Algorithm, f64>>) -> Vec<Row> {
    let mut rows = Vec::new();
    for point in points {
        for (num, den) in [(Algorithm::Rsa, Algorithm::Lsa), (Algorithm::Lsa, Algorithm::Bsa)] {
            let label = format!("{num}/{den}");
            let ratios: Vec<f64> = ctx
                .seeds
                .iter()
                .filter_map(|&seed| {
                    let cell = by_cell.get(&(point.to_string(), seed))?;
                    Some(cell.get(&num)? / cell.get(&den)?)
                })
                .collect();
            if ratios.is_empty() {
                continue;
            }
            for (&seed, r) in ctx.seeds.iter().zip(&ratios) {
                rows.push(ctx.row(&label, point, Some(seed), "queue_ratio", *r));
            }
            let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
            rows.push(ctx.row(&label, point, None, "queue_ratio", mean));
        }
    }
    rows
}

fn exact_rows(ctx: &Context<'_>, point: &Point) -> Result<Vec<Row>> {
    let scenario = ctx.scenario;
    let model = &ctx.model;
    let beta = point
        .beta()
        .ok_or_else(|| Error::scenario("schedule.kind", "exact metrics need a fixed schedule"))?;
    let space = StateSpace::for_model(model, ctx.cap)?;
    let mut rows = Vec::new();
    let pi = gibbs(&space, model, &ctx.weights, beta)?;
    if scenario.metrics.contains(&Metric::Gibbs) {
        for (k, p) in pi.probabilities().iter().enumerate() {
            rows.push(ctx.row("gibbs", point, None, format!("gibbs/{}", space.config(k)), *p));
        }
    }
    let drop = drop_model(point)?;
    for &algorithm in &scenario.algorithms {
        let bounds = ctx.bounds_for(algorithm, point)?;
        let p = matrix_for(algorithm, &space, model, &ctx.weights, bounds.as_ref(), beta, &drop, ctx.cap)?;
        let st = stationary(&p)?;
        if scenario.metrics.contains(&Metric::Stationary) {
            for (k, v) in st.probabilities().iter().enumerate() {
                rows.push(ctx.row(algorithm.name(), point, None, format!("stationary/{}", space.config(k)), *v));
            }
        }
        if let (true, Some(v)) = (scenario.metrics.contains(&Metric::ExactVarianceRate), &scenario.variance) {
            let target = space.index(&v.state);
            let h: Vec<f64> = (0..space.len()).map(|k| f64::from(u8::from(k == target))).collect();
            rows.push(ctx.row(algorithm.name(), point, None, "exact_variance_rate", exact_avr(&p, &st, &h)?));
        }
    }
    Ok(rows)
}

/// Powers of ten below the horizon, then the horizon.
pub fn default_checkpoints(horizon: u64) -> Vec<u64> {
    let mut out: Vec<u64> = std::iter::successors(Some(10u64), |t| t.checked_mul(10))
        .take_while(|&t| t < horizon)
        .collect();
    out.push(horizon);
    out
}

fn annealing_rows(ctx: &Context<'_>, point: &Point, algorithm: Algorithm) -> Result<Vec<Row>> {
    let scenario = ctx.scenario;
    let drop = drop_model(point)?;
    let bounds = ctx.bounds_for(algorithm, point)?;
    let checkpoints = match scenario.annealing.as_ref().map(|a| a.checkpoints.clone()) {
        Some(c) if !c.is_empty() => c,
        _ => default_checkpoints(scenario.horizon),
    };
    let spec = AnnealingSpec {
        algorithm,
        weights: &ctx.weights,
        bounds: bounds.as_ref(),
        drop: &drop,
        schedule: point.schedule,
        horizon: scenario.horizon,
        seeds: &ctx.seeds,
        checkpoints: &checkpoints,
        x0: Some(scenario.initial_state(ctx.model.links())),
    };
    let curve = annealing_occupancy(&ctx.model, &spec, DEFAULT_STATE_CAP.max(ctx.cap))?;
    let mut rows = Vec::new();
    for (k, t) in curve.checkpoints.iter().enumerate() {
        let metric = format!("annealing/{t}");
        for (s, seed) in ctx.seeds.iter().enumerate() {
            rows.push(ctx.row(algorithm.name(), point, Some(*seed), metric.clone(), curve.per_seed[s][k]));
        }
        rows.push(ctx.row(algorithm.name(), point, None, metric, curve.mean[k]));
    }
    Ok(rows)
}

/// Applies each axis, then runs the resulting grid.
pub fn cmd_sweep(scenario: &Scenario, base: &Path, axes: &[AxisSpec], options: &RunOptions) -> Result<ResultSet> {
    let mut swept = scenario.clone();
    for axis in axes {
        swept.apply_axis(axis)?;
    }
    cmd_run(&swept, base, options)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Info,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub algorithm: String,
    pub beta: Option<f64>,
    pub p: Option<f64>,
    pub status: Status,
    pub value: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AnalysisReport {
    pub rows: Vec<CheckRow>,
}

impl AnalysisReport {
    pub fn failed(&self) -> bool {
        self.rows.iter().any(|r| r.status == Status::Fail)
    }

    pub fn find(&self, check: &str, algorithm: &str, beta: f64, p: f64) -> Option<&CheckRow> {
        self.rows
            .iter()
            .find(|r| r.check == check && r.algorithm == algorithm && r.beta == Some(beta) && r.p == Some(p))
    }

    /// Columns `check, algorithm, beta, p, status, value, detail`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["check", "algorithm", "beta", "p", "status", "value", "detail"])?;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.check.clone(),
                r.algorithm.clone(),
                opt(r.beta),
                opt(r.p),
                r.status.to_string(),
                format!("{:?}", r.value),
                r.detail.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exact-analysis tolerance for stationarity against the Gibbs vector.
pub const STATIONARY_TV_TOLERANCE: f64 = 1e-10;
/// Tolerance for pairwise detailed balance.
pub const DETAILED_BALANCE_TOLERANCE: f64 = 1e-12;

/// Runs the exact-analysis suite over every `(β, p)` point of a scenario.
pub fn cmd_analyze(scenario: &Scenario, base: &Path, options: &RunOptions) -> Result<AnalysisReport> {
    scenario.validate()?;
    let model = scenario.build_model(base)?;
    let weights = scenario.weight_vector(model.links())?;
    let space = StateSpace::for_model(&model, options.cap)?;
    let mut report = AnalysisReport::default();
    let mut push = |check: &str, algorithm: &str, beta: Option<f64>, p: Option<f64>, status: Status, value: f64, detail: String| {
        report.rows.push(CheckRow {
            check: check.to_string(),
            algorithm: algorithm.to_string(),
            beta,
            p,
            status,
            value,
            detail,
        })
    };
    let pass = |ok: bool| if ok { Status::Pass } else { Status::Fail };

    let (optimal, f_max) = optimal_set(&space, &model, &weights)?;
    let optimal_names: Vec<String> = optimal.iter().map(|&k| space.config(k).to_string()).collect();
    push("optimum", "", None, None, Status::Info, f_max, optimal_names.join(" "));

    let mut exponent_done = false;
    let mut seen = Vec::new();
    for point in scenario.points() {
        let beta = match point.schedule {
            CoolingSchedule::Fixed(b) => b,
            CoolingSchedule::InverseLog { .. } => {
                return Err(Error::scenario("schedule.kind", "exact analysis needs a fixed schedule"))
            }
        };
        let key = (point.p, beta, point.c_max);
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let p = point.p;
        let drop = drop_model(&point)?;
        let bounds = scenario.bound_table(&model, &weights, &point, base)?;
        if !exponent_done || point.c_max.is_some() {
            let r = exponent_check(&space, &model, &weights, &bounds)?;
            let detail = match &r.witness {
                Some(w) => format!(
                    "state {} link {} -> {} received {:?}: bounded {} exceeds {}",
                    w.state, w.link, w.to, w.received, w.bounded, w.exact
                ),
                None => format!("{} transitions, {} subsets", r.transitions, r.subsets),
            };
            push(
                "exponent",
                "rsa",
                None,
                None,
                pass(r.passed()),
                (r.violations + r.equality_failures) as f64,
                detail,
            );
            exponent_done = true;
        }

        let pi = gibbs(&space, &model, &weights, beta)?;
        let mut matrices = BTreeMap::new();
        for alg in Algorithm::ALL {
            let m = matrix_for(alg, &space, &model, &weights, Some(&bounds), beta, &drop, options.cap)?;
            push(
                "row_stochastic",
                alg.name(),
                Some(beta),
                Some(p),
                pass(m.max_row_sum_error() <= 1e-12),
                m.max_row_sum_error(),
                String::new(),
            );
            let st = stationary(&m)?;
            let tv = tv_distance(&st, &pi)?;
            match alg {
                Algorithm::Bsa | Algorithm::Lsa => {
                    push(
                        "stationary_tv",
                        alg.name(),
                        Some(beta),
                        Some(p),
                        pass(tv < STATIONARY_TV_TOLERANCE),
                        tv,
                        "distance to the Gibbs distribution".into(),
                    );
                    let db = detailed_balance_violation(&m, &pi);
                    push(
                        "detailed_balance",
                        alg.name(),
                        Some(beta),
                        Some(p),
                        pass(db <= DETAILED_BALANCE_TOLERANCE),
                        db,
                        String::new(),
                    );
                }
                Algorithm::Rsa => {
                    push(
                        "stationary_tv",
                        "rsa",
                        Some(beta),
                        Some(p),
                        Status::Info,
                        tv,
                        "bias relative to the Gibbs distribution".into(),
                    );
                    let top = st.argmax();
                    push(
                        "stationary_argmax",
                        "rsa",
                        Some(beta),
                        Some(p),
                        Status::Info,
                        st.get(top),
                        space.config(top).to_string(),
                    );
                }
            }
            matrices.insert(alg, (m, st));
        }
        for (low, high) in [(Algorithm::Rsa, Algorithm::Bsa), (Algorithm::Lsa, Algorithm::Rsa)] {
            let r = peskun_check(&matrices[&low].0, &matrices[&high].0)?;
            let detail = match r.witness {
                Some((a, b)) => format!("{} -> {}", space.config(a), space.config(b)),
                None => String::new(),
            };
            push(
                "peskun",
                &format!("{low}<={high}"),
                Some(beta),
                Some(p),
                pass(r.holds),
                r.max_violation,
                detail,
            );
        }
        if let Some(v) = &scenario.variance {
            let target = space.index(&v.state);
            let h: Vec<f64> = (0..space.len()).map(|k| f64::from(u8::from(k == target))).collect();
            let mut sigma = BTreeMap::new();
            for alg in Algorithm::ALL {
                let (m, st) = &matrices[&alg];
                let s = exact_avr(m, st, &h)?;
                push("exact_variance_rate", alg.name(), Some(beta), Some(p), Status::Info, s, String::new());
                sigma.insert(alg, s);
            }
            let (b, l, r) = (sigma[&Algorithm::Bsa], sigma[&Algorithm::Lsa], sigma[&Algorithm::Rsa]);
            push(
                "variance_order",
                "lsa>=bsa",
                Some(beta),
                Some(p),
                pass(l >= b * (1.0 - 1e-9)),
                l - b,
                String::new(),
            );
            push(
                "variance_order",
                "lsa>=rsa>=bsa",
                Some(beta),
                Some(p),
                Status::Info,
                f64::from(u8::from(l >= r && r >= b)),
                "observed ordering; not guaranteed in general".into(),
            );
        }
    }
    Ok(report)
}

//! The slotted annealing engine.
//!
//! Each slot runs four phases: a uniformly random link proposes a new power
//! level (pick), every affected link measures its objective change (train),
//! neighbors report to the proposer over a lossy channel (messaging), and the
//! proposer accepts or rejects (decision). BSA assumes every report arrives,
//! LSA only moves on slots where every report arrived, RSA substitutes a
//! lower bound for each missing report.
//!
//! Randomness is split into three independent streams (pick, drop,
//! acceptance) and every slot consumes the same number of draws from each
//! stream regardless of algorithm, so runs of different algorithms with the
//! same seed see identical proposals and identical message losses.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Configuration, Level, NetworkModel, NeighborSets};
use crate::objective::{
    aggregate, bounded_aggregate, differentials_unchecked, total_objective, BoundSource, BoundTable, WeightVector,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Bsa,
    Lsa,
    Rsa,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Bsa, Algorithm::Lsa, Algorithm::Rsa];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bsa => "bsa",
            Algorithm::Lsa => "lsa",
            Algorithm::Rsa => "rsa",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bsa" => Ok(Algorithm::Bsa),
            "lsa" => Ok(Algorithm::Lsa),
            "rsa" => Ok(Algorithm::Rsa),
            other => Err(Error::Parse(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Per link, every received subset with its probability.
pub type SubsetLaw = Vec<Vec<(Vec<usize>, f64)>>;

/// Which neighbor reports reach the proposer in a slot.
///
/// Algorithms only ever see the realized subset, never these probabilities.
#[derive(Clone, Debug, PartialEq)]
pub enum DropModel {
    /// Each report is lost independently with probability `p`.
    Independent { p: f64 },
    /// Explicit law over received subsets, per proposer.
    Subsets(SubsetLaw),
}

impl DropModel {
    pub fn independent(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidDropModel(format!(
                "drop probability must lie in [0, 1), got {p}"
            )));
        }
        Ok(DropModel::Independent { p })
    }

    pub fn none() -> Self {
        DropModel::Independent { p: 0.0 }
    }

    /// Validates an explicit subset law: every subset lies in `N_i`,
    /// probabilities sum to one, and the full set has positive mass.
    pub fn subsets(mut law: SubsetLaw, neighbors: &NeighborSets) -> Result<Self> {
        if law.len() != neighbors.len() {
            return Err(Error::DimensionMismatch {
                what: "subset law",
                expected: neighbors.len(),
                found: law.len(),
            });
        }
        for (i, entries) in law.iter_mut().enumerate() {
            let mut total = 0.0;
            let mut full = 0.0;
            for (subset, q) in entries.iter_mut() {
                subset.sort_unstable();
                subset.dedup();
                if let Some(j) = subset.iter().find(|j| !neighbors.contains(i, **j)) {
                    return Err(Error::InvalidDropModel(format!(
                        "link {i}: subset member {j} is not a neighbor"
                    )));
                }
                if !(q.is_finite() && *q >= 0.0) {
                    return Err(Error::InvalidDropModel(format!("link {i}: bad probability {q}")));
                }
                total += *q;
                if subset.as_slice() == neighbors.of(i) {
                    full += *q;
                }
            }
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidDropModel(format!(
                    "link {i}: subset probabilities sum to {total}"
                )));
            }
            if full <= 0.0 {
                return Err(Error::InvalidDropModel(format!(
                    "link {i}: the full neighbor set must have positive probability"
                )));
            }
        }
        Ok(DropModel::Subsets(law))
    }

    /// `q_{i,N_i}`.
    pub fn full_set_probability(&self, link: usize, neighbors: &[usize]) -> f64 {
        match self {
            DropModel::Independent { p } => (1.0 - p).powi(neighbors.len() as i32),
            DropModel::Subsets(law) => law[link]
                .iter()
                .filter(|(s, _)| s.as_slice() == neighbors)
                .map(|(_, q)| q)
                .sum(),
        }
    }

    /// The law of the received subset as `(membership mask over neighbor
    /// positions, probability)` pairs with positive mass.
    pub fn subset_law(&self, link: usize, neighbors: &[usize], cap: usize) -> Result<Vec<(u64, f64)>> {
        let size = neighbors.len();
        match self {
            DropModel::Independent { p } => {
                if size > cap.min(63) {
                    return Err(Error::SubsetCapExceeded { link, size, cap });
                }
                if *p == 0.0 {
                    return Ok(vec![((1u64 << size) - 1, 1.0)]);
                }
                Ok((0..1u64 << size)
                    .map(|mask| {
                        let kept = mask.count_ones() as i32;
                        (mask, (1.0 - p).powi(kept) * p.powi(size as i32 - kept))
                    })
                    .collect())
            }
            DropModel::Subsets(law) => {
                if size > 63 {
                    return Err(Error::SubsetCapExceeded { link, size, cap: 63 });
                }
                let mut merged: BTreeMap<u64, f64> = BTreeMap::new();
                for (subset, q) in &law[link] {
                    if *q == 0.0 {
                        continue;
                    }
                    let mask = subset.iter().fold(0u64, |m, j| {
                        let pos = neighbors.iter().position(|k| k == j).expect("validated subset");
                        m | 1 << pos
                    });
                    *merged.entry(mask).or_insert(0.0) += q;
                }
                Ok(merged.into_iter().collect())
            }
        }
    }
}

/// Draws the set of neighbors whose reports arrive.
///
/// Independent drops consume exactly one uniform per neighbor; explicit laws
/// consume one uniform.
pub fn sample_subset<R: Rng + ?Sized>(drop: &DropModel, link: usize, neighbors: &[usize], rng: &mut R) -> Vec<usize> {
    match drop {
        DropModel::Independent { p } => neighbors
            .iter()
            .copied()
            .filter(|_| rng.gen::<f64>() >= *p)
            .collect(),
        DropModel::Subsets(law) => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let entries = &law[link];
            for (subset, q) in entries {
                acc += q;
                if u < acc {
                    return subset.clone();
                }
            }
            // Rounding left a sliver above the last cumulative value.
            entries
                .iter()
                .rev()
                .find(|(_, q)| *q > 0.0)
                .map(|(s, _)| s.clone())
                .unwrap_or_default()
        }
    }
}

/// Inverse temperature over slots `t = 1, 2, …`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CoolingSchedule {
    Fixed(f64),
    /// `β(t) = ln(t + t0 − 1) / d`; `t0 = 1` gives `ln(t)/d`.
    InverseLog { d: f64, t0: f64 },
}

impl CoolingSchedule {
    pub fn fixed(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidSchedule(format!("beta must be finite and >= 0, got {beta}")));
        }
        Ok(CoolingSchedule::Fixed(beta))
    }

    pub fn inverse_log(d: f64) -> Result<Self> {
        Self::inverse_log_offset(d, 1.0)
    }

    pub fn inverse_log_offset(d: f64, t0: f64) -> Result<Self> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidSchedule(format!("d must be positive, got {d}")));
        }
        if !(t0.is_finite() && t0 >= 1.0) {
            return Err(Error::InvalidSchedule(format!("t0 must be >= 1, got {t0}")));
        }
        Ok(CoolingSchedule::InverseLog { d, t0 })
    }

    pub fn beta(&self, t: u64) -> f64 {
        match *self {
            CoolingSchedule::Fixed(beta) => beta,
            CoolingSchedule::InverseLog { d, t0 } => ((t.max(1) as f64) + t0 - 1.0).ln() / d,
        }
    }

    /// `ε(t) = e^{−β(t)}`.
    pub fn epsilon(&self, t: u64) -> f64 {
        (-self.beta(t)).exp()
    }

    /// `T(t) = 1/β(t)`.
    pub fn temperature(&self, t: u64) -> f64 {
        1.0 / self.beta(t)
    }
}

/// A proposed single-link move.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Proposal {
    pub link: usize,
    pub from: Level,
    pub to: Level,
}

/// Uniform link, then a uniform level different from the current one.
pub fn pick_phase<R: Rng + ?Sized>(x: &Configuration, num_levels: usize, rng: &mut R) -> Result<Proposal> {
    if num_levels < 2 {
        return Err(Error::SingleLevelAlphabet);
    }
    let link = rng.gen_range(0..x.len());
    let from = x.get(link);
    let mut to = rng.gen_range(0..num_levels - 1) as Level;
    if to >= from {
        to += 1;
    }
    Ok(Proposal { link, from, to })
}

/// `min(1, e^{βΔ})`, zero for `Δ = −∞`.
pub fn acceptance_probability(delta: f64, beta: f64) -> f64 {
    if delta == f64::NEG_INFINITY {
        0.0
    } else if delta >= 0.0 {
        1.0
    } else {
        (beta * delta).exp()
    }
}

fn accept<R: Rng + ?Sized>(probability: f64, rng: &mut R) -> bool {
    rng.gen::<f64>() < probability
}

/// Metropolis decision on the exact aggregate.
pub fn decide_bsa<R: Rng + ?Sized>(delta: f64, beta: f64, rng: &mut R) -> bool {
    accept(acceptance_probability(delta, beta), rng)
}

/// Rejects unless every neighbor reported; `delta` is only consulted then.
pub fn decide_lsa<R: Rng + ?Sized>(observed: &[usize], neighbors: &[usize], delta: Option<f64>, beta: f64, rng: &mut R) -> bool {
    let p = match delta {
        Some(d) if observed.len() == neighbors.len() => acceptance_probability(d, beta),
        _ => 0.0,
    };
    accept(p, rng)
}

/// Metropolis decision on the bounded estimate `Δ_[S]`.
pub fn decide_rsa<R: Rng + ?Sized>(bounded_delta: f64, beta: f64, rng: &mut R) -> bool {
    accept(acceptance_probability(bounded_delta, beta), rng)
}

/// Per-slot inputs that may change over time.
pub trait SlotContext {
    fn weights(&self) -> &[f64];

    /// Called after the messaging phase with the neighbors that got through.
    fn on_messages(&mut self, _proposer: usize, _received: &[usize]) {}

    /// Lower bound used by RSA for a neighbor whose report was lost.
    fn bound(&self, i: usize, j: usize, from: Level, to: Level) -> Result<f64>;
}

/// Fixed weights and an optional fixed bound table.
pub struct StaticContext<'a> {
    pub weights: &'a WeightVector,
    pub bounds: Option<&'a BoundTable>,
}

impl SlotContext for StaticContext<'_> {
    fn weights(&self) -> &[f64] {
        self.weights.as_slice()
    }

    fn bound(&self, i: usize, j: usize, from: Level, to: Level) -> Result<f64> {
        self.bounds.ok_or(Error::MissingBounds)?.get(i, j, from, to)
    }
}

struct ContextBounds<'c, C: ?Sized>(&'c C);

impl<C: SlotContext + ?Sized> BoundSource for ContextBounds<'_, C> {
    fn bound(&self, i: usize, j: usize, from: Level, to: Level) -> Result<f64> {
        self.0.bound(i, j, from, to)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TraceLevel {
    #[default]
    Off,
    Slots,
}

/// What happened in one slot; enough to replay the decision offline.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotRecord {
    pub t: u64,
    pub proposer: usize,
    pub from: Level,
    pub to: Level,
    /// Neighbors whose reports arrived, ascending.
    pub observed: Vec<usize>,
    /// `Δ` (BSA, LSA with a complete set) or `Δ_[S]` (RSA); `None` when LSA
    /// deferred.
    pub estimate: Option<f64>,
    pub beta: f64,
    pub accept_probability: f64,
    pub accepted: bool,
    /// Configuration after the slot.
    pub state: Configuration,
}

/// Mutable chain state: slot counter, configuration and random streams.
#[derive(Clone, Debug)]
pub struct SimState {
    pub t: u64,
    pub x: Configuration,
    pick_rng: ChaCha8Rng,
    drop_rng: ChaCha8Rng,
    accept_rng: ChaCha8Rng,
}

impl SimState {
    pub fn new(x: Configuration, seed: u64) -> Self {
        let stream = |k: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            rng
        };
        Self {
            t: 0,
            x,
            pick_rng: stream(1),
            drop_rng: stream(2),
            accept_rng: stream(3),
        }
    }
}

/// One chain driven slot by slot.
pub struct Simulator<'m> {
    model: &'m NetworkModel,
    drop: &'m DropModel,
    algorithm: Algorithm,
    schedule: CoolingSchedule,
    state: SimState,
}

impl<'m> Simulator<'m> {
    pub fn new(
        model: &'m NetworkModel,
        drop: &'m DropModel,
        algorithm: Algorithm,
        schedule: CoolingSchedule,
        x0: Configuration,
        seed: u64,
    ) -> Result<Self> {
        model.validate_configuration(&x0)?;
        if model.num_levels() < 2 {
            return Err(Error::SingleLevelAlphabet);
        }
        if let DropModel::Subsets(law) = drop {
            if law.len() != model.links() {
                return Err(Error::DimensionMismatch {
                    what: "subset law",
                    expected: model.links(),
                    found: law.len(),
                });
            }
        }
        Ok(Self {
            model,
            drop,
            algorithm,
            schedule,
            state: SimState::new(x0, seed),
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn x(&self) -> &Configuration {
        &self.state.x
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    /// Advances one slot.
    pub fn step<C: SlotContext + ?Sized>(&mut self, ctx: &mut C) -> Result<SlotRecord> {
        let model = self.model;
        let state = &mut self.state;
        state.t += 1;
        let beta = self.schedule.beta(state.t);

        // Pick.
        let proposal = pick_phase(&state.x, model.num_levels(), &mut state.pick_rng)?;
        let Proposal { link, from, to } = proposal;
        let neighbors = model.neighbors(link);

        // Messaging: which reports will arrive. Drawn for every algorithm so
        // the drop stream stays aligned across algorithms.
        let observed = sample_subset(self.drop, link, neighbors, &mut state.drop_rng);
        ctx.on_messages(link, &observed);

        // Train and decide.
        let weights = ctx.weights();
        let x_old = state.x.levels();
        let x_new = state.x.with(link, to);
        let estimate = match self.algorithm {
            Algorithm::Bsa => Some(aggregate(&differentials_unchecked(model, weights, x_old, x_new.levels(), link))),
            Algorithm::Lsa => (observed.len() == neighbors.len()).then(|| {
                aggregate(&differentials_unchecked(model, weights, x_old, x_new.levels(), link))
            }),
            Algorithm::Rsa => {
                let received = received_only(model, weights, x_old, x_new.levels(), link, &observed);
                Some(bounded_aggregate(&received, neighbors, &ContextBounds(&*ctx), from, to)?)
            }
        };
        let accept_probability = estimate.map_or(0.0, |d| acceptance_probability(d, beta));
        let accepted = accept(accept_probability, &mut state.accept_rng);
        if accepted {
            state.x = x_new;
        }
        Ok(SlotRecord {
            t: state.t,
            proposer: link,
            from,
            to,
            observed,
            estimate,
            beta,
            accept_probability,
            accepted,
            state: state.x.clone(),
        })
    }
}

/// Evaluates only the reports that arrived; dropped values are never read.
fn received_only(
    model: &NetworkModel,
    weights: &[f64],
    x_old: &[Level],
    x_new: &[Level],
    link: usize,
    observed: &[usize],
) -> crate::objective::ReceivedDifferentials {
    use crate::objective::local_objective;
    let delta = |j: usize| local_objective(model, weights, x_new, j) - local_objective(model, weights, x_old, j);
    crate::objective::ReceivedDifferentials {
        proposer: link,
        own: delta(link),
        received: observed.iter().map(|&j| (j, delta(j))).collect(),
    }
}

/// Configurations visited by a run, stored flat.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    links: usize,
    data: Vec<Level>,
}

impl Trajectory {
    pub fn new(links: usize) -> Self {
        Self { links, data: Vec::new() }
    }

    pub fn push(&mut self, x: &Configuration) {
        debug_assert_eq!(x.len(), self.links);
        self.data.extend_from_slice(x.levels());
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.links).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn links(&self) -> usize {
        self.links
    }

    pub fn get(&self, k: usize) -> &[Level] {
        &self.data[k * self.links..(k + 1) * self.links]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Level]> + '_ {
        self.data.chunks_exact(self.links.max(1))
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub algorithm: Algorithm,
    /// `x0` followed by the configuration after each slot.
    pub trajectory: Trajectory,
    /// Per-slot records when tracing was requested.
    pub records: Vec<SlotRecord>,
    pub accepted: u64,
}

/// Everything [`run`] needs besides the model.
#[derive(Clone, Debug)]
pub struct RunSpec<'a> {
    pub algorithm: Algorithm,
    pub weights: &'a WeightVector,
    pub bounds: Option<&'a BoundTable>,
    pub drop: &'a DropModel,
    pub schedule: CoolingSchedule,
    pub x0: Option<Configuration>,
    pub horizon: u64,
    pub seed: u64,
    pub trace: TraceLevel,
}

/// Validates algorithm-specific requirements before a run starts.
pub fn check_run_inputs(model: &NetworkModel, algorithm: Algorithm, weights: &WeightVector, bounds: Option<&BoundTable>) -> Result<()> {
    weights.check_len(model.links())?;
    if algorithm == Algorithm::Rsa {
        bounds
            .ok_or(Error::MissingBounds)?
            .covers(model.neighbor_sets(), model.num_levels())?;
    }
    Ok(())
}

/// Runs `horizon` slots from `x0` (all links at the lowest level by default).
pub fn run(model: &NetworkModel, spec: &RunSpec<'_>) -> Result<RunOutput> {
    check_run_inputs(model, spec.algorithm, spec.weights, spec.bounds)?;
    let x0 = spec.x0.clone().unwrap_or_else(|| Configuration::zeros(model.links()));
    let mut sim = Simulator::new(model, spec.drop, spec.algorithm, spec.schedule, x0, spec.seed)?;
    let mut ctx = StaticContext {
        weights: spec.weights,
        bounds: spec.bounds,
    };
    let mut trajectory = Trajectory::new(model.links());
    trajectory.push(sim.x());
    let mut records = Vec::new();
    let mut accepted = 0;
    for _ in 0..spec.horizon {
        let record = sim.step(&mut ctx)?;
        accepted += u64::from(record.accepted);
        trajectory.push(&record.state);
        if spec.trace == TraceLevel::Slots {
            records.push(record);
        }
    }
    Ok(RunOutput {
        algorithm: spec.algorithm,
        trajectory,
        records,
        accepted,
    })
}

/// Fraction of trajectory entries at each configuration.
pub fn occupancy_histogram(trajectory: &Trajectory) -> Result<BTreeMap<Configuration, f64>> {
    if trajectory.is_empty() {
        return Err(Error::InsufficientData { needed: 1, available: 0 });
    }
    let mut counts: BTreeMap<Configuration, u64> = BTreeMap::new();
    for x in trajectory.iter() {
        *counts.entry(Configuration::from(x)).or_insert(0) += 1;
    }
    let total = trajectory.len() as f64;
    Ok(counts.into_iter().map(|(x, c)| (x, c as f64 / total)).collect())
}

/// Hex bitmask over link indices (bit `j` set when `j` is present).
pub fn subset_mask_hex(members: &[usize]) -> String {
    let Some(&top) = members.iter().max() else {
        return "0".to_string();
    };
    let mut nibbles = vec![0u8; top / 4 + 1];
    for &j in members {
        nibbles[j / 4] |= 1 << (j % 4);
    }
    nibbles
        .iter()
        .rev()
        .map(|n| char::from_digit(u32::from(*n), 16).expect("nibble"))
        .collect()
}

/// One CSV row per slot: `t, proposer, from, to, observed, estimate,
/// accept_probability, accepted, objective`.
pub fn write_trace_csv<W: Write>(model: &NetworkModel, weights: &WeightVector, records: &[SlotRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t",
        "proposer",
        "from",
        "to",
        "observed",
        "estimate",
        "accept_probability",
        "accepted",
        "objective",
    ])?;
    for r in records {
        w.write_record([
            r.t.to_string(),
            r.proposer.to_string(),
            r.from.to_string(),
            r.to.to_string(),
            subset_mask_hex(&r.observed),
            r.estimate.map(|d| d.to_string()).unwrap_or_default(),
            r.accept_probability.to_string(),
            u8::from(r.accepted).to_string(),
            total_objective(model, weights.as_slice(), r.state.levels()).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

//! Queue-driven weights on top of the slot engine.
//!
//! Every link holds a backlog fed by a constant arrival rate and served at
//! its current capacity. Link weights are `ln(Q + 1)`. Queue lengths travel
//! in the same messages as the differentials, so a proposer only knows a
//! neighbor's backlog as of the last report that got through, and RSA
//! extrapolates it upward to keep its bounds sound.

use std::io::Write;

use crate::algorithms::{check_run_inputs, Algorithm, CoolingSchedule, DropModel, SlotContext, Simulator};
use crate::error::{Error, Result};
use crate::network::{Configuration, Level, NetworkModel};
use crate::objective::{total_objective, WeightVector};

/// `Q' = [Q + a − c]^+`, componentwise.
pub fn queue_step(queues: &[f64], arrivals: &[f64], rates: &[f64]) -> Vec<f64> {
    queues
        .iter()
        .zip(arrivals)
        .zip(rates)
        .map(|((q, a), c)| (q + a - c).max(0.0))
        .collect()
}

/// `W = ln(Q + 1)`.
pub fn local_weight(queue: f64) -> f64 {
    queue.ln_1p()
}

/// `ln(Q_last + a·k + 1)`: the queue can grow by at most `a` per slot.
///
/// For `k > 0` the extrapolated backlog is padded by `2(k+1)` relative
/// epsilons, enough to cover the rounding of `k` floating-point queue
/// updates, so the bound also holds for the simulated queues.
pub fn stale_weight_upper_bound(last_queue: f64, arrival: f64, elapsed: u64) -> f64 {
    if elapsed == 0 {
        return last_queue.ln_1p();
    }
    let k = elapsed as f64;
    let grown = (last_queue + arrival * k) * (1.0 + 2.0 * (k + 1.0) * f64::EPSILON);
    grown.ln_1p()
}

/// Backlogs, weights and every proposer's last report from each neighbor.
#[derive(Clone, Debug)]
pub struct QueueState {
    queues: Vec<f64>,
    weights: Vec<f64>,
    arrivals: Vec<f64>,
    c_max: Vec<f64>,
    /// `observed[i][k] = (Q_j, slot)` for the `k`-th neighbor `j` of `i`.
    observed: Vec<Vec<(f64, u64)>>,
    neighbors: Vec<Vec<usize>>,
    /// Slot index of the queue values currently held (`t − 1` during slot `t`).
    now: u64,
}

impl QueueState {
    /// Empty queues; every link knows that at slot 0.
    pub fn new(model: &NetworkModel, arrivals: Vec<f64>, c_max: Vec<f64>) -> Result<Self> {
        let n = model.links();
        for (what, v) in [("arrivals", &arrivals), ("c_max", &c_max)] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found: v.len(),
                });
            }
            if v.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
                return Err(Error::scenario(what, "values must be finite and >= 0"));
            }
        }
        let neighbors: Vec<Vec<usize>> = (0..n).map(|i| model.neighbors(i).to_vec()).collect();
        Ok(Self {
            queues: vec![0.0; n],
            weights: vec![0.0; n],
            arrivals,
            c_max,
            observed: neighbors.iter().map(|ns| vec![(0.0, 0); ns.len()]).collect(),
            neighbors,
            now: 0,
        })
    }

    pub fn queues(&self) -> &[f64] {
        &self.queues
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Ŵ` held by `observer` for its `k`-th neighbor.
    pub fn stale_bound(&self, observer: usize, k: usize) -> f64 {
        let j = self.neighbors[observer][k];
        let (q, at) = self.observed[observer][k];
        stale_weight_upper_bound(q, self.arrivals[j], self.now - at)
    }

    /// Checks `Ŵ_j ≥ W_j` for every observer and neighbor.
    pub fn check_soundness(&self) -> Result<()> {
        for (i, ns) in self.neighbors.iter().enumerate() {
            for (k, &j) in ns.iter().enumerate() {
                let bound = self.stale_bound(i, k);
                if bound < self.weights[j] {
                    return Err(Error::StaleBoundViolated {
                        t: self.now + 1,
                        observer: i,
                        neighbor: j,
                        bound,
                        actual: self.weights[j],
                    });
                }
            }
        }
        Ok(())
    }

    /// Serves and refills queues after the slot's configuration is fixed.
    pub fn advance(&mut self, rates: &[f64]) {
        self.queues = queue_step(&self.queues, &self.arrivals, rates);
        self.weights = self.queues.iter().map(|&q| local_weight(q)).collect();
        self.now += 1;
    }
}

impl SlotContext for QueueState {
    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn on_messages(&mut self, proposer: usize, received: &[usize]) {
        for (k, j) in self.neighbors[proposer].iter().enumerate() {
            if received.contains(j) {
                self.observed[proposer][k] = (self.queues[*j], self.now);
            }
        }
    }

    fn bound(&self, i: usize, j: usize, from: Level, to: Level) -> Result<f64> {
        let k = self.neighbors[i]
            .iter()
            .position(|&m| m == j)
            .ok_or(Error::MissingBound { i, j, from, to })?;
        Ok(if to > from {
            -self.stale_bound(i, k) * self.c_max[j]
        } else {
            0.0
        })
    }
}

#[derive(Clone, Debug)]
pub struct QueueSpec<'a> {
    pub algorithm: Algorithm,
    pub drop: &'a DropModel,
    pub schedule: CoolingSchedule,
    pub arrivals: Vec<f64>,
    /// Rate ceiling assumed for each link by the RSA bounds.
    pub c_max: Vec<f64>,
    pub horizon: u64,
    pub seed: u64,
}

/// What one slot of a queueing run left behind.
pub struct QueueSlot<'s> {
    pub t: u64,
    pub queues: &'s [f64],
    pub state: &'s Configuration,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueueSummary {
    pub algorithm: Algorithm,
    /// Mean backlog per link over the second half of the horizon.
    pub mean_queue: Vec<f64>,
    /// Link with the largest `mean_queue`.
    pub max_link: usize,
    pub accepted: u64,
}

impl QueueSummary {
    pub fn network_mean(&self) -> f64 {
        self.mean_queue.iter().sum::<f64>() / self.mean_queue.len().max(1) as f64
    }
}

/// Runs a queueing experiment, failing on the first unsound stale bound.
pub fn run_queueing(model: &NetworkModel, spec: &QueueSpec<'_>) -> Result<QueueSummary> {
    run_queueing_with(model, spec, |_| Ok(()))
}

/// As [`run_queueing`], calling `observe` after every slot.
pub fn run_queueing_with<F>(model: &NetworkModel, spec: &QueueSpec<'_>, mut observe: F) -> Result<QueueSummary>
where
    F: FnMut(&QueueSlot<'_>) -> Result<()>,
{
    let n = model.links();
    // Bounds come from the queue state, so only the weight length is checked.
    check_run_inputs(model, Algorithm::Bsa, &WeightVector::uniform(n, 0.0), None)?;
    let mut state = QueueState::new(model, spec.arrivals.clone(), spec.c_max.clone())?;
    let mut sim = Simulator::new(
        model,
        spec.drop,
        spec.algorithm,
        spec.schedule,
        Configuration::zeros(n),
        spec.seed,
    )?;
    let start = spec.horizon / 2;
    let mut sums = vec![0.0; n];
    let mut accepted = 0;
    for t in 1..=spec.horizon {
        let record = sim.step(&mut state)?;
        state.check_soundness()?;
        accepted += u64::from(record.accepted);
        let rates: Vec<f64> = (0..n).map(|i| model.rate(record.state.levels(), i)).collect();
        state.advance(&rates);
        if t > start {
            sums.iter_mut().zip(&state.queues).for_each(|(s, q)| *s += q);
        }
        observe(&QueueSlot {
            t,
            queues: &state.queues,
            state: &record.state,
            objective: total_objective(model, &state.weights, record.state.levels()),
        })?;
    }
    let window = (spec.horizon - start).max(1) as f64;
    let mean_queue: Vec<f64> = sums.iter().map(|s| s / window).collect();
    let max_link = mean_queue
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
        .0;
    Ok(QueueSummary {
        algorithm: spec.algorithm,
        mean_queue,
        max_link,
        accepted,
    })
}

/// Per-slot CSV: `t, q0..q{n-1}, state, objective`, where the objective is
/// evaluated with the post-slot weights.
pub fn write_queue_trace<W: Write>(model: &NetworkModel, spec: &QueueSpec<'_>, out: W) -> Result<QueueSummary> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((0..model.links()).map(|i| format!("q{i}")));
    header.extend(["state".to_string(), "objective".to_string()]);
    w.write_record(&header)?;
    let summary = run_queueing_with(model, spec, |slot| {
        let mut row = vec![slot.t.to_string()];
        row.extend(slot.queues.iter().map(f64::to_string));
        row.push(slot.state.to_string());
        row.push(slot.objective.to_string());
        w.write_record(&row)?;
        Ok(())
    })?;
    w.flush()?;
    Ok(summary)
}

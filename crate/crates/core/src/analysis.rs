//! Exact finite-state analysis of the annealing chains on small instances.
//!
//! Everything here enumerates the full configuration space, so it is meant
//! for desk-scale checks. Dense transition matrices are capped separately
//! from the state space because they are quadratic in it.

use std::collections::VecDeque;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rayon::prelude::*;

use crate::algorithms::{acceptance_probability, Algorithm, CoolingSchedule, DropModel, Simulator, StaticContext, SubsetLaw};
use crate::error::{Error, Result};
use crate::network::{Configuration, Level, NetworkModel};
use crate::objective::{aggregate, bounded_aggregate, differentials_unchecked, total_objective, BoundTable, WeightVector};

/// Largest configuration space enumerated by default.
pub const DEFAULT_STATE_CAP: usize = 1 << 20;
/// Largest state space for which a dense transition matrix is built.
pub const DEFAULT_MATRIX_CAP: usize = 4096;
/// Largest neighbor set whose subsets are enumerated.
pub const SUBSET_CAP: usize = 20;
/// Off-diagonal slack allowed by [`peskun_check`].
pub const PESKUN_TOLERANCE: f64 = 1e-12;

/// Mixed-radix indexing of `M^n`; link 0 is the most significant digit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateSpace {
    links: usize,
    levels: usize,
    size: usize,
}

impl StateSpace {
    pub fn new(links: usize, levels: usize, cap: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::SingleLevelAlphabet);
        }
        let size = (levels as u128).checked_pow(links as u32).unwrap_or(u128::MAX);
        if links > u32::MAX as usize || size > cap as u128 {
            return Err(Error::StateSpaceTooLarge { size, cap });
        }
        Ok(Self {
            links,
            levels,
            size: size as usize,
        })
    }

    pub fn for_model(model: &NetworkModel, cap: usize) -> Result<Self> {
        Self::new(model.links(), model.num_levels(), cap)
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn links(&self) -> usize {
        self.links
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn index(&self, x: &[Level]) -> usize {
        debug_assert_eq!(x.len(), self.links);
        x.iter().fold(0, |acc, &l| acc * self.levels + l as usize)
    }

    pub fn decode_into(&self, mut index: usize, out: &mut [Level]) {
        for slot in out.iter_mut().rev() {
            *slot = (index % self.levels) as Level;
            index /= self.levels;
        }
    }

    pub fn config(&self, index: usize) -> Configuration {
        let mut levels = vec![0; self.links];
        self.decode_into(index, &mut levels);
        Configuration::new(levels)
    }

    pub fn iter(&self) -> impl Iterator<Item = Configuration> + '_ {
        (0..self.size).map(|k| self.config(k))
    }

    fn check_matrix_cap(&self, cap: usize) -> Result<()> {
        if self.size > cap {
            return Err(Error::StateSpaceTooLarge {
                size: self.size as u128,
                cap,
            });
        }
        Ok(())
    }
}

/// A probability vector over a [`StateSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Parse("distribution entries must be finite and nonnegative".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Parse(format!("distribution sums to {total}")));
        }
        Ok(Self(probabilities))
    }

    pub fn uniform(size: usize) -> Self {
        Self(vec![1.0 / size as f64; size])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0[index]
    }

    /// Index of the largest entry; the first one on ties.
    pub fn argmax(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &p)| if p > best.1 { (k, p) } else { best })
            .0
    }

    /// `E_π[h]`.
    pub fn expectation(&self, h: &[f64]) -> f64 {
        self.0.iter().zip(h).map(|(p, v)| p * v).sum()
    }

    pub fn write_csv<W: Write>(&self, space: &StateSpace, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["state", "probability"])?;
        for (k, p) in self.0.iter().enumerate() {
            w.write_record([space.config(k).to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Dense row-stochastic matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix(DMatrix<f64>);

impl TransitionMatrix {
    /// Validates squareness, entries in `[0, 1]` and unit row sums.
    pub fn from_dense(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                what: "transition matrix columns",
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        for (r, row) in m.row_iter().enumerate() {
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Parse(format!("row {r} has an entry outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::Parse(format!("row {r} sums to {s}")));
            }
        }
        Ok(Self(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.0[(from, to)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.0
            .row_iter()
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Sparse listing: one row per positive entry.
    pub fn write_csv<W: Write>(&self, space: &StateSpace, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["from", "to", "probability"])?;
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                let v = self.0[(r, c)];
                if v > 0.0 {
                    w.write_record([space.config(r).to_string(), space.config(c).to_string(), v.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `f(x)` for every configuration.
pub fn objective_values(space: &StateSpace, model: &NetworkModel, weights: &WeightVector) -> Result<Vec<f64>> {
    check_space(space, model)?;
    weights.check_len(model.links())?;
    Ok((0..space.len())
        .into_par_iter()
        .map_init(
            || vec![0; space.links()],
            |x, k| {
                space.decode_into(k, x);
                total_objective(model, weights.as_slice(), x)
            },
        )
        .collect())
}

fn check_space(space: &StateSpace, model: &NetworkModel) -> Result<()> {
    if space.links() != model.links() || space.levels() != model.num_levels() {
        return Err(Error::DimensionMismatch {
            what: "state space links",
            expected: model.links(),
            found: space.links(),
        });
    }
    Ok(())
}

/// `π(x) ∝ e^{βf(x)}`, shifted by `max f` before exponentiating.
pub fn gibbs(space: &StateSpace, model: &NetworkModel, weights: &WeightVector, beta: f64) -> Result<Distribution> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidSchedule(format!("beta must be finite and >= 0, got {beta}")));
    }
    let f = objective_values(space, model, weights)?;
    let top = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = f.iter().map(|v| (beta * (v - top)).exp()).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= z);
    Ok(Distribution(p))
}

/// Configurations attaining `max f` (relative tolerance `1e-12`).
pub fn optimal_set(space: &StateSpace, model: &NetworkModel, weights: &WeightVector) -> Result<(Vec<usize>, f64)> {
    let f = objective_values(space, model, weights)?;
    let top = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * top.abs().max(1.0);
    Ok(((0..f.len()).filter(|&k| f[k] >= top - tol).collect(), top))
}

/// Per-move acceptance factor, given the proposer, its move and the exact
/// differentials.
type MoveFactor<'a> = dyn Fn(usize, Level, Level, &crate::objective::Differentials) -> Result<f64> + Sync + 'a;

fn build_matrix(space: &StateSpace, model: &NetworkModel, weights: &WeightVector, matrix_cap: usize, factor: &MoveFactor<'_>) -> Result<TransitionMatrix> {
    check_space(space, model)?;
    space.check_matrix_cap(matrix_cap)?;
    weights.check_len(model.links())?;
    if !model.is_neighbor_local() {
        return Err(Error::FullInterference);
    }
    let levels = space.levels();
    let c = 1.0 / (space.links() * (levels - 1)) as f64;
    let rows: Vec<Vec<(usize, f64)>> = (0..space.len())
        .into_par_iter()
        .map(|s| {
            let mut x = vec![0; space.links()];
            space.decode_into(s, &mut x);
            let mut row = Vec::with_capacity(space.links() * (levels - 1));
            for i in 0..space.links() {
                let from = x[i];
                for to in (0..levels as Level).filter(|&l| l != from) {
                    let mut y = x.clone();
                    y[i] = to;
                    let d = differentials_unchecked(model, weights.as_slice(), &x, &y, i);
                    row.push((space.index(&y), c * factor(i, from, to, &d)?));
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let n = space.len();
    let mut m = DMatrix::zeros(n, n);
    for (s, row) in rows.into_iter().enumerate() {
        let mut off = 0.0;
        for (t, v) in row {
            m[(s, t)] = v;
            off += v;
        }
        m[(s, s)] = (1.0 - off).max(0.0);
    }
    Ok(TransitionMatrix(m))
}

/// `P^B(x,x') = c(x,x') e^{−β[−Δ(x,x')]^+}`.
pub fn matrix_bsa(space: &StateSpace, model: &NetworkModel, weights: &WeightVector, beta: f64, matrix_cap: usize) -> Result<TransitionMatrix> {
    build_matrix(space, model, weights, matrix_cap, &|_, _, _, d| Ok(acceptance_probability(aggregate(d), beta)))
}

/// `P^L(x,x') = c(x,x') q_{i,N_i} e^{−β[−Δ(x,x')]^+}`.
pub fn matrix_lsa(
    space: &StateSpace,
    model: &NetworkModel,
    weights: &WeightVector,
    beta: f64,
    drop: &DropModel,
    matrix_cap: usize,
) -> Result<TransitionMatrix> {
    let full: Vec<f64> = (0..model.links())
        .map(|i| drop.full_set_probability(i, model.neighbors(i)))
        .collect();
    build_matrix(space, model, weights, matrix_cap, &|i, _, _, d| {
        Ok(full[i] * acceptance_probability(aggregate(d), beta))
    })
}

/// `P^R(x,x') = c(x,x') Σ_S q_{i,S} e^{−β[−Δ_[S](x,x')]^+}`.
pub fn matrix_rsa(
    space: &StateSpace,
    model: &NetworkModel,
    weights: &WeightVector,
    bounds: &BoundTable,
    beta: f64,
    drop: &DropModel,
    matrix_cap: usize,
) -> Result<TransitionMatrix> {
    bounds.covers(model.neighbor_sets(), model.num_levels())?;
    let laws = subset_laws(model, drop)?;
    build_matrix(space, model, weights, matrix_cap, &|i, from, to, d| {
        let neighbors = model.neighbors(i);
        let mut total = 0.0;
        for (received, q) in &laws[i] {
            let estimate = bounded_aggregate(&d.restrict(received), neighbors, bounds, from, to)?;
            total += q * acceptance_probability(estimate, beta);
        }
        Ok(total)
    })
}

/// Received-subset law per link, with subsets as neighbor lists.
fn subset_laws(model: &NetworkModel, drop: &DropModel) -> Result<SubsetLaw> {
    (0..model.links())
        .map(|i| {
            let neighbors = model.neighbors(i);
            Ok(drop
                .subset_law(i, neighbors, SUBSET_CAP)?
                .into_iter()
                .map(|(mask, q)| (mask_members(neighbors, mask), q))
                .collect())
        })
        .collect()
}

fn mask_members(neighbors: &[usize], mask: u64) -> Vec<usize> {
    neighbors
        .iter()
        .enumerate()
        .filter(|(k, _)| mask >> k & 1 == 1)
        .map(|(_, &j)| j)
        .collect()
}

/// Transition matrix of one algorithm.
#[allow(clippy::too_many_arguments)]
pub fn matrix_for(
    algorithm: Algorithm,
    space: &StateSpace,
    model: &NetworkModel,
    weights: &WeightVector,
    bounds: Option<&BoundTable>,
    beta: f64,
    drop: &DropModel,
    matrix_cap: usize,
) -> Result<TransitionMatrix> {
    match algorithm {
        Algorithm::Bsa => matrix_bsa(space, model, weights, beta, matrix_cap),
        Algorithm::Lsa => matrix_lsa(space, model, weights, beta, drop, matrix_cap),
        Algorithm::Rsa => matrix_rsa(space, model, weights, bounds.ok_or(Error::MissingBounds)?, beta, drop, matrix_cap),
    }
}

fn bfs(n: usize, start: usize, next: impl Fn(usize) -> Vec<usize>) -> Vec<Option<usize>> {
    let mut level = vec![None; n];
    level[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        let lu = level[u].expect("queued states are labelled");
        for v in next(u) {
            if level[v].is_none() {
                level[v] = Some(lu + 1);
                queue.push_back(v);
            }
        }
    }
    level
}

fn successors(p: &TransitionMatrix, u: usize) -> Vec<usize> {
    (0..p.dim()).filter(|&v| p.0[(u, v)] > 0.0).collect()
}

/// Fails with [`Error::Reducible`] unless every state reaches every other
/// through positive entries.
pub fn check_irreducible(p: &TransitionMatrix) -> Result<()> {
    let n = p.dim();
    if n == 0 {
        return Ok(());
    }
    let forward = bfs(n, 0, |u| successors(p, u));
    if let Some(to) = forward.iter().position(Option::is_none) {
        return Err(Error::Reducible { from: 0, to });
    }
    let backward = bfs(n, 0, |u| (0..n).filter(|&v| p.0[(v, u)] > 0.0).collect());
    if let Some(from) = backward.iter().position(Option::is_none) {
        return Err(Error::Reducible { from, to: 0 });
    }
    Ok(())
}

/// Period of an irreducible chain (1 means aperiodic).
pub fn period(p: &TransitionMatrix) -> Result<usize> {
    check_irreducible(p)?;
    let n = p.dim();
    if n == 0 || (0..n).any(|k| p.0[(k, k)] > 0.0) {
        return Ok(1);
    }
    let level = bfs(n, 0, |u| successors(p, u));
    let mut g = 0usize;
    for u in 0..n {
        let lu = level[u].expect("irreducible");
        for v in successors(p, u) {
            let lv = level[v].expect("irreducible");
            g = gcd(g, (lu + 1).abs_diff(lv));
        }
    }
    Ok(g.max(1))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Solves `πP = π`, `Σπ = 1` for an irreducible chain.
pub fn stationary(p: &TransitionMatrix) -> Result<Distribution> {
    check_irreducible(p)?;
    let n = p.dim();
    let mut a = p.0.transpose() - DMatrix::<f64>::identity(n, n);
    for c in 0..n {
        a[(n - 1, c)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let solution = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Parse("singular stationary system".into()))?;
    let mut pi: Vec<f64> = solution.iter().map(|v| v.max(0.0)).collect();
    let z: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= z);
    Ok(Distribution(pi))
}

/// `max |πP − π|`.
pub fn stationarity_residual(p: &TransitionMatrix, pi: &Distribution) -> f64 {
    let row = DVector::from_column_slice(pi.probabilities()).transpose() * &p.0;
    row.iter()
        .zip(pi.probabilities())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// `max_{x,x'} |π(x)P(x,x') − π(x')P(x',x)|`.
pub fn detailed_balance_violation(p: &TransitionMatrix, pi: &Distribution) -> f64 {
    let n = p.dim();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in r + 1..n {
            let v = (pi.0[r] * p.0[(r, c)] - pi.0[c] * p.0[(c, r)]).abs();
            worst = worst.max(v);
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeskunReport {
    pub holds: bool,
    /// Largest `P_low(x,x') − P_high(x,x')` off the diagonal (≤ 0 when the
    /// ordering is strict everywhere).
    pub max_violation: f64,
    pub witness: Option<(usize, usize)>,
}

/// Whether `P_low(x,x') ≤ P_high(x,x') + 1e−12` for every `x ≠ x'`.
pub fn peskun_check(low: &TransitionMatrix, high: &TransitionMatrix) -> Result<PeskunReport> {
    if low.dim() != high.dim() {
        return Err(Error::DimensionMismatch {
            what: "transition matrix",
            expected: low.dim(),
            found: high.dim(),
        });
    }
    let mut worst = f64::NEG_INFINITY;
    let mut at = None;
    for r in 0..low.dim() {
        for c in (0..low.dim()).filter(|&c| c != r) {
            let v = low.0[(r, c)] - high.0[(r, c)];
            if v > worst {
                worst = v;
                at = Some((r, c));
            }
        }
    }
    let holds = worst <= PESKUN_TOLERANCE;
    Ok(PeskunReport {
        holds,
        max_violation: if at.is_some() { worst } else { 0.0 },
        witness: if holds { None } else { at },
    })
}

/// `½ Σ |d1 − d2|`.
pub fn tv_distance(d1: &Distribution, d2: &Distribution) -> Result<f64> {
    if d1.len() != d2.len() {
        return Err(Error::DimensionMismatch {
            what: "distribution",
            expected: d1.len(),
            found: d2.len(),
        });
    }
    Ok(0.5 * d1.0.iter().zip(&d2.0).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Asymptotic variance rate `lim t·Var(μ̂_t(h))` for an ergodic chain.
///
/// With `h̄ = h − π(h)` and `g` solving `(I − P + 1π^T) g = h̄`,
/// `σ = 2⟨h̄, g⟩_π − ⟨h̄, h̄⟩_π`.
pub fn exact_avr(p: &TransitionMatrix, pi: &Distribution, h: &[f64]) -> Result<f64> {
    let n = p.dim();
    if pi.len() != n || h.len() != n {
        return Err(Error::DimensionMismatch {
            what: "variance-rate inputs",
            expected: n,
            found: if pi.len() != n { pi.len() } else { h.len() },
        });
    }
    match period(p)? {
        1 => {}
        d => return Err(Error::Periodic(d)),
    }
    let mean = pi.expectation(h);
    let centered = DVector::from_iterator(n, h.iter().map(|v| v - mean));
    let pi_row = DVector::from_column_slice(pi.probabilities());
    let mut a = DMatrix::<f64>::identity(n, n) - &p.0;
    for r in 0..n {
        for c in 0..n {
            a[(r, c)] += pi_row[c];
        }
    }
    let g = a
        .lu()
        .solve(&centered)
        .ok_or_else(|| Error::Parse("singular fundamental system".into()))?;
    let cross: f64 = (0..n).map(|k| pi_row[k] * centered[k] * g[k]).sum();
    let var: f64 = (0..n).map(|k| pi_row[k] * centered[k] * centered[k]).sum();
    Ok((2.0 * cross - var).max(0.0))
}

/// Minimum number of batches per scale in [`batch_means_variance_rate`].
pub const MIN_BATCHES: usize = 30;

/// `b · Var(batch means)` for each batch size `b`.
pub fn batch_means_variance_rate(series: &[f64], batch_sizes: &[usize]) -> Result<Vec<(usize, f64)>> {
    batch_sizes
        .iter()
        .map(|&b| {
            let b = b.max(1);
            let batches = series.len() / b;
            if batches < MIN_BATCHES {
                return Err(Error::InsufficientData {
                    needed: b * MIN_BATCHES,
                    available: series.len(),
                });
            }
            let means: Vec<f64> = series
                .chunks_exact(b)
                .take(batches)
                .map(|c| c.iter().sum::<f64>() / b as f64)
                .collect();
            let m = means.iter().sum::<f64>() / batches as f64;
            let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
            Ok((b, b as f64 * var))
        })
        .collect()
}

/// Empirical variance-rate curve of `h` along a trajectory.
pub fn empirical_avr<F>(trajectory: &crate::algorithms::Trajectory, h: F, batch_sizes: &[usize]) -> Result<Vec<(usize, f64)>>
where
    F: Fn(&[Level]) -> f64,
{
    let series: Vec<f64> = trajectory.iter().map(h).collect();
    batch_means_variance_rate(&series, batch_sizes)
}

/// A transition and subset where the bounded estimate misbehaved.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentWitness {
    pub state: Configuration,
    pub link: usize,
    pub to: Level,
    pub received: Vec<usize>,
    pub bounded: f64,
    pub exact: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExponentReport {
    pub transitions: usize,
    pub subsets: usize,
    /// Subsets with `Δ_[S] > Δ`.
    pub violations: usize,
    /// Transitions where `Δ_[N_i] ≠ Δ`.
    pub equality_failures: usize,
    pub max_excess: f64,
    pub witness: Option<ExponentWitness>,
}

impl ExponentReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.equality_failures == 0
    }
}

/// Checks `Δ_[S](x,x') ≤ Δ(x,x')` for every single-coordinate move and every
/// received subset, with equality when nothing is lost.
pub fn exponent_check(space: &StateSpace, model: &NetworkModel, weights: &WeightVector, bounds: &dyn crate::objective::BoundSource) -> Result<ExponentReport> {
    check_space(space, model)?;
    weights.check_len(model.links())?;
    if !model.is_neighbor_local() {
        return Err(Error::FullInterference);
    }
    for i in 0..model.links() {
        let size = model.neighbors(i).len();
        if size > SUBSET_CAP {
            return Err(Error::SubsetCapExceeded { link: i, size, cap: SUBSET_CAP });
        }
    }
    let mut report = ExponentReport::default();
    let mut x = vec![0; space.links()];
    for s in 0..space.len() {
        space.decode_into(s, &mut x);
        for i in 0..space.links() {
            let from = x[i];
            let neighbors = model.neighbors(i);
            for to in (0..space.levels() as Level).filter(|&l| l != from) {
                let mut y = x.clone();
                y[i] = to;
                let d = differentials_unchecked(model, weights.as_slice(), &x, &y, i);
                let exact = aggregate(&d);
                report.transitions += 1;
                let full_mask = (1u64 << neighbors.len()) - 1;
                for mask in 0..=full_mask {
                    let received = mask_members(neighbors, mask);
                    let bounded = bounded_aggregate(&d.restrict(&received), neighbors, bounds, from, to)?;
                    report.subsets += 1;
                    let excess = bounded - exact;
                    let bad = if mask == full_mask {
                        let mismatch = bounded.to_bits() != exact.to_bits();
                        report.equality_failures += usize::from(mismatch);
                        mismatch
                    } else {
                        let over = bounded > exact;
                        report.violations += usize::from(over);
                        over
                    };
                    if bad && (report.witness.is_none() || excess > report.max_excess) {
                        report.max_excess = report.max_excess.max(excess);
                        report.witness = Some(ExponentWitness {
                            state: Configuration::from(x.as_slice()),
                            link: i,
                            to,
                            received,
                            bounded,
                            exact,
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Sufficient cooling constant `2 Σ V(x,x')` over every single-coordinate
/// move, with `V(x,x') = [f(x) − f(x')]^+` the objective loss of the move.
pub fn cooling_constant_bound(space: &StateSpace, model: &NetworkModel, weights: &WeightVector) -> Result<f64> {
    let f = objective_values(space, model, weights)?;
    let mut total = 0.0;
    let mut x = vec![0; space.links()];
    for s in 0..space.len() {
        space.decode_into(s, &mut x);
        for i in 0..space.links() {
            let from = x[i];
            for to in (0..space.levels() as Level).filter(|&l| l != from) {
                x[i] = to;
                total += (f[s] - f[space.index(&x)]).max(0.0);
            }
            x[i] = from;
        }
    }
    Ok(2.0 * total)
}

/// Critical depth `d*`: over every state that is not a global maximum, the
/// least objective descent needed to reach a strictly better state through
/// single-coordinate moves. Inverse-log cooling `β(t) = ln t / d` with
/// `d ≥ d*` drives the chain to the optimal set.
pub fn critical_depth(space: &StateSpace, model: &NetworkModel, weights: &WeightVector) -> Result<f64> {
    use std::cmp::Ordering;
    use std::collections::BinaryHeap;

    struct Entry(f64, usize);
    impl PartialEq for Entry {
        fn eq(&self, other: &Self) -> bool {
            self.cmp(other) == Ordering::Equal
        }
    }
    impl Eq for Entry {}
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> Ordering {
            self.0.total_cmp(&other.0).then(other.1.cmp(&self.1))
        }
    }

    let f = objective_values(space, model, weights)?;
    let f_max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let neighbors = |s: usize, out: &mut Vec<usize>| {
        out.clear();
        let mut x = vec![0; space.links()];
        space.decode_into(s, &mut x);
        for i in 0..space.links() {
            let from = x[i];
            for to in (0..space.levels() as Level).filter(|&l| l != from) {
                x[i] = to;
                out.push(space.index(&x));
            }
            x[i] = from;
        }
    };
    let mut next = Vec::new();
    let mut depth: f64 = 0.0;
    for start in 0..space.len() {
        if f[start] >= f_max {
            continue;
        }
        neighbors(start, &mut next);
        if next.iter().any(|&y| f[y] > f[start]) {
            continue;
        }
        // Widest-path search: the best reachable floor on the way to any
        // strictly better state.
        let mut floor = vec![f64::NEG_INFINITY; space.len()];
        floor[start] = f[start];
        let mut heap = BinaryHeap::from([Entry(f[start], start)]);
        let mut best = f64::NEG_INFINITY;
        while let Some(Entry(level, s)) = heap.pop() {
            if level < floor[s] || level <= best {
                continue;
            }
            if f[s] > f[start] {
                best = level;
                break;
            }
            neighbors(s, &mut next);
            for &y in &next {
                let l = level.min(f[y]);
                if l > floor[y] {
                    floor[y] = l;
                    heap.push(Entry(l, y));
                }
            }
        }
        depth = depth.max(f[start] - best);
    }
    Ok(depth)
}

/// Inputs shared by every seed of an annealing-occupancy experiment.
#[derive(Clone, Debug)]
pub struct AnnealingSpec<'a> {
    pub algorithm: Algorithm,
    pub weights: &'a WeightVector,
    pub bounds: Option<&'a BoundTable>,
    pub drop: &'a DropModel,
    pub schedule: CoolingSchedule,
    pub horizon: u64,
    pub seeds: &'a [u64],
    /// Slots at which the running occupancy is recorded (sorted, ≤ horizon).
    pub checkpoints: &'a [u64],
    /// Start state; `None` draws it uniformly per seed.
    pub x0: Option<Configuration>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnealingCurve {
    pub checkpoints: Vec<u64>,
    /// Seed-averaged `(1/t) Σ_{s≤t} 1{X(s) ∈ X*}` at each checkpoint.
    pub mean: Vec<f64>,
    /// Same quantity per seed, `per_seed[seed][checkpoint]`.
    pub per_seed: Vec<Vec<f64>>,
}

/// Running occupancy of the optimizer set under a cooling schedule.
pub fn annealing_occupancy(model: &NetworkModel, spec: &AnnealingSpec<'_>, state_cap: usize) -> Result<AnnealingCurve> {
    use rand::Rng;

    crate::algorithms::check_run_inputs(model, spec.algorithm, spec.weights, spec.bounds)?;
    let space = StateSpace::for_model(model, state_cap)?;
    let (optimal, _) = optimal_set(&space, model, spec.weights)?;
    let mut is_opt = vec![false; space.len()];
    optimal.iter().for_each(|&k| is_opt[k] = true);
    let mut checkpoints = spec.checkpoints.to_vec();
    checkpoints.retain(|&t| t >= 1 && t <= spec.horizon);
    checkpoints.sort_unstable();
    checkpoints.dedup();
    if checkpoints.last() != Some(&spec.horizon) && spec.horizon > 0 {
        checkpoints.push(spec.horizon);
    }

    let per_seed: Vec<Vec<f64>> = spec
        .seeds
        .par_iter()
        .map(|&seed| {
            let x0 = match &spec.x0 {
                Some(x) => x.clone(),
                None => {
                    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(4);
                    space.config(rng.gen_range(0..space.len()))
                }
            };
            let mut sim = Simulator::new(model, spec.drop, spec.algorithm, spec.schedule, x0, seed)?;
            let mut ctx = StaticContext {
                weights: spec.weights,
                bounds: spec.bounds,
            };
            let mut hits = 0u64;
            let mut out = Vec::with_capacity(checkpoints.len());
            let mut next = checkpoints.iter().peekable();
            for t in 1..=spec.horizon {
                let record = sim.step(&mut ctx)?;
                hits += u64::from(is_opt[space.index(record.state.levels())]);
                if next.peek() == Some(&&t) {
                    out.push(hits as f64 / t as f64);
                    next.next();
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mean = (0..checkpoints.len())
        .map(|k| per_seed.iter().map(|s| s[k]).sum::<f64>() / per_seed.len().max(1) as f64)
        .collect();
    Ok(AnnealingCurve {
        checkpoints,
        mean,
        per_seed,
    })
}

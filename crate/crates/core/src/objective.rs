//! Per-link objectives `f_i = w_i c_i`, their single-coordinate
//! differentials, and the lower-bound tables that let a proposer stand in for
//! neighbor reports it never received.
//!
//! Everything here maximizes: a transition with aggregate differential `Δ`
//! is accepted with probability `min(1, e^{βΔ})`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Configuration, Level, NetworkModel, NeighborSets};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfiguration(
                "weights must be finite and nonnegative".into(),
            ));
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize, w: f64) -> Self {
        Self(vec![w; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, link: usize) -> f64 {
        self.0[link]
    }

    pub(crate) fn check_len(&self, links: usize) -> Result<()> {
        if self.0.len() != links {
            return Err(Error::DimensionMismatch {
                what: "weights",
                expected: links,
                found: self.0.len(),
            });
        }
        Ok(())
    }
}

/// `w_i · c_i(x)`.
pub fn local_objective(model: &NetworkModel, weights: &[f64], x: &[Level], link: usize) -> f64 {
    weights[link] * model.rate(x, link)
}

/// `f(x) = Σ_i f_i(x)`.
pub fn total_objective(model: &NetworkModel, weights: &[f64], x: &[Level]) -> f64 {
    (0..model.links())
        .map(|i| local_objective(model, weights, x, i))
        .sum()
}

/// Local objective changes seen by the proposer and its neighbors.
#[derive(Clone, Debug, PartialEq)]
pub struct Differentials {
    pub proposer: usize,
    /// `Δ_i`, measured by the proposer itself.
    pub own: f64,
    /// `(j, Δ_j)` for every `j ∈ N_i`, in neighbor-set order.
    pub neighbors: Vec<(usize, f64)>,
}

impl Differentials {
    /// The part a proposer actually holds after hearing only from `received`.
    pub fn restrict(&self, received: &[usize]) -> ReceivedDifferentials {
        ReceivedDifferentials {
            proposer: self.proposer,
            own: self.own,
            received: self
                .neighbors
                .iter()
                .filter(|(j, _)| received.contains(j))
                .copied()
                .collect(),
        }
    }
}

/// Differentials available at the proposer after a lossy messaging phase.
#[derive(Clone, Debug, PartialEq)]
pub struct ReceivedDifferentials {
    pub proposer: usize,
    pub own: f64,
    pub received: Vec<(usize, f64)>,
}

impl ReceivedDifferentials {
    fn lookup(&self, j: usize) -> Option<f64> {
        self.received.iter().find(|(k, _)| *k == j).map(|(_, d)| *d)
    }
}

/// Which coordinate changed between two configurations, if at most one did.
pub(crate) fn changed_link(model: &NetworkModel, x_old: &Configuration, x_new: &Configuration, link: usize) -> Result<()> {
    model.validate_configuration(x_old)?;
    model.validate_configuration(x_new)?;
    if link >= model.links() {
        return Err(Error::InvalidConfiguration(format!("no link {link}")));
    }
    let others: Vec<usize> = (0..model.links())
        .filter(|&k| k != link && x_old.get(k) != x_new.get(k))
        .collect();
    if !others.is_empty() {
        return Err(Error::NotSingleCoordinate { link, others });
    }
    Ok(())
}

/// `Δ_j = f_j(x_new) − f_j(x_old)` for `j ∈ N_i ∪ {i}`.
pub fn differentials(
    model: &NetworkModel,
    weights: &WeightVector,
    x_old: &Configuration,
    x_new: &Configuration,
    link: usize,
) -> Result<Differentials> {
    weights.check_len(model.links())?;
    changed_link(model, x_old, x_new, link)?;
    Ok(differentials_unchecked(model, weights.as_slice(), x_old.levels(), x_new.levels(), link))
}

pub(crate) fn differentials_unchecked(model: &NetworkModel, weights: &[f64], x_old: &[Level], x_new: &[Level], link: usize) -> Differentials {
    let delta = |j: usize| local_objective(model, weights, x_new, j) - local_objective(model, weights, x_old, j);
    Differentials {
        proposer: link,
        own: delta(link),
        neighbors: model.neighbors(link).iter().map(|&j| (j, delta(j))).collect(),
    }
}

/// `Δ = Δ_i + Σ_{j∈N_i} Δ_j`.
pub fn aggregate(d: &Differentials) -> f64 {
    d.neighbors.iter().fold(d.own, |acc, (_, v)| acc + v)
}

/// Source of `b^{ij}_{from,to}` lower bounds.
pub trait BoundSource {
    fn bound(&self, i: usize, j: usize, from: Level, to: Level) -> Result<f64>;
}

/// `Δ_[S] = Δ_i + Σ_{j∈S} Δ_j + Σ_{j∈N_i∖S} b^{ij}_{from,to}`.
///
/// Summation runs in neighbor-set order, so with `S = N_i` the result is
/// bit-identical to [`aggregate`].
pub fn bounded_aggregate(
    received: &ReceivedDifferentials,
    neighbors: &[usize],
    bounds: &dyn BoundSource,
    from: Level,
    to: Level,
) -> Result<f64> {
    let i = received.proposer;
    let mut total = received.own;
    for &j in neighbors {
        total += match received.lookup(j) {
            Some(d) => d,
            None => bounds.bound(i, j, from, to)?,
        };
    }
    Ok(total)
}

/// Dense table of `b^{ij}_{from,to}` for every `j ∈ N_i`.
///
/// Entries default to `−∞` (no known bound) off the diagonal and `0` on it.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundTable {
    levels: usize,
    rows: Vec<BTreeMap<usize, Vec<f64>>>,
}

impl BoundTable {
    /// Every `(i, j)` pair of `neighbors` present, with no known bounds.
    pub fn unbounded(neighbors: &NeighborSets, levels: usize) -> Self {
        let blank = Self::blank(levels);
        Self {
            levels,
            rows: (0..neighbors.len())
                .map(|i| neighbors.of(i).iter().map(|&j| (j, blank.clone())).collect())
                .collect(),
        }
    }

    fn blank(levels: usize) -> Vec<f64> {
        let mut cells = vec![f64::NEG_INFINITY; levels * levels];
        for a in 0..levels {
            cells[a * levels + a] = 0.0;
        }
        cells
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn links(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize, from: Level, to: Level) -> Result<f64> {
        let (f, t) = (usize::from(from), usize::from(to));
        self.rows
            .get(i)
            .and_then(|row| row.get(&j))
            .filter(|_| f < self.levels && t < self.levels)
            .map(|cells| cells[f * self.levels + t])
            .ok_or(Error::MissingBound { i, j, from, to })
    }

    /// Overrides one entry. Diagonal entries are fixed at zero.
    pub fn set(&mut self, i: usize, j: usize, from: Level, to: Level, value: f64) -> Result<()> {
        let invalid = |reason| Error::InvalidBound {
            i,
            j,
            from,
            to,
            value,
            reason,
        };
        if value.is_nan() || value == f64::INFINITY {
            return Err(invalid("bounds must be finite or -inf"));
        }
        if from == to && value != 0.0 {
            return Err(invalid("a non-move has zero differential"));
        }
        let levels = self.levels;
        let (f, t) = (usize::from(from), usize::from(to));
        let cells = self
            .rows
            .get_mut(i)
            .and_then(|row| row.get_mut(&j))
            .filter(|_| f < levels && t < levels)
            .ok_or(Error::MissingBound { i, j, from, to })?;
        cells[f * levels + t] = value;
        Ok(())
    }

    /// Checks that every neighbor pair of `neighbors` has an entry.
    pub fn covers(&self, neighbors: &NeighborSets, levels: usize) -> Result<()> {
        if self.rows.len() != neighbors.len() {
            return Err(Error::DimensionMismatch {
                what: "bound table links",
                expected: neighbors.len(),
                found: self.rows.len(),
            });
        }
        if self.levels != levels {
            return Err(Error::DimensionMismatch {
                what: "bound table levels",
                expected: levels,
                found: self.levels,
            });
        }
        for i in 0..neighbors.len() {
            if let Some(&j) = neighbors.of(i).iter().find(|j| !self.rows[i].contains_key(j)) {
                return Err(Error::MissingBound { i, j, from: 0, to: 0 });
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        let mut entries = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            for (&j, cells) in row {
                for from in 0..self.levels {
                    for to in (0..self.levels).filter(|t| *t != from) {
                        entries.push(BoundEntry {
                            i,
                            j,
                            from: from as Level,
                            to: to as Level,
                            bound: cells[from * self.levels + to],
                        });
                    }
                }
            }
        }
        let doc = BoundTableDoc {
            links: self.rows.len(),
            levels: self.levels,
            entry: entries,
        };
        toml::to_string(&doc).expect("bound table serializes")
    }

    /// Parses a table written by [`BoundTable::to_toml`]. Listed `(i, j)`
    /// pairs get rows; unlisted transitions of a listed pair default to `−∞`.
    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: BoundTableDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if !(2..=usize::from(Level::MAX) + 1).contains(&doc.levels) {
            return Err(Error::Parse(format!("unsupported level count {}", doc.levels)));
        }
        if doc.links > 1 << 16 {
            return Err(Error::Parse(format!("unsupported link count {}", doc.links)));
        }
        let mut table = Self {
            levels: doc.levels,
            rows: vec![BTreeMap::new(); doc.links],
        };
        for e in &doc.entry {
            if e.i >= doc.links || e.j >= doc.links || e.i == e.j {
                return Err(Error::Parse(format!("entry ({}, {}) is not a valid link pair", e.i, e.j)));
            }
            let blank = Self::blank(doc.levels);
            table.rows[e.i].entry(e.j).or_insert(blank);
            table.set(e.i, e.j, e.from, e.to, e.bound)?;
        }
        Ok(table)
    }
}

impl BoundSource for BoundTable {
    fn bound(&self, i: usize, j: usize, from: Level, to: Level) -> Result<f64> {
        self.get(i, j, from, to)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BoundTableDoc {
    links: usize,
    levels: usize,
    #[serde(default)]
    entry: Vec<BoundEntry>,
}

/// One `b^{ij}_{from,to}` value, as it appears in bound files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub i: usize,
    pub j: usize,
    pub from: Level,
    pub to: Level,
    pub bound: f64,
}

/// `b^{ij}_{a,a'} = −w_j c_j^max` when `a' > a`, else `0`.
///
/// Sound whenever raising a link's power can only lower its neighbors' rates,
/// which holds for SINR capacity.
pub fn trivial_bounds_sinr(neighbors: &NeighborSets, weights: &WeightVector, c_max: &[f64], levels: usize) -> Result<BoundTable> {
    weights.check_len(neighbors.len())?;
    if c_max.len() != neighbors.len() {
        return Err(Error::DimensionMismatch {
            what: "c_max",
            expected: neighbors.len(),
            found: c_max.len(),
        });
    }
    let mut table = BoundTable::unbounded(neighbors, levels);
    for i in 0..neighbors.len() {
        for &j in neighbors.of(i) {
            let worst = -weights.get(j) * c_max[j];
            for from in 0..levels {
                for to in (0..levels).filter(|t| *t != from) {
                    let b = if to > from { worst } else { 0.0 };
                    table.set(i, j, from as Level, to as Level, b)?;
                }
            }
        }
    }
    Ok(table)
}

/// Conflict-graph bounds: activating costs a neighbor at most `w_j`,
/// deactivating never hurts.
pub fn conflict_bounds(neighbors: &NeighborSets, weights: &WeightVector, levels: usize) -> Result<BoundTable> {
    if levels != 2 {
        return Err(Error::InvalidAlphabet(format!(
            "conflict bounds need a binary alphabet, got {levels} levels"
        )));
    }
    trivial_bounds_sinr(neighbors, weights, &vec![1.0; neighbors.len()], 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::four_node;

    fn x(v: &[u8]) -> Configuration {
        Configuration::new(v.to_vec())
    }

    #[test]
    fn local_objective_of_optimum() {
        let (model, w) = four_node();
        let cfg = x(&[1, 1, 0, 1]);
        assert_eq!(local_objective(&model, w.as_slice(), cfg.levels(), 1), 7.0);
        assert_eq!(local_objective(&model, w.as_slice(), cfg.levels(), 2), 0.0);
        assert_eq!(total_objective(&model, w.as_slice(), cfg.levels()), 15.0);
    }

    #[test]
    fn activating_c_differentials() {
        let (model, w) = four_node();
        let d = differentials(&model, &w, &x(&[1, 1, 0, 0]), &x(&[1, 1, 1, 0]), 2).unwrap();
        assert_eq!(d.own, 0.0);
        assert_eq!(d.neighbors, vec![(0, -5.0), (1, -7.0), (3, 0.0)]);
        assert_eq!(aggregate(&d), -12.0);

        let back = differentials(&model, &w, &x(&[1, 1, 1, 0]), &x(&[1, 1, 0, 0]), 2).unwrap();
        assert_eq!(aggregate(&back), 12.0);
        assert_eq!(back.own, -d.own);
        for ((_, a), (_, b)) in d.neighbors.iter().zip(&back.neighbors) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn no_change_means_zero() {
        let (model, w) = four_node();
        let d = differentials(&model, &w, &x(&[1, 0, 0, 1]), &x(&[1, 0, 0, 1]), 0).unwrap();
        assert_eq!(aggregate(&d), 0.0);
    }

    #[test]
    fn two_coordinates_changed_is_an_error() {
        let (model, w) = four_node();
        let err = differentials(&model, &w, &x(&[0, 0, 0, 0]), &x(&[1, 1, 0, 0]), 0).unwrap_err();
        assert!(matches!(err, Error::NotSingleCoordinate { link: 0, ref others } if others == &vec![1]));
    }

    #[test]
    fn dropped_report_is_replaced_by_bound() {
        let (model, w) = four_node();
        let bounds = conflict_bounds(model.neighbor_sets(), &w, 2).unwrap();
        assert_eq!(bounds.get(2, 3, 0, 1).unwrap(), -3.0);
        let d = differentials(&model, &w, &x(&[1, 1, 0, 0]), &x(&[1, 1, 1, 0]), 2).unwrap();
        let got = bounded_aggregate(&d.restrict(&[0, 1]), model.neighbors(2), &bounds, 0, 1).unwrap();
        assert_eq!(got, -15.0);
        let full = bounded_aggregate(&d.restrict(model.neighbors(2)), model.neighbors(2), &bounds, 0, 1).unwrap();
        assert_eq!(full, aggregate(&d));
    }

    #[test]
    fn missing_bound_entry() {
        let (model, w) = four_node();
        let d = differentials(&model, &w, &x(&[1, 1, 0, 0]), &x(&[1, 1, 1, 0]), 2).unwrap();
        let empty = BoundTable {
            levels: 2,
            rows: vec![BTreeMap::new(); 4],
        };
        assert!(matches!(
            bounded_aggregate(&d.restrict(&[]), model.neighbors(2), &empty, 0, 1),
            Err(Error::MissingBound { i: 2, j: 0, .. })
        ));
    }

    #[test]
    fn negative_infinity_bound_propagates() {
        let (model, w) = four_node();
        let table = BoundTable::unbounded(model.neighbor_sets(), 2);
        let d = differentials(&model, &w, &x(&[0, 0, 0, 0]), &x(&[0, 0, 1, 0]), 2).unwrap();
        let got = bounded_aggregate(&d.restrict(&[0]), model.neighbors(2), &table, 0, 1).unwrap();
        assert_eq!(got, f64::NEG_INFINITY);
    }

    #[test]
    fn trivial_bound_values() {
        let sets = NeighborSets::new(vec![vec![1], vec![]]).unwrap();
        let w = WeightVector::new(vec![1.0, 2.0]).unwrap();
        let t = trivial_bounds_sinr(&sets, &w, &[3.0, 3.0], 3).unwrap();
        assert_eq!(t.get(0, 1, 0, 2).unwrap(), -6.0);
        assert_eq!(t.get(0, 1, 2, 1).unwrap(), 0.0);
        assert_eq!(t.get(0, 1, 1, 1).unwrap(), 0.0);
        assert_eq!(t.get(1, 0, 0, 1).unwrap(), -3.0);
    }

    #[test]
    fn conflict_bound_values() {
        let (model, w) = four_node();
        let t = conflict_bounds(model.neighbor_sets(), &w, 2).unwrap();
        assert_eq!(t.get(2, 3, 1, 0).unwrap(), 0.0);
        assert_eq!(t.get(2, 3, 0, 1).unwrap(), -3.0);
        assert_eq!(t.get(0, 2, 0, 0).unwrap(), 0.0);
        assert!(conflict_bounds(model.neighbor_sets(), &w, 3).is_err());
    }

    #[test]
    fn bound_table_set_guards() {
        let (model, w) = four_node();
        let mut t = conflict_bounds(model.neighbor_sets(), &w, 2).unwrap();
        assert!(t.set(0, 2, 0, 0, 1.0).is_err());
        assert!(t.set(0, 2, 0, 1, f64::NAN).is_err());
        assert!(t.set(0, 1, 0, 1, -1.0).is_err());
        t.set(0, 2, 0, 1, f64::NEG_INFINITY).unwrap();
        assert_eq!(t.get(0, 2, 0, 1).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn bound_table_toml_round_trip() {
        let (model, w) = four_node();
        let mut t = conflict_bounds(model.neighbor_sets(), &w, 2).unwrap();
        t.set(3, 2, 0, 1, f64::NEG_INFINITY).unwrap();
        let back = BoundTable::from_toml(&t.to_toml()).unwrap();
        assert_eq!(back, t);
        back.covers(model.neighbor_sets(), 2).unwrap();
    }
}

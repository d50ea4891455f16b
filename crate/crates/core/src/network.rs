//! Link topologies, interference and per-link capacity.
//!
//! Two capacity models are supported. The conflict-graph model gives a link
//! unit capacity when it is active and every graph neighbor is silent. The
//! SINR model maps each receiver's signal-to-interference-plus-noise ratio
//! through a step [`RateTable`].

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into a [`PowerAlphabet`].
pub type Level = u8;

/// Ordered transmit-power values in mW.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PowerAlphabet {
    levels: Vec<f64>,
}

impl PowerAlphabet {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::InvalidAlphabet(format!(
                "need at least 2 levels, got {}",
                levels.len()
            )));
        }
        if levels.len() > usize::from(Level::MAX) + 1 {
            return Err(Error::InvalidAlphabet(format!(
                "at most {} levels are supported",
                usize::from(Level::MAX) + 1
            )));
        }
        if levels.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidAlphabet(
                "levels must be finite and nonnegative".into(),
            ));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidAlphabet(
                "levels must be strictly increasing".into(),
            ));
        }
        Ok(Self { levels })
    }

    /// `{0, 1}`: inactive or active.
    pub fn binary() -> Self {
        Self {
            levels: vec![0.0, 1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn power(&self, level: Level) -> f64 {
        self.levels[usize::from(level)]
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }
}

impl TryFrom<Vec<f64>> for PowerAlphabet {
    type Error = Error;

    fn try_from(levels: Vec<f64>) -> Result<Self> {
        Self::new(levels)
    }
}

impl From<PowerAlphabet> for Vec<f64> {
    fn from(alphabet: PowerAlphabet) -> Self {
        alphabet.levels
    }
}

/// One power-level index per link: the state of the Markov chain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(Vec<Level>);

impl Configuration {
    pub fn new(levels: Vec<Level>) -> Self {
        Self(levels)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, link: usize) -> Level {
        self.0[link]
    }

    pub fn set(&mut self, link: usize, level: Level) {
        self.0[link] = level;
    }

    /// Copy with a single coordinate replaced.
    pub fn with(&self, link: usize, level: Level) -> Self {
        let mut next = self.clone();
        next.0[link] = level;
        next
    }

    pub fn levels(&self) -> &[Level] {
        &self.0
    }

    pub fn validate(&self, links: usize, num_levels: usize) -> Result<()> {
        if self.0.len() != links {
            return Err(Error::DimensionMismatch {
                what: "configuration",
                expected: links,
                found: self.0.len(),
            });
        }
        if let Some((i, l)) = self
            .0
            .iter()
            .enumerate()
            .find(|(_, l)| usize::from(**l) >= num_levels)
        {
            return Err(Error::InvalidConfiguration(format!(
                "link {i} is at level {l} but only {num_levels} levels exist"
            )));
        }
        Ok(())
    }
}

impl From<Vec<Level>> for Configuration {
    fn from(levels: Vec<Level>) -> Self {
        Self(levels)
    }
}

impl From<&[Level]> for Configuration {
    fn from(levels: &[Level]) -> Self {
        Self(levels.to_vec())
    }
}

/// Compact rendering: `1101` when every level is a single digit, `10.0.3` otherwise.
impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|l| *l < 10) {
            for l in &self.0 {
                write!(f, "{l}")?;
            }
        } else {
            for (k, l) in self.0.iter().enumerate() {
                if k > 0 {
                    f.write_str(".")?;
                }
                write!(f, "{l}")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub tx: [f64; 2],
    pub rx: [f64; 2],
}

impl LinkGeometry {
    pub fn length(&self) -> f64 {
        distance(self.tx, self.rx)
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Gains below this distance are evaluated at the reference distance so that
/// `d^-γ` stays finite.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

/// Channel gains between every transmitter and every receiver.
///
/// `gains[j][i]` is the gain from the link-`j` transmitter to the link-`i`
/// receiver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinrTopology {
    pub noise_mw: f64,
    pub pathloss_exponent: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkGeometry>,
    pub gains: Vec<Vec<f64>>,
}

impl SinrTopology {
    /// Topology with gains derived from positions as `d^-γ`.
    pub fn from_geometry(links: Vec<LinkGeometry>, pathloss_exponent: f64, noise_mw: f64) -> Result<Self> {
        let gains = links
            .iter()
            .map(|from| {
                links
                    .iter()
                    .map(|to| {
                        distance(from.tx, to.rx)
                            .max(REFERENCE_DISTANCE_M)
                            .powf(-pathloss_exponent)
                    })
                    .collect()
            })
            .collect();
        let topology = Self {
            noise_mw,
            pathloss_exponent,
            links,
            gains,
        };
        topology.validate()?;
        Ok(topology)
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn gain(&self, from_tx: usize, to_rx: usize) -> f64 {
        self.gains[from_tx][to_rx]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.gains.len();
        if n == 0 {
            return Err(Error::InvalidTopology("no links".into()));
        }
        if !(self.noise_mw.is_finite() && self.noise_mw > 0.0) {
            return Err(Error::InvalidTopology("noise must be positive and finite".into()));
        }
        if !self.pathloss_exponent.is_finite() {
            return Err(Error::InvalidTopology("path-loss exponent must be finite".into()));
        }
        for (j, row) in self.gains.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidTopology(format!(
                    "gain row {j} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if let Some(g) = row.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
                return Err(Error::InvalidTopology(format!(
                    "gain row {j} contains non-positive or non-finite value {g}"
                )));
            }
        }
        if !self.links.is_empty() && self.links.len() != n {
            return Err(Error::InvalidTopology(format!(
                "{} link positions for {n} links",
                self.links.len()
            )));
        }
        if self
            .links
            .iter()
            .flat_map(|l| l.tx.iter().chain(l.rx.iter()))
            .any(|c| !c.is_finite())
        {
            return Err(Error::InvalidTopology("positions must be finite".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("topology serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let topology: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        topology.validate()?;
        Ok(topology)
    }
}

/// Parameters for [`build_random_topology`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomTopologyParams {
    pub links: usize,
    #[serde(default = "default_region")]
    pub region_m: f64,
    #[serde(default = "default_pathloss")]
    pub pathloss: f64,
    #[serde(default = "default_max_link_len")]
    pub max_link_len_m: f64,
    #[serde(default = "default_noise")]
    pub noise_mw: f64,
}

fn default_region() -> f64 {
    500.0
}
fn default_pathloss() -> f64 {
    4.0
}
fn default_max_link_len() -> f64 {
    100.0
}
fn default_noise() -> f64 {
    1e-12
}

impl RandomTopologyParams {
    pub fn new(links: usize) -> Self {
        Self {
            links,
            region_m: default_region(),
            pathloss: default_pathloss(),
            max_link_len_m: default_max_link_len(),
            noise_mw: default_noise(),
        }
    }
}

/// Uniform random deployment in a square region.
///
/// Each receiver is redrawn until it lies within `max_link_len_m` of its
/// transmitter (and at least the reference distance away), so the layout is a
/// pure function of the seed.
pub fn build_random_topology(seed: u64, params: &RandomTopologyParams) -> Result<SinrTopology> {
    if params.links == 0 {
        return Err(Error::InvalidTopology("need at least one link".into()));
    }
    if !(params.region_m > 0.0 && params.region_m.is_finite()) {
        return Err(Error::InvalidTopology("region size must be positive".into()));
    }
    if !(params.max_link_len_m > REFERENCE_DISTANCE_M && params.max_link_len_m.is_finite()) {
        return Err(Error::InvalidTopology(format!(
            "maximum link length must exceed {REFERENCE_DISTANCE_M} m"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = params.region_m;
    let mut links = Vec::with_capacity(params.links);
    for _ in 0..params.links {
        let tx = [rng.gen_range(0.0..side), rng.gen_range(0.0..side)];
        let rx = loop {
            let rx = [rng.gen_range(0.0..side), rng.gen_range(0.0..side)];
            let d = distance(tx, rx);
            if (REFERENCE_DISTANCE_M..=params.max_link_len_m).contains(&d) {
                break rx;
            }
        };
        links.push(LinkGeometry { tx, rx });
    }
    SinrTopology::from_geometry(links, params.pathloss, params.noise_mw)
}

/// Symmetric conflict relation between links.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConflictGraph {
    adjacency: Vec<Vec<usize>>,
}

impl ConflictGraph {
    pub fn new(links: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); links];
        for &(a, b) in edges {
            if a >= links || b >= links {
                return Err(Error::InvalidTopology(format!(
                    "edge ({a}, {b}) references a link outside 0..{links}"
                )));
            }
            if a == b {
                return Err(Error::InvalidTopology(format!("self-edge on link {a}")));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for row in &mut adjacency {
            row.sort_unstable();
            row.dedup();
        }
        Ok(Self { adjacency })
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, link: usize) -> &[usize] {
        &self.adjacency[link]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, row)| row.iter().filter(move |b| **b > a).map(move |b| (a, *b)))
            .collect()
    }
}

/// Unit capacity iff active and every graph neighbor is inactive.
pub fn capacity_conflict(graph: &ConflictGraph, x: &Configuration) -> Result<Vec<f64>> {
    x.validate(graph.len(), usize::MAX)?;
    if let Some((link, &level)) = x.levels().iter().enumerate().find(|(_, l)| **l > 1) {
        return Err(Error::NonBinary { link, level });
    }
    Ok((0..graph.len())
        .map(|i| conflict_rate(graph, x.levels(), i))
        .collect())
}

fn conflict_rate(graph: &ConflictGraph, x: &[Level], i: usize) -> f64 {
    if x[i] == 1 && graph.neighbors(i).iter().all(|&j| x[j] == 0) {
        1.0
    } else {
        0.0
    }
}

/// Step map from SINR (dB) to capacity units per slot.
///
/// Bands are open on the left and closed on the right: band `k` covers
/// `(thresholds[k-1], thresholds[k]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub thresholds_db: Vec<f64>,
    pub rates: Vec<f64>,
}

impl RateTable {
    pub fn new(thresholds_db: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        let table = Self {
            thresholds_db,
            rates,
        };
        table.validate()?;
        Ok(table)
    }

    /// 0 up to 10 dB, 1 up to 20 dB, 2 up to 30 dB, 3 above.
    pub fn standard() -> Self {
        Self {
            thresholds_db: vec![10.0, 20.0, 30.0],
            rates: vec![0.0, 1.0, 2.0, 3.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rates.len() != self.thresholds_db.len() + 1 {
            return Err(Error::InvalidRateTable(format!(
                "{} rates for {} thresholds",
                self.rates.len(),
                self.thresholds_db.len()
            )));
        }
        if self.thresholds_db.iter().any(|t| !t.is_finite())
            || self.thresholds_db.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidRateTable(
                "thresholds must be finite and strictly ascending".into(),
            ));
        }
        if self.rates.iter().any(|r| !r.is_finite() || *r < 0.0)
            || self.rates.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::InvalidRateTable(
                "rates must be finite, nonnegative and non-decreasing".into(),
            ));
        }
        Ok(())
    }

    pub fn max_rate(&self) -> f64 {
        *self.rates.last().expect("validated table has rates")
    }

    pub fn rate_for_db(&self, db: f64) -> f64 {
        let band = self.thresholds_db.iter().take_while(|t| db > **t).count();
        self.rates[band]
    }

    /// Linear SINR; zero maps to the lowest band.
    pub fn rate_for_sinr(&self, sinr: f64) -> f64 {
        if sinr <= 0.0 {
            return self.rates[0];
        }
        self.rate_for_db(10.0 * sinr.log10())
    }
}

/// Message-collection sets; always symmetric.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborSets {
    sets: Vec<Vec<usize>>,
}

impl NeighborSets {
    /// Takes the symmetric closure of `sets`.
    pub fn new(mut sets: Vec<Vec<usize>>) -> Result<Self> {
        let n = sets.len();
        for (i, set) in sets.iter().enumerate() {
            if let Some(j) = set.iter().find(|j| **j >= n) {
                return Err(Error::InvalidNeighbors(format!("link {i} lists unknown link {j}")));
            }
            if set.contains(&i) {
                return Err(Error::InvalidNeighbors(format!("link {i} lists itself")));
            }
        }
        let pairs: Vec<(usize, usize)> = sets
            .iter()
            .enumerate()
            .flat_map(|(i, set)| set.iter().map(move |j| (i, *j)))
            .collect();
        for (i, j) in pairs {
            sets[j].push(i);
        }
        for set in &mut sets {
            set.sort_unstable();
            set.dedup();
        }
        Ok(Self { sets })
    }

    pub fn from_graph(graph: &ConflictGraph) -> Self {
        Self {
            sets: (0..graph.len()).map(|i| graph.neighbors(i).to_vec()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn of(&self, link: usize) -> &[usize] {
        &self.sets[link]
    }

    pub fn contains(&self, link: usize, other: usize) -> bool {
        self.sets[link].binary_search(&other).is_ok()
    }

    pub fn max_degree(&self) -> usize {
        self.sets.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// `j ∈ N[i]` when the link-`j` receiver lies within `radius_m` of the link-`i`
/// transmitter, closed under symmetry.
pub fn neighbor_sets(topology: &SinrTopology, radius_m: f64) -> Result<NeighborSets> {
    if radius_m.is_nan() || radius_m <= 0.0 {
        return Err(Error::InvalidNeighbors("radius must be positive".into()));
    }
    if topology.links.is_empty() {
        return Err(Error::InvalidNeighbors(
            "radius-based neighbor sets need link positions".into(),
        ));
    }
    let links = &topology.links;
    let sets = (0..links.len())
        .map(|i| {
            (0..links.len())
                .filter(|&j| j != i && distance(links[i].tx, links[j].rx) <= radius_m)
                .collect()
        })
        .collect();
    NeighborSets::new(sets)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterferenceMode {
    /// Interference only from the neighbor set.
    #[default]
    Truncated,
    /// Interference from every other link.
    Full,
}

/// Which transmitters count as interferers in [`sinr`].
#[derive(Clone, Copy, Debug)]
pub enum Interferers<'a> {
    All,
    Neighbors(&'a NeighborSets),
}

fn sinr_at(topology: &SinrTopology, alphabet: &PowerAlphabet, x: &[Level], i: usize, interferers: Interferers<'_>) -> f64 {
    let signal = topology.gain(i, i) * alphabet.power(x[i]);
    let interference: f64 = match interferers {
        Interferers::All => (0..x.len())
            .filter(|&j| j != i)
            .map(|j| topology.gain(j, i) * alphabet.power(x[j]))
            .sum(),
        Interferers::Neighbors(sets) => sets
            .of(i)
            .iter()
            .map(|&j| topology.gain(j, i) * alphabet.power(x[j]))
            .sum(),
    };
    signal / (interference + topology.noise_mw)
}

/// Linear SINR at every receiver.
pub fn sinr(topology: &SinrTopology, alphabet: &PowerAlphabet, x: &Configuration, interferers: Interferers<'_>) -> Result<Vec<f64>> {
    x.validate(topology.len(), alphabet.len())?;
    if let Interferers::Neighbors(sets) = interferers {
        if sets.len() != topology.len() {
            return Err(Error::DimensionMismatch {
                what: "neighbor sets",
                expected: topology.len(),
                found: sets.len(),
            });
        }
    }
    Ok((0..topology.len())
        .map(|i| sinr_at(topology, alphabet, x.levels(), i, interferers))
        .collect())
}

/// Rate-table capacity at every receiver.
pub fn capacity_sinr(
    topology: &SinrTopology,
    alphabet: &PowerAlphabet,
    x: &Configuration,
    table: &RateTable,
    interferers: Interferers<'_>,
) -> Result<Vec<f64>> {
    Ok(sinr(topology, alphabet, x, interferers)?
        .into_iter()
        .map(|g| table.rate_for_sinr(g))
        .collect())
}

/// Everything needed to evaluate SINR-driven capacity.
#[derive(Clone, Debug)]
pub struct SinrModel {
    pub topology: SinrTopology,
    pub alphabet: PowerAlphabet,
    pub rate_table: RateTable,
    pub neighbors: NeighborSets,
    pub mode: InterferenceMode,
}

impl SinrModel {
    pub fn new(
        topology: SinrTopology,
        alphabet: PowerAlphabet,
        rate_table: RateTable,
        neighbors: NeighborSets,
        mode: InterferenceMode,
    ) -> Result<Self> {
        topology.validate()?;
        rate_table.validate()?;
        if neighbors.len() != topology.len() {
            return Err(Error::DimensionMismatch {
                what: "neighbor sets",
                expected: topology.len(),
                found: neighbors.len(),
            });
        }
        Ok(Self {
            topology,
            alphabet,
            rate_table,
            neighbors,
            mode,
        })
    }

    fn interferers(&self) -> Interferers<'_> {
        match self.mode {
            InterferenceMode::Truncated => Interferers::Neighbors(&self.neighbors),
            InterferenceMode::Full => Interferers::All,
        }
    }

    pub fn sinr(&self, x: &Configuration) -> Result<Vec<f64>> {
        sinr(&self.topology, &self.alphabet, x, self.interferers())
    }
}

/// A capacity model together with its message-collection structure.
#[derive(Clone, Debug)]
pub enum NetworkModel {
    Conflict {
        graph: ConflictGraph,
        neighbors: NeighborSets,
    },
    Sinr(SinrModel),
}

impl NetworkModel {
    pub fn conflict(graph: ConflictGraph) -> Self {
        let neighbors = NeighborSets::from_graph(&graph);
        NetworkModel::Conflict { graph, neighbors }
    }

    pub fn links(&self) -> usize {
        self.neighbor_sets().len()
    }

    pub fn num_levels(&self) -> usize {
        match self {
            NetworkModel::Conflict { .. } => 2,
            NetworkModel::Sinr(m) => m.alphabet.len(),
        }
    }

    pub fn neighbor_sets(&self) -> &NeighborSets {
        match self {
            NetworkModel::Conflict { neighbors, .. } => neighbors,
            NetworkModel::Sinr(m) => &m.neighbors,
        }
    }

    pub fn neighbors(&self, link: usize) -> &[usize] {
        self.neighbor_sets().of(link)
    }

    /// Whether a link's capacity depends only on its own level and its
    /// neighbors' levels, which makes neighbor-local differentials exact.
    pub fn is_neighbor_local(&self) -> bool {
        match self {
            NetworkModel::Conflict { .. } => true,
            NetworkModel::Sinr(m) => m.mode == InterferenceMode::Truncated,
        }
    }

    /// Largest rate any link can reach.
    pub fn max_rate(&self) -> f64 {
        match self {
            NetworkModel::Conflict { .. } => 1.0,
            NetworkModel::Sinr(m) => m.rate_table.max_rate(),
        }
    }

    pub fn validate_configuration(&self, x: &Configuration) -> Result<()> {
        x.validate(self.links(), self.num_levels())
    }

    /// Capacity of one link. `x` must already be valid for this model.
    pub fn rate(&self, x: &[Level], link: usize) -> f64 {
        match self {
            NetworkModel::Conflict { graph, .. } => conflict_rate(graph, x, link),
            NetworkModel::Sinr(m) => m
                .rate_table
                .rate_for_sinr(sinr_at(&m.topology, &m.alphabet, x, link, m.interferers())),
        }
    }

    pub fn rates(&self, x: &Configuration) -> Result<Vec<f64>> {
        self.validate_configuration(x)?;
        Ok((0..self.links()).map(|i| self.rate(x.levels(), i)).collect())
    }
}

//! Scenario files: what to simulate and which numbers to report.
//!
//! A scenario is a TOML document. Parameters that can be swept (drop
//! probability, inverse temperature, cooling constant, bound ceiling,
//! arrival rate) are lists, and a run covers their cross product.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algorithms::{Algorithm, CoolingSchedule, DropModel};
use crate::error::{Error, Result};
use crate::network::{
    build_random_topology, neighbor_sets, ConflictGraph, Configuration, InterferenceMode, Level, NetworkModel,
    PowerAlphabet, RandomTopologyParams, RateTable, SinrModel, SinrTopology,
};
use crate::objective::{conflict_bounds, trivial_bounds_sinr, BoundEntry, BoundTable, WeightVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub algorithms: Vec<Algorithm>,
    pub horizon: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub metrics: Vec<Metric>,
    /// Start configuration; all links at level 0 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<Level>>,
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightsSpec>,
    #[serde(default)]
    pub drop: DropSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub bounds: BoundsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queueing: Option<QueueingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<VarianceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annealing: Option<AnnealingSection>,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Empirical per-configuration occupancy of each run.
    Occupancy,
    /// Exact stationary vector of each algorithm's chain.
    Stationary,
    /// Exact Gibbs distribution.
    Gibbs,
    AcceptanceRate,
    MeanObjective,
    /// Batch-means variance rate of the indicator of `variance.state`.
    VarianceRate,
    /// Exact variance rate of the same indicator.
    ExactVarianceRate,
    /// Queue-driven run; mean backlogs and cross-algorithm ratios.
    Queue,
    /// Running occupancy of the optimizer set.
    Annealing,
}

impl Metric {
    fn needs_fixed_beta(self) -> bool {
        matches!(self, Metric::Stationary | Metric::Gibbs | Metric::ExactVarianceRate)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Conflict(ConflictSpec),
    Sinr(SinrSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConflictSpec {
    pub links: usize,
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinrSpec {
    pub levels_mw: Vec<f64>,
    /// Neighbor `j` of `i`: `j`'s receiver lies within this distance of
    /// `i`'s transmitter (either direction, after symmetrization).
    pub radius_m: f64,
    #[serde(default)]
    pub interference: InterferenceMode,
    /// Topology file, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_table: Option<RateTable>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    pub links: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pathloss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_link_len_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_mw: Option<f64>,
}

impl RandomSpec {
    fn params(&self) -> RandomTopologyParams {
        let mut p = RandomTopologyParams::new(self.links);
        if let Some(v) = self.region_m {
            p.region_m = v;
        }
        if let Some(v) = self.pathloss {
            p.pathloss = v;
        }
        if let Some(v) = self.max_link_len_m {
            p.max_link_len_m = v;
        }
        if let Some(v) = self.noise_mw {
            p.noise_mw = v;
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSpec {
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropSpec {
    /// Independent per-message loss probabilities to cover.
    pub p: Vec<f64>,
}

impl Default for DropSpec {
    fn default() -> Self {
        Self { p: vec![0.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Fixed {
        beta: Vec<f64>,
    },
    InverseLog {
        d: Vec<f64>,
        #[serde(default = "default_t0")]
        t0: f64,
    },
}

fn default_t0() -> f64 {
    1.0
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec::Fixed { beta: vec![1.0] }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    /// Conflict bounds on conflict graphs, trivial SINR bounds otherwise.
    #[default]
    Auto,
    Trivial,
    Conflict,
    File,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    #[serde(default)]
    pub kind: BoundKind,
    /// Rate ceilings to cover; each value applies to every link. Defaults to
    /// the model's maximum rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_max: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<BoundEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueingSpec {
    /// Per-slot arrival rates to cover; each value applies to every link.
    pub arrivals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceSpec {
    /// Configuration whose indicator is the observable.
    pub state: Vec<Level>,
    pub batch_sizes: Vec<usize>,
    #[serde(default)]
    pub burn_in: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealingSection {
    /// Slots at which running occupancy is reported; powers of ten and the
    /// horizon when empty.
    #[serde(default)]
    pub checkpoints: Vec<u64>,
}

/// One parameter combination of a scenario.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub p: f64,
    pub schedule: CoolingSchedule,
    pub c_max: Option<f64>,
    pub arrival: Option<f64>,
}

impl Point {
    /// Fixed inverse temperature, if the schedule has one.
    pub fn beta(&self) -> Option<f64> {
        match self.schedule {
            CoolingSchedule::Fixed(b) => Some(b),
            CoolingSchedule::InverseLog { .. } => None,
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p={}", self.p)?;
        match self.schedule {
            CoolingSchedule::Fixed(b) => write!(f, ";beta={b}")?,
            CoolingSchedule::InverseLog { d, .. } => write!(f, ";d={d}")?,
        }
        if let Some(c) = self.c_max {
            write!(f, ";cmax={c}")?;
        }
        if let Some(a) = self.arrival {
            write!(f, ";arrival={a}")?;
        }
        Ok(())
    }
}

fn check_list(path: &str, values: &[f64], ok: impl Fn(f64) -> bool, rule: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::scenario(path, "list must not be empty"));
    }
    for (k, v) in values.iter().enumerate() {
        if !ok(*v) {
            return Err(Error::scenario(format!("{path}[{k}]"), format!("{v} {rule}")));
        }
    }
    Ok(())
}

impl Scenario {
    /// Parses and validates a scenario. Referenced files are not read.
    pub fn parse(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Structural checks; each failure names the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::scenario("name", "must not be empty"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::scenario("algorithms", "at least one algorithm is required"));
        }
        if self.horizon == 0 {
            return Err(Error::scenario("horizon", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::scenario("seeds", "at least one seed is required"));
        }
        if self.metrics.is_empty() {
            return Err(Error::scenario("metrics", "at least one metric is required"));
        }

        let (links, levels) = match &self.model {
            ModelSpec::Conflict(c) => {
                ConflictGraph::new(c.links, &self.edges()).map_err(|e| Error::scenario("model.edges", e.to_string()))?;
                (Some(c.links), 2)
            }
            ModelSpec::Sinr(s) => {
                let alphabet =
                    PowerAlphabet::new(s.levels_mw.clone()).map_err(|e| Error::scenario("model.levels_mw", e.to_string()))?;
                if !(s.radius_m.is_finite() && s.radius_m > 0.0) {
                    return Err(Error::scenario("model.radius_m", "must be positive"));
                }
                if let Some(t) = &s.rate_table {
                    t.validate().map_err(|e| Error::scenario("model.rate_table", e.to_string()))?;
                }
                let links = match (&s.topology_file, &s.random) {
                    (Some(_), None) => None,
                    (None, Some(r)) => {
                        if r.links == 0 || r.links > 4096 {
                            return Err(Error::scenario("model.random.links", "must lie in 1..=4096"));
                        }
                        Some(r.links)
                    }
                    _ => {
                        return Err(Error::scenario(
                            "model",
                            "give exactly one of `topology_file` or a `[model.random]` table",
                        ))
                    }
                };
                (links, alphabet.len())
            }
        };

        if let (Some(n), Some(w)) = (links, &self.weights) {
            if w.values.len() != n {
                return Err(Error::scenario(
                    "weights.values",
                    format!("expected {n} weights, found {}", w.values.len()),
                ));
            }
        }
        if let Some(w) = &self.weights {
            WeightVector::new(w.values.clone()).map_err(|e| Error::scenario("weights.values", e.to_string()))?;
        }
        if let (Some(n), Some(x)) = (links, &self.initial) {
            Configuration::new(x.clone())
                .validate(n, levels)
                .map_err(|e| Error::scenario("initial", e.to_string()))?;
        }

        check_list("drop.p", &self.drop.p, |p| (0.0..1.0).contains(&p), "is not in [0, 1)")?;
        match &self.schedule {
            ScheduleSpec::Fixed { beta } => {
                check_list("schedule.beta", beta, |b| b.is_finite() && b >= 0.0, "is not a finite value >= 0")?
            }
            ScheduleSpec::InverseLog { d, t0 } => {
                check_list("schedule.d", d, |v| v.is_finite() && v > 0.0, "is not positive")?;
                if !(t0.is_finite() && *t0 >= 1.0) {
                    return Err(Error::scenario("schedule.t0", "must be >= 1"));
                }
            }
        }
        if let Some(m) = self.metrics.iter().find(|m| m.needs_fixed_beta()) {
            if !matches!(self.schedule, ScheduleSpec::Fixed { .. }) {
                return Err(Error::scenario(
                    "schedule.kind",
                    format!("metric `{}` needs a fixed schedule", metric_name(*m)),
                ));
            }
        }

        if let Some(c) = &self.bounds.c_max {
            check_list("bounds.c_max", c, |v| v.is_finite() && v >= 0.0, "is not a finite value >= 0")?;
        }
        match self.bounds.kind {
            BoundKind::File if self.bounds.file.is_none() => {
                return Err(Error::scenario("bounds.file", "required when bounds.kind = \"file\""));
            }
            BoundKind::Conflict if !matches!(self.model, ModelSpec::Conflict(_)) => {
                return Err(Error::scenario("bounds.kind", "conflict bounds need a conflict-graph model"));
            }
            _ => {}
        }
        for (k, e) in self.bounds.overrides.iter().enumerate() {
            if e.bound.is_nan() || e.bound == f64::INFINITY {
                return Err(Error::scenario(format!("bounds.overrides[{k}].bound"), "must be finite or -inf"));
            }
        }

        if self.metrics.contains(&Metric::Queue) {
            let q = self
                .queueing
                .as_ref()
                .ok_or_else(|| Error::scenario("queueing", "metric `queue` needs a [queueing] table"))?;
            check_list("queueing.arrivals", &q.arrivals, |a| a.is_finite() && a >= 0.0, "is not a finite value >= 0")?;
        }
        if self.metrics.iter().any(|m| matches!(m, Metric::VarianceRate | Metric::ExactVarianceRate)) {
            let v = self
                .variance
                .as_ref()
                .ok_or_else(|| Error::scenario("variance", "variance metrics need a [variance] table"))?;
            if v.batch_sizes.is_empty() && self.metrics.contains(&Metric::VarianceRate) {
                return Err(Error::scenario("variance.batch_sizes", "list must not be empty"));
            }
            if v.batch_sizes.contains(&0) {
                return Err(Error::scenario("variance.batch_sizes", "batch sizes must be positive"));
            }
            if let Some(n) = links {
                Configuration::new(v.state.clone())
                    .validate(n, levels)
                    .map_err(|e| Error::scenario("variance.state", e.to_string()))?;
            }
            if v.burn_in >= self.horizon {
                return Err(Error::scenario("variance.burn_in", "must be smaller than the horizon"));
            }
        }
        Ok(())
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        match &self.model {
            ModelSpec::Conflict(c) => c.edges.iter().map(|[a, b]| (*a, *b)).collect(),
            ModelSpec::Sinr(_) => Vec::new(),
        }
    }

    /// Builds the network model, reading a topology file relative to `base`.
    pub fn build_model(&self, base: &Path) -> Result<NetworkModel> {
        match &self.model {
            ModelSpec::Conflict(c) => Ok(NetworkModel::conflict(ConflictGraph::new(c.links, &self.edges())?)),
            ModelSpec::Sinr(s) => {
                let topology = match (&s.topology_file, &s.random) {
                    (Some(file), _) => {
                        let path = resolve(base, file);
                        let text = std::fs::read_to_string(&path)
                            .map_err(|e| Error::scenario("model.topology_file", format!("{}: {e}", path.display())))?;
                        SinrTopology::from_toml(&text).map_err(|e| Error::scenario("model.topology_file", e.to_string()))?
                    }
                    (None, Some(r)) => build_random_topology(r.seed, &r.params())
                        .map_err(|e| Error::scenario("model.random", e.to_string()))?,
                    (None, None) => return Err(Error::scenario("model", "no topology given")),
                };
                let neighbors =
                    neighbor_sets(&topology, s.radius_m).map_err(|e| Error::scenario("model.radius_m", e.to_string()))?;
                let model = SinrModel::new(
                    topology,
                    PowerAlphabet::new(s.levels_mw.clone())?,
                    s.rate_table.clone().unwrap_or_else(RateTable::standard),
                    neighbors,
                    s.interference,
                )?;
                let model = NetworkModel::Sinr(model);
                // File-backed topologies only reveal their size here.
                if let Some(w) = &self.weights {
                    if w.values.len() != model.links() {
                        return Err(Error::scenario(
                            "weights.values",
                            format!("expected {} weights, found {}", model.links(), w.values.len()),
                        ));
                    }
                }
                for (path, x) in [("initial", &self.initial), ("variance.state", &self.variance.as_ref().map(|v| v.state.clone()))] {
                    if let Some(x) = x {
                        Configuration::new(x.clone())
                            .validate(model.links(), model.num_levels())
                            .map_err(|e| Error::scenario(path, e.to_string()))?;
                    }
                }
                Ok(model)
            }
        }
    }

    /// Static link weights (all ones by default).
    pub fn weight_vector(&self, links: usize) -> Result<WeightVector> {
        match &self.weights {
            Some(w) => {
                let w = WeightVector::new(w.values.clone())?;
                w.check_len(links)?;
                Ok(w)
            }
            None => Ok(WeightVector::uniform(links, 1.0)),
        }
    }

    pub fn initial_state(&self, links: usize) -> Configuration {
        self.initial
            .clone()
            .map(Configuration::new)
            .unwrap_or_else(|| Configuration::zeros(links))
    }

    /// Whether the ceiling list is part of the parameter grid.
    fn uses_c_max(&self) -> bool {
        self.bounds.c_max.is_some() || self.metrics.contains(&Metric::Queue)
    }

    /// Cross product of every swept parameter, in file order.
    pub fn points(&self) -> Vec<Point> {
        let schedules: Vec<CoolingSchedule> = match &self.schedule {
            ScheduleSpec::Fixed { beta } => beta.iter().map(|&b| CoolingSchedule::Fixed(b)).collect(),
            ScheduleSpec::InverseLog { d, t0 } => d.iter().map(|&d| CoolingSchedule::InverseLog { d, t0: *t0 }).collect(),
        };
        let c_max: Vec<Option<f64>> = match (&self.bounds.c_max, self.uses_c_max()) {
            (Some(c), _) => c.iter().copied().map(Some).collect(),
            (None, true) => vec![None],
            (None, false) => vec![None],
        };
        let arrivals: Vec<Option<f64>> = match &self.queueing {
            Some(q) if self.metrics.contains(&Metric::Queue) => q.arrivals.iter().copied().map(Some).collect(),
            _ => vec![None],
        };
        let mut out = Vec::new();
        for &p in &self.drop.p {
            for &schedule in &schedules {
                for &c in &c_max {
                    for &arrival in &arrivals {
                        out.push(Point {
                            p,
                            schedule,
                            c_max: c,
                            arrival,
                        });
                    }
                }
            }
        }
        out
    }

    /// Bound table for one grid point. Ceilings default to the model's
    /// maximum rate.
    pub fn bound_table(&self, model: &NetworkModel, weights: &WeightVector, point: &Point, base: &Path) -> Result<BoundTable> {
        let ceiling = point.c_max.unwrap_or_else(|| model.max_rate());
        let mut table = match (self.bounds.kind, model) {
            (BoundKind::File, _) => {
                let file = self.bounds.file.as_deref().unwrap_or_default();
                let path = resolve(base, file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::scenario("bounds.file", format!("{}: {e}", path.display())))?;
                BoundTable::from_toml(&text).map_err(|e| Error::scenario("bounds.file", e.to_string()))?
            }
            (BoundKind::Auto | BoundKind::Conflict, NetworkModel::Conflict { neighbors, .. }) if point.c_max.is_none() => {
                conflict_bounds(neighbors, weights, 2)?
            }
            (BoundKind::Conflict, _) => {
                return Err(Error::scenario("bounds.kind", "conflict bounds need a conflict-graph model"))
            }
            _ => trivial_bounds_sinr(
                model.neighbor_sets(),
                weights,
                &vec![ceiling; model.links()],
                model.num_levels(),
            )?,
        };
        for (k, e) in self.bounds.overrides.iter().enumerate() {
            table
                .set(e.i, e.j, e.from, e.to, e.bound)
                .map_err(|err| Error::scenario(format!("bounds.overrides[{k}]"), err.to_string()))?;
        }
        table
            .covers(model.neighbor_sets(), model.num_levels())
            .map_err(|e| Error::scenario("bounds", e.to_string()))?;
        Ok(table)
    }

    /// Replaces one swept list.
    pub fn apply_axis(&mut self, axis: &AxisSpec) -> Result<()> {
        let values = axis.values.clone();
        match axis.axis {
            Axis::P => self.drop.p = values,
            Axis::Arrival => match &mut self.queueing {
                Some(q) => q.arrivals = values,
                None => self.queueing = Some(QueueingSpec { arrivals: values }),
            },
            Axis::Beta => match &mut self.schedule {
                ScheduleSpec::Fixed { beta } => *beta = values,
                ScheduleSpec::InverseLog { .. } => {
                    return Err(Error::scenario("schedule.kind", "axis `beta` needs a fixed schedule"))
                }
            },
            Axis::D => match &mut self.schedule {
                ScheduleSpec::InverseLog { d, .. } => *d = values,
                ScheduleSpec::Fixed { .. } => {
                    return Err(Error::scenario("schedule.kind", "axis `d` needs an inverse_log schedule"))
                }
            },
            Axis::Cmax => self.bounds.c_max = Some(values),
            Axis::Seed => {
                if values.iter().any(|v| !(v.fract() == 0.0 && *v >= 0.0 && *v <= u64::MAX as f64)) {
                    return Err(Error::Parse("seeds must be nonnegative integers".into()));
                }
                self.seeds = values.iter().map(|&v| v as u64).collect();
            }
        }
        self.validate()
    }
}

fn resolve(base: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::Occupancy => "occupancy",
        Metric::Stationary => "stationary",
        Metric::Gibbs => "gibbs",
        Metric::AcceptanceRate => "acceptance_rate",
        Metric::MeanObjective => "mean_objective",
        Metric::VarianceRate => "variance_rate",
        Metric::ExactVarianceRate => "exact_variance_rate",
        Metric::Queue => "queue",
        Metric::Annealing => "annealing",
    }
}

/// Parameters a sweep can override.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    P,
    Arrival,
    Beta,
    D,
    Cmax,
    Seed,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "p" => Ok(Axis::P),
            "arrival" => Ok(Axis::Arrival),
            "beta" => Ok(Axis::Beta),
            "d" => Ok(Axis::D),
            "cmax" => Ok(Axis::Cmax),
            "seed" => Ok(Axis::Seed),
            other => Err(Error::UnknownAxis(other.to_string())),
        }
    }
}

/// `name=v1,v2,…`, `name=a..b` (inclusive integers) or `name=a..b:step`.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
}

/// Largest number of values one axis may expand to.
pub const MAX_AXIS_VALUES: usize = 100_000;

impl FromStr for AxisSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, body) = s
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("axis spec `{s}` has no `=`")))?;
        let axis: Axis = name.parse()?;
        let number = |t: &str| -> Result<f64> {
            let v: f64 = t
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("`{}` is not a number", t.trim())))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse(format!("`{}` is not finite", t.trim())))
            }
        };
        let values = if let Some((lo, rest)) = body.split_once("..") {
            let (hi, step) = match rest.split_once(':') {
                Some((hi, step)) => (number(hi)?, number(step)?),
                None => (number(rest)?, 1.0),
            };
            let lo = number(lo)?;
            if step <= 0.0 || hi < lo {
                return Err(Error::Parse(format!("empty range `{body}`")));
            }
            let count = ((hi - lo) / step + 1e-9).floor() + 1.0;
            if count > MAX_AXIS_VALUES as f64 {
                return Err(Error::Parse(format!("range `{body}` has more than {MAX_AXIS_VALUES} values")));
            }
            (0..count as usize)
                .map(|k| {
                    // Round to 12 significant decimals so 0.05 steps print as 0.15, not 0.15000000000000002.
                    let v = lo + k as f64 * step;
                    (v * 1e12).round() / 1e12
                })
                .collect()
        } else {
            body.split(',').map(number).collect::<Result<Vec<_>>>()?
        };
        if values.is_empty() {
            return Err(Error::Parse(format!("axis `{name}` has no values")));
        }
        Ok(AxisSpec { axis, values })
    }
}

/// A scenario file bundled with the library.
pub struct Bundled {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const BUNDLED: &[Bundled] = &[
    Bundled {
        name: "fig2",
        summary: "four-link conflict graph: stationary and empirical occupancy at beta 0.1 and 1",
        text: include_str!("../scenarios/fig2.toml"),
    },
    Bundled {
        name: "fig3",
        summary: "four-link conflict graph: variance rate of one state's indicator",
        text: include_str!("../scenarios/fig3.toml"),
    },
    Bundled {
        name: "fig4",
        summary: "four-link conflict graph with queue-driven weights",
        text: include_str!("../scenarios/fig4.toml"),
    },
    Bundled {
        name: "fig6",
        summary: "ten random SINR links with queue-driven weights",
        text: include_str!("../scenarios/fig6.toml"),
    },
    Bundled {
        name: "fig7",
        summary: "ten random SINR links: loose-bound sweep over drop rate and rate ceiling",
        text: include_str!("../scenarios/fig7.toml"),
    },
    Bundled {
        name: "anneal",
        summary: "four-link conflict graph under inverse-log cooling",
        text: include_str!("../scenarios/anneal.toml"),
    },
];

pub fn bundled(name: &str) -> Option<&'static Bundled> {
    BUNDLED.iter().find(|b| b.name == name)
}

/// Drop model for one grid point.
pub fn drop_model(point: &Point) -> Result<DropModel> {
    DropModel::independent(point.p)
}

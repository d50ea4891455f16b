//! Canonical instances used throughout the tests and bundled scenarios.

use crate::error::Result;
use crate::network::{
    build_random_topology, neighbor_sets, ConflictGraph, Configuration, InterferenceMode, NetworkModel, PowerAlphabet,
    RandomTopologyParams, RateTable, SinrModel,
};
use crate::objective::WeightVector;

/// Links a, b, c, d in that index order; c conflicts with the other three.
pub const FOUR_NODE_EDGES: [(usize, usize); 3] = [(0, 2), (1, 2), (2, 3)];
pub const FOUR_NODE_WEIGHTS: [f64; 4] = [5.0, 7.0, 10.0, 3.0];

/// Four-link conflict graph with weights 5, 7, 10, 3.
pub fn four_node() -> (NetworkModel, WeightVector) {
    let graph = ConflictGraph::new(4, &FOUR_NODE_EDGES).expect("static edges are valid");
    (
        NetworkModel::conflict(graph),
        WeightVector::new(FOUR_NODE_WEIGHTS.to_vec()).expect("static weights are valid"),
    )
}

/// The unique maximizer of the four-link objective.
pub fn four_node_optimum() -> Configuration {
    Configuration::new(vec![1, 1, 0, 1])
}

/// Seed of the bundled 10-link deployment.
pub const TEN_LINK_SEED: u64 = 2017;
pub const TEN_LINK_RADIUS_M: f64 = 250.0;

/// Ten random links in a 500 m square, powers {0, 5, 10} mW, `d^-4`
/// path loss, 1e-12 mW noise, the standard rate table and a 250 m
/// message-collection radius.
pub fn ten_link_sinr(seed: u64, mode: InterferenceMode) -> Result<NetworkModel> {
    let topology = build_random_topology(seed, &RandomTopologyParams::new(10))?;
    let neighbors = neighbor_sets(&topology, TEN_LINK_RADIUS_M)?;
    let alphabet = PowerAlphabet::new(vec![0.0, 5.0, 10.0])?;
    Ok(NetworkModel::Sinr(SinrModel::new(
        topology,
        alphabet,
        RateTable::standard(),
        neighbors,
        mode,
    )?))
}

//! Shared fixtures for the criterion targets: deterministic networks,
//! episodes, and utility vectors of representative benchmark sizes.

use bpsim_core::{
    generate_network, sample_episode, ConflictModel, Episode, NetworkInstance, TopologyConfig,
    TrafficConfig,
};

pub fn network(num_nodes: usize, seed: u64) -> NetworkInstance {
    generate_network(&TopologyConfig {
        num_nodes,
        conflict_model: ConflictModel::UnitDisk,
        seed,
        ..TopologyConfig::default()
    })
    .expect("fixture topology")
}

pub fn episode(net: &NetworkInstance, horizon: usize, seed: u64) -> Episode {
    sample_episode(net, &TrafficConfig::default(), horizon, seed).expect("fixture episode")
}

/// Positive utilities with a sprinkling of zeros, like a mid-episode slot.
pub fn utilities(num_links: usize) -> Vec<f64> {
    (0..num_links)
        .map(|e| {
            if e % 5 == 4 {
                0.0
            } else {
                ((e * 37 + 11) % 97) as f64 + 0.5
            }
        })
        .collect()
}

//! Discrete-time simulator for backpressure packet routing over multi-hop
//! wireless networks.
//!
//! The pipeline: sample a random geometric network and its interference
//! conflict graph ([`topology`]), attach Poisson traffic and time-varying
//! link rates ([`traffic`]), route by per-commodity backpressure with an
//! optional shortest-path bias ([`routing`], [`bias`]), schedule
//! non-conflicting links by MaxWeight ([`scheduler`]), and roll slots
//! forward while collecting delay and delivery metrics ([`simulator`]).
//! The [`gnn`] module trains a graph convolutional predictor of per-link
//! duty cycles whose inverse serves as the link distance for the bias.

pub mod bias;
pub mod gnn;
pub mod rng;
pub mod routing;
pub mod scheduler;
pub mod simulator;
pub mod topology;
pub mod traffic;

mod error;

pub use error::{Error, Result};

pub use bias::{bias_table_for_policy, BiasTable, DistancePolicy};
pub use gnn::{train, DutyCycles, GnnConfig, GnnParams, TrainConfig, TrainReport};
pub use routing::{LinkDecision, QueueState};
pub use scheduler::{Schedule, SchedulerKind};
pub use simulator::{
    run_benchmark, run_episode, summarize, BenchmarkConfig, BenchmarkRow, EpisodeMetrics,
    SlotTrace, SummaryRow,
};
pub use topology::{
    generate_network, ConflictGraph, ConflictModel, ConnectivityGraph, LinkId, NetworkInstance,
    NodeId, TopologyConfig,
};
pub use traffic::{sample_episode, ArrivalMatrix, Episode, Flow, LinkRateProcess, TrafficConfig};

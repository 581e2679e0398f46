//! Training of the duty-cycle predictor against simulated schedules.
//!
//! Each episode samples a fresh network and traffic, routes it with the
//! current prediction feeding a duty-inverse distance bias, and records
//! the realized per-link schedule frequencies as the regression target.
//! Tuples go into a bounded replay buffer; every episode takes one or
//! more Adam steps on mini-batches drawn from it.

use std::collections::VecDeque;

use ndarray::Array2;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use super::{
    adam_step, backward, forward, loss, loss_grad, predict, AdamConfig, AdamState, GnnConfig,
    GnnGradients, GnnParams,
};
use crate::bias::{bias_table_for_policy, DistancePolicy};
use crate::error::Result;
use crate::rng::{derive_seed, stream_rng};
use crate::scheduler::SchedulerKind;
use crate::simulator::run_episode;
use crate::topology::{
    generate_network, ConflictModel, NormalizedLaplacian, TopologyConfig, DEFAULT_NODE_DENSITY,
};
use crate::traffic::{sample_episode, TrafficConfig};

/// One experience: a conflict-graph Laplacian and the schedule-frequency
/// target observed on it.
pub struct ReplayTuple {
    pub laplacian: NormalizedLaplacian,
    /// Rows `[freq, 1 - freq]`, one per link.
    pub target: Array2<f64>,
}

/// Bounded FIFO store of experiences; the oldest tuple is evicted first.
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<ReplayTuple>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer {
            capacity,
            items: VecDeque::new(),
        }
    }

    pub fn push(&mut self, tuple: ReplayTuple) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(tuple);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> &ReplayTuple {
        &self.items[i]
    }

    /// Uniform sample of distinct indices; the whole buffer if it holds
    /// fewer than `amount` tuples.
    pub fn sample_indices<R: Rng>(&self, rng: &mut R, amount: usize) -> Vec<usize> {
        let k = amount.min(self.items.len());
        rand::seq::index::sample(rng, self.items.len(), k).into_vec()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Network sizes to draw from, uniformly, one per episode.
    pub node_sizes: Vec<usize>,
    pub node_density: f64,
    pub link_range: f64,
    pub conflict_model: ConflictModel,
    pub interference_range: f64,
    pub traffic: TrafficConfig,
    /// Slots simulated per episode.
    pub horizon: usize,
    pub scheduler: SchedulerKind,
    pub gnn: GnnConfig,
    pub adam: AdamConfig,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Adam updates taken after each episode, each on a fresh mini-batch.
    pub updates_per_instance: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 100,
            node_sizes: vec![20, 30, 40, 50, 60],
            node_density: DEFAULT_NODE_DENSITY,
            link_range: 1.0,
            conflict_model: ConflictModel::UnitDisk,
            interference_range: 1.0,
            traffic: TrafficConfig::default(),
            horizon: 1000,
            scheduler: SchedulerKind::Greedy,
            gnn: GnnConfig::default(),
            adam: AdamConfig::default(),
            replay_capacity: 64,
            batch_size: 8,
            updates_per_instance: 1,
            seed: 0,
        }
    }
}

pub struct TrainReport {
    pub params: GnnParams,
    /// Mini-batch loss of every Adam update, in order.
    pub losses: Vec<f64>,
}

/// Runs the full training loop. Deterministic in `cfg.seed`.
pub fn train(cfg: &TrainConfig) -> Result<TrainReport> {
    let mut rng = stream_rng(cfg.seed, "train", &[]);
    let mut params = GnnParams::init(&cfg.gnn, derive_seed(cfg.seed, "train-init", &[]));
    let mut state = AdamState::new(&params);
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity);
    let mut losses = Vec::with_capacity(cfg.episodes);

    for k in 0..cfg.episodes {
        let num_nodes = cfg.node_sizes[rng.random_range(0..cfg.node_sizes.len())];
        let topo = TopologyConfig {
            num_nodes,
            node_density: cfg.node_density,
            link_range: cfg.link_range,
            conflict_model: cfg.conflict_model,
            interference_range: cfg.interference_range,
            seed: derive_seed(cfg.seed, "train-topology", &[k as u64]),
        };
        let net = generate_network(&topo)?;
        let episode = sample_episode(
            &net,
            &cfg.traffic,
            cfg.horizon,
            derive_seed(cfg.seed, "train-traffic", &[k as u64]),
        )?;
        let lap = net.conflicts.laplacian();

        let duty = predict(&params, &lap);
        let bias = bias_table_for_policy(
            &net.graph,
            DistancePolicy::DutyInverse,
            Some(&duty),
            Some(&episode.rates),
        )?;
        let (metrics, _) = run_episode(&net, &episode, &bias, cfg.scheduler, cfg.horizon)?;

        let mut target = Array2::zeros((lap.dim(), 2));
        for (e, &f) in metrics.schedule_freq.iter().enumerate() {
            target[[e, 0]] = f;
            target[[e, 1]] = 1.0 - f;
        }
        buffer.push(ReplayTuple {
            laplacian: lap,
            target,
        });

        for _ in 0..cfg.updates_per_instance.max(1) {
            let batch = buffer.sample_indices(&mut rng, cfg.batch_size);
            let scale = 1.0 / batch.len() as f64;
            let mut grads = GnnGradients::zeros_like(&params);
            let mut batch_loss = 0.0;
            for &i in &batch {
                let tuple = buffer.get(i);
                let cache = forward(&params, &tuple.laplacian);
                batch_loss += loss(&cache.output, &tuple.target);
                let g = backward(
                    &params,
                    &tuple.laplacian,
                    &cache,
                    &loss_grad(&cache.output, &tuple.target),
                );
                grads.add_scaled(&g, scale);
            }
            losses.push(batch_loss * scale);
            adam_step(&mut params, &grads, &mut state, &cfg.adam);
        }
    }

    Ok(TrainReport { params, losses })
}

//! Run configuration: a flat key-value document with CLI flag overrides.
//!
//! Every key can live in a JSON config file or be set by the flag of the
//! same name; flags win. Paths and the thread count never enter the
//! config hash, so reruns into different files are recognizably the same
//! experiment.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use bpsim_core::gnn::{AdamConfig, GnnConfig};
use bpsim_core::{
    BenchmarkConfig, ConflictModel, DistancePolicy, SchedulerKind, TrafficConfig, TrainConfig,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads for benchmark grids; 0 means all cores.
    pub jobs: usize,
    pub nodes: Vec<usize>,
    pub node_density: f64,
    pub link_range: f64,
    pub conflict_model: ConflictModel,
    pub interference_range: f64,
    pub policy: Vec<DistancePolicy>,
    pub slots: usize,
    pub scheduler: SchedulerKind,
    pub instances: usize,
    pub episodes: usize,
    pub lambda_sweep: Option<Vec<f64>>,
    pub flow_min_frac: f64,
    pub flow_max_frac: f64,
    pub arrival_min: f64,
    pub arrival_max: f64,
    pub link_rate_min: f64,
    pub link_rate_max: f64,
    pub link_rate_noise: f64,
    pub train_episodes: usize,
    pub train_sizes: Vec<usize>,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub updates_per_instance: usize,
    pub learning_rate: f64,
    pub gnn_layers: usize,
    pub hidden_width: usize,
    pub leaky_slope: f64,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub trace_out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let bench = BenchmarkConfig::default();
        let traffic = TrafficConfig::default();
        let train = TrainConfig::default();
        let gnn = GnnConfig::default();
        let adam = AdamConfig::default();
        RunConfig {
            seed: 0,
            jobs: 0,
            nodes: bench.node_sizes,
            node_density: bench.node_density,
            link_range: bench.link_range,
            conflict_model: bench.conflict_model,
            interference_range: bench.interference_range,
            policy: bench.policies,
            slots: bench.horizon,
            scheduler: bench.scheduler,
            instances: bench.instances_per_size,
            episodes: bench.episodes_per_instance,
            lambda_sweep: None,
            flow_min_frac: traffic.flow_count_min_frac,
            flow_max_frac: traffic.flow_count_max_frac,
            arrival_min: traffic.arrival_rate_range.0,
            arrival_max: traffic.arrival_rate_range.1,
            link_rate_min: traffic.link_rate_range.0,
            link_rate_max: traffic.link_rate_range.1,
            link_rate_noise: traffic.link_rate_noise_sd,
            train_episodes: train.episodes,
            train_sizes: train.node_sizes,
            replay_capacity: train.replay_capacity,
            batch_size: train.batch_size,
            updates_per_instance: train.updates_per_instance,
            learning_rate: adam.learning_rate,
            gnn_layers: gnn.layers,
            hidden_width: gnn.hidden_width,
            leaky_slope: gnn.leaky_slope,
            checkpoint: None,
            out: None,
            trace_out: None,
        }
    }
}

/// Flag-set mirror of [`RunConfig`]; unset flags leave the config alone.
#[derive(Clone, Debug, Default, Args)]
pub struct Overrides {
    /// Master random seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for benchmark grids (0 = all cores)
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Network sizes, e.g. 20,40,60 (episode and inspect-bias take one)
    #[arg(long, value_delimiter = ',')]
    pub nodes: Option<Vec<usize>>,
    /// Nodes per unit area
    #[arg(long)]
    pub node_density: Option<f64>,
    /// Connectivity radius
    #[arg(long)]
    pub link_range: Option<f64>,
    /// interface or unitdisk
    #[arg(long)]
    pub conflict_model: Option<ConflictModel>,
    /// Interference radius under unitdisk
    #[arg(long)]
    pub interference_range: Option<f64>,
    /// Routing policies: bp, sp-hop, edr-<k>, sp-rate-<k>, sp-duty, sp-duty-rate
    #[arg(long, value_delimiter = ',')]
    pub policy: Option<Vec<DistancePolicy>>,
    /// Slots per episode
    #[arg(long)]
    pub slots: Option<usize>,
    /// greedy, local-greedy, or exact
    #[arg(long)]
    pub scheduler: Option<SchedulerKind>,
    /// Random networks per size
    #[arg(long)]
    pub instances: Option<usize>,
    /// Episodes per network
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Repeat the grid once per uniform arrival rate, e.g. 0.05,0.45
    #[arg(long, value_delimiter = ',')]
    pub lambda_sweep: Option<Vec<f64>>,
    /// Flow count lower bound as a fraction of nodes
    #[arg(long)]
    pub flow_min_frac: Option<f64>,
    /// Flow count upper bound as a fraction of nodes
    #[arg(long)]
    pub flow_max_frac: Option<f64>,
    /// Per-flow arrival rate range, lower end
    #[arg(long)]
    pub arrival_min: Option<f64>,
    /// Per-flow arrival rate range, upper end
    #[arg(long)]
    pub arrival_max: Option<f64>,
    /// Long-term link rate range, lower end
    #[arg(long)]
    pub link_rate_min: Option<f64>,
    /// Long-term link rate range, upper end
    #[arg(long)]
    pub link_rate_max: Option<f64>,
    /// Per-slot link rate noise (standard deviation)
    #[arg(long)]
    pub link_rate_noise: Option<f64>,
    /// Training episodes
    #[arg(long)]
    pub train_episodes: Option<usize>,
    /// Network sizes sampled during training
    #[arg(long, value_delimiter = ',')]
    pub train_sizes: Option<Vec<usize>>,
    /// Replay buffer capacity
    #[arg(long)]
    pub replay_capacity: Option<usize>,
    /// Mini-batch size
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Optimizer updates per training episode
    #[arg(long)]
    pub updates_per_instance: Option<usize>,
    /// Adam learning rate
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Graph-conv layers
    #[arg(long)]
    pub gnn_layers: Option<usize>,
    /// Hidden layer width
    #[arg(long)]
    pub hidden_width: Option<usize>,
    /// Leaky ReLU negative slope
    #[arg(long)]
    pub leaky_slope: Option<f64>,
    /// Model checkpoint path (written by train, read elsewhere)
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Output table path
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-slot trace path (episode only)
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
}

macro_rules! take {
    ($cfg:ident, $o:ident, $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $o.$field { $cfg.$field = v; })+
    };
}

impl RunConfig {
    pub fn apply(&mut self, o: Overrides) {
        take!(
            self, o, seed, jobs, nodes, node_density, link_range, conflict_model,
            interference_range, policy, slots, scheduler, instances, episodes, flow_min_frac,
            flow_max_frac, arrival_min, arrival_max, link_rate_min, link_rate_max,
            link_rate_noise, train_episodes, train_sizes, replay_capacity, batch_size,
            updates_per_instance, learning_rate, gnn_layers, hidden_width, leaky_slope,
        );
        if o.lambda_sweep.is_some() {
            self.lambda_sweep = o.lambda_sweep;
        }
        if o.checkpoint.is_some() {
            self.checkpoint = o.checkpoint;
        }
        if o.out.is_some() {
            self.out = o.out;
        }
        if o.trace_out.is_some() {
            self.trace_out = o.trace_out;
        }
    }

    pub fn traffic(&self) -> TrafficConfig {
        TrafficConfig {
            flow_count_min_frac: self.flow_min_frac,
            flow_count_max_frac: self.flow_max_frac,
            arrival_rate_range: (self.arrival_min, self.arrival_max),
            link_rate_range: (self.link_rate_min, self.link_rate_max),
            link_rate_noise_sd: self.link_rate_noise,
        }
    }

    pub fn benchmark(&self) -> BenchmarkConfig {
        BenchmarkConfig {
            node_sizes: self.nodes.clone(),
            instances_per_size: self.instances,
            episodes_per_instance: self.episodes,
            policies: self.policy.clone(),
            scheduler: self.scheduler,
            horizon: self.slots,
            node_density: self.node_density,
            link_range: self.link_range,
            conflict_model: self.conflict_model,
            interference_range: self.interference_range,
            traffic: self.traffic(),
            lambda_sweep: self.lambda_sweep.clone(),
            seed: self.seed,
        }
    }

    pub fn training(&self) -> TrainConfig {
        TrainConfig {
            episodes: self.train_episodes,
            node_sizes: self.train_sizes.clone(),
            node_density: self.node_density,
            link_range: self.link_range,
            conflict_model: self.conflict_model,
            interference_range: self.interference_range,
            traffic: self.traffic(),
            horizon: self.slots,
            scheduler: self.scheduler,
            gnn: GnnConfig {
                layers: self.gnn_layers,
                hidden_width: self.hidden_width,
                leaky_slope: self.leaky_slope,
            },
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                ..AdamConfig::default()
            },
            replay_capacity: self.replay_capacity,
            batch_size: self.batch_size,
            updates_per_instance: self.updates_per_instance,
            seed: self.seed,
        }
    }

    /// Short digest of the experiment parameters. Output paths and the
    /// thread count are excluded: they do not change any result.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.jobs = 0;
        canon.checkpoint = None;
        canon.out = None;
        canon.trace_out = None;
        let json = serde_json::to_string(&canon).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut hex = String::with_capacity(12);
        for byte in &digest[..6] {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    /// Comment line carried at the top of every output table.
    pub fn metadata_line(&self) -> String {
        format!(
            "# bpsim v{} seed={} config={}",
            env!("CARGO_PKG_VERSION"),
            self.seed,
            self.hash()
        )
    }
}

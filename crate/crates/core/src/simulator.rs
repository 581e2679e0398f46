//! Slot-level network simulation and benchmark orchestration.
//!
//! Every slot runs the same cycle: exogenous arrivals enter their source
//! queues, each link picks its best commodity and weight, the scheduler
//! activates an independent set, and scheduled links move packets. A
//! packet delivered in its arrival slot has delay zero; packets still
//! queued when the run ends are charged the remaining horizon.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bias::{bias_table_for_policy, BiasTable, DistancePolicy};
use crate::error::{Error, Result};
use crate::gnn::{predict, DutyCycles, GnnParams};
use crate::rng::derive_seed;
use crate::routing::{
    apply_arrivals, commit_transmissions, link_decisions, QueueState, SlotTransmissions,
};
use crate::scheduler::{build_utilities, solve, SchedulerKind};
use crate::topology::{generate_network, ConflictModel, NetworkInstance, TopologyConfig};
use crate::traffic::{sample_episode, ArrivalMatrix, Episode, TrafficConfig};

/// Everything observable about one slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotRecord {
    /// Links activated this slot, ascending.
    pub scheduled: Vec<u32>,
    pub transmissions: SlotTransmissions,
    /// Network-wide backlog after the slot's moves.
    pub total_backlog: u64,
}

/// Full per-slot history of one episode run.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotTrace {
    pub horizon: usize,
    pub num_links: usize,
    pub arrivals: ArrivalMatrix,
    pub slots: Vec<SlotRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    /// Mean packet delay in slots, counting every arrived packet;
    /// undelivered packets are charged `horizon - birth`.
    pub mean_delay: f64,
    /// Delivered fraction of arrived packets (1.0 when nothing arrived).
    pub delivery_rate: f64,
    pub arrived: u64,
    pub delivered: u64,
    /// Total backlog after each slot.
    pub backlog_trace: Vec<u64>,
    /// Fraction of slots each link was scheduled.
    pub schedule_freq: Vec<f64>,
}

/// Runs `horizon` slots of one episode under the given bias table and
/// scheduler. Packet conservation and schedule independence are checked
/// every slot; a breach is a hard error, not a warning.
pub fn run_episode(
    net: &NetworkInstance,
    episode: &Episode,
    bias: &BiasTable,
    scheduler: SchedulerKind,
    horizon: usize,
) -> Result<(EpisodeMetrics, SlotTrace)> {
    let n = net.graph.num_nodes();
    let m = net.graph.num_links();
    if bias.num_nodes() != n {
        return Err(Error::ShapeMismatch {
            what: "bias table",
            expected: n,
            got: bias.num_nodes(),
        });
    }
    bias.validate()?;
    if episode.rates.num_links() != m {
        return Err(Error::ShapeMismatch {
            what: "link rates",
            expected: m,
            got: episode.rates.num_links(),
        });
    }
    if episode.arrivals.horizon() < horizon || episode.rates.horizon() < horizon {
        return Err(Error::ShapeMismatch {
            what: "episode horizon",
            expected: horizon,
            got: episode.arrivals.horizon().min(episode.rates.horizon()),
        });
    }
    for f in &episode.flows {
        if f.src >= n || f.dst >= n || f.src == f.dst {
            return Err(Error::MalformedArtifact {
                kind: "flow list",
                detail: format!("bad flow {} -> {}", f.src, f.dst),
            });
        }
    }

    let mut queues = QueueState::new(n);
    let mut slots = Vec::with_capacity(horizon);
    let mut arrived: u64 = 0;
    let mut delivered: u64 = 0;
    let mut rates_at = vec![0u32; m];

    for t in 0..horizon {
        arrived += apply_arrivals(&mut queues, &episode.flows, &episode.arrivals, t);

        let decisions = link_decisions(&net.graph, &queues, bias);
        for (e, r) in rates_at.iter_mut().enumerate() {
            *r = episode.rates.realized(e, t);
        }
        let utilities = build_utilities(&decisions, &rates_at);
        let schedule = solve(scheduler, &net.conflicts, &utilities)?;
        if !net.conflicts.is_independent(&schedule) {
            return Err(Error::InvariantBreach {
                slot: t,
                what: format!("schedule {schedule:?} is not an independent set"),
            });
        }

        let tx = commit_transmissions(&mut queues, &schedule, &decisions, &rates_at);
        delivered += tx.deliveries.len() as u64;
        if arrived != delivered + queues.total_queued() {
            return Err(Error::InvariantBreach {
                slot: t,
                what: format!(
                    "packet count drifted: {arrived} arrived != {delivered} delivered + {} queued",
                    queues.total_queued()
                ),
            });
        }

        slots.push(SlotRecord {
            scheduled: schedule.iter().map(|&e| e as u32).collect(),
            transmissions: tx,
            total_backlog: queues.total_queued(),
        });
    }

    let trace = SlotTrace {
        horizon,
        num_links: m,
        arrivals: episode.arrivals.clone(),
        slots,
    };
    let metrics = compute_metrics(&trace);
    Ok((metrics, trace))
}

/// Derives episode metrics from a recorded trace.
pub fn compute_metrics(trace: &SlotTrace) -> EpisodeMetrics {
    let horizon = trace.horizon;
    let num_flows = trace.arrivals.num_flows();

    let mut arrived: u64 = 0;
    for f in 0..num_flows {
        for t in 0..horizon {
            arrived += u64::from(trace.arrivals.count(f, t));
        }
    }

    let mut delivered: u64 = 0;
    let mut delay_sum: u64 = 0;
    // delivered_births[flow * horizon + birth] counts delivered packets by cohort.
    let mut delivered_births = vec![0u32; num_flows * horizon];
    let mut backlog_trace = Vec::with_capacity(horizon);
    let mut sched_counts = vec![0u64; trace.num_links];

    for (t, slot) in trace.slots.iter().enumerate() {
        for d in &slot.transmissions.deliveries {
            delivered += 1;
            delay_sum += t as u64 - u64::from(d.birth_slot);
            delivered_births[d.flow as usize * horizon + d.birth_slot as usize] += 1;
        }
        for &e in &slot.scheduled {
            sched_counts[e as usize] += 1;
        }
        backlog_trace.push(slot.total_backlog);
    }

    // Undelivered packets are charged the slots they sat out.
    for f in 0..num_flows {
        for t in 0..horizon {
            let born = u64::from(trace.arrivals.count(f, t));
            let done = u64::from(delivered_births[f * horizon + t]);
            debug_assert!(done <= born);
            delay_sum += (born - done) * (horizon as u64 - t as u64);
        }
    }

    let (mean_delay, delivery_rate) = if arrived == 0 {
        (0.0, 1.0)
    } else {
        (delay_sum as f64 / arrived as f64, delivered as f64 / arrived as f64)
    };
    let schedule_freq = sched_counts
        .iter()
        .map(|&c| c as f64 / horizon.max(1) as f64)
        .collect();

    EpisodeMetrics {
        mean_delay,
        delivery_rate,
        arrived,
        delivered,
        backlog_trace,
        schedule_freq,
    }
}

/// Grid of simulation runs: sizes x instances x episodes x policies,
/// optionally swept over a list of uniform arrival rates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub node_sizes: Vec<usize>,
    pub instances_per_size: usize,
    pub episodes_per_instance: usize,
    pub policies: Vec<DistancePolicy>,
    pub scheduler: SchedulerKind,
    pub horizon: usize,
    pub node_density: f64,
    pub link_range: f64,
    pub conflict_model: ConflictModel,
    pub interference_range: f64,
    pub traffic: TrafficConfig,
    /// When set, every flow in a run gets this exact arrival rate; the
    /// whole grid repeats once per listed value.
    pub lambda_sweep: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        let topo = TopologyConfig::default();
        BenchmarkConfig {
            node_sizes: vec![20, 40, 60],
            instances_per_size: 10,
            episodes_per_instance: 10,
            policies: vec![DistancePolicy::None, DistancePolicy::ScaledHop(10.0)],
            scheduler: SchedulerKind::Greedy,
            horizon: 1000,
            node_density: topo.node_density,
            link_range: topo.link_range,
            conflict_model: topo.conflict_model,
            interference_range: topo.interference_range,
            traffic: TrafficConfig::default(),
            lambda_sweep: None,
            seed: 0,
        }
    }
}

/// One (instance, episode, policy) result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub num_nodes: usize,
    pub conflict_model: ConflictModel,
    pub policy: DistancePolicy,
    /// Uniform arrival rate for sweep runs, absent otherwise.
    pub lambda: Option<f64>,
    pub instance: usize,
    pub episode: usize,
    pub episode_seed: u64,
    pub mean_delay: f64,
    pub delivery_rate: f64,
}

/// Runs the whole grid. Every policy sees the same topologies and the
/// same packet arrivals, so rows differ only by routing behavior. Runs
/// are spread across threads; the row order is still deterministic.
pub fn run_benchmark(
    cfg: &BenchmarkConfig,
    gnn: Option<&GnnParams>,
) -> Result<Vec<BenchmarkRow>> {
    if cfg.policies.is_empty() {
        return Err(Error::MalformedArtifact {
            kind: "benchmark config",
            detail: "no policies listed".into(),
        });
    }
    let needs_duty = cfg.policies.iter().any(|p| p.needs_duty());
    if needs_duty && gnn.is_none() {
        return Err(Error::MissingPolicyInput {
            policy: "duty-based policy",
            missing: "trained model parameters",
        });
    }

    // Topologies are shared across episodes and policies; duty cycles are
    // a function of the topology alone, so predict once per instance.
    let mut instances: Vec<(usize, usize, NetworkInstance, Option<DutyCycles>)> = Vec::new();
    for &num_nodes in &cfg.node_sizes {
        for inst in 0..cfg.instances_per_size {
            let topo = TopologyConfig {
                num_nodes,
                node_density: cfg.node_density,
                link_range: cfg.link_range,
                conflict_model: cfg.conflict_model,
                interference_range: cfg.interference_range,
                seed: derive_seed(cfg.seed, "bench-topology", &[num_nodes as u64, inst as u64]),
            };
            let net = generate_network(&topo)?;
            let duty = match gnn {
                Some(params) if needs_duty => Some(predict(params, &net.conflicts.laplacian())),
                _ => None,
            };
            instances.push((num_nodes, inst, net, duty));
        }
    }

    let lambdas: Vec<Option<f64>> = match &cfg.lambda_sweep {
        Some(values) => values.iter().map(|&l| Some(l)).collect(),
        None => vec![None],
    };

    let mut tasks = Vec::new();
    for (idx, _) in instances.iter().enumerate() {
        for (lambda_idx, _) in lambdas.iter().enumerate() {
            for ep in 0..cfg.episodes_per_instance {
                tasks.push((idx, lambda_idx, ep));
            }
        }
    }

    let nested: Result<Vec<Vec<BenchmarkRow>>> = tasks
        .par_iter()
        .map(|&(idx, lambda_idx, ep)| {
            let (num_nodes, inst, ref net, ref duty) = instances[idx];
            let lambda = lambdas[lambda_idx];
            let mut traffic = cfg.traffic.clone();
            if let Some(l) = lambda {
                traffic.arrival_rate_range = (l, l);
            }
            let episode_seed = derive_seed(
                cfg.seed,
                "bench-episode",
                &[num_nodes as u64, inst as u64, lambda_idx as u64, ep as u64],
            );
            let episode = sample_episode(net, &traffic, cfg.horizon, episode_seed)?;
            let mut rows = Vec::with_capacity(cfg.policies.len());
            for &policy in &cfg.policies {
                let bias = bias_table_for_policy(
                    &net.graph,
                    policy,
                    duty.as_ref(),
                    Some(&episode.rates),
                )?;
                let (metrics, _) = run_episode(net, &episode, &bias, cfg.scheduler, cfg.horizon)?;
                rows.push(BenchmarkRow {
                    num_nodes,
                    conflict_model: cfg.conflict_model,
                    policy,
                    lambda,
                    instance: inst,
                    episode: ep,
                    episode_seed,
                    mean_delay: metrics.mean_delay,
                    delivery_rate: metrics.delivery_rate,
                });
            }
            Ok(rows)
        })
        .collect();

    Ok(nested?.into_iter().flatten().collect())
}

/// Aggregate of one (size, policy, lambda) cell of the benchmark grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub num_nodes: usize,
    pub conflict_model: ConflictModel,
    pub policy: DistancePolicy,
    pub lambda: Option<f64>,
    pub instances: usize,
    pub episodes: usize,
    pub mean_delay: f64,
    /// Standard error of the per-instance mean delays.
    pub se_delay: f64,
    pub mean_delivery_rate: f64,
    pub se_delivery_rate: f64,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Collapses rows to per-cell means. Episodes are first averaged within
/// each instance; the reported spread is across instances, which is the
/// unit of replication.
pub fn summarize(rows: &[BenchmarkRow]) -> Vec<SummaryRow> {
    use std::collections::BTreeMap;
    type CellKey = (usize, String, String, Option<u64>);
    // cell -> instance -> (delay sum, delivery sum, count)
    let mut cells: BTreeMap<CellKey, BTreeMap<usize, (f64, f64, usize)>> = BTreeMap::new();
    let mut models: BTreeMap<CellKey, (ConflictModel, DistancePolicy, Option<f64>)> =
        BTreeMap::new();
    for row in rows {
        let key = (
            row.num_nodes,
            row.policy.to_string(),
            row.conflict_model.to_string(),
            row.lambda.map(f64::to_bits),
        );
        let per_inst = cells.entry(key.clone()).or_default();
        let slot = per_inst.entry(row.instance).or_insert((0.0, 0.0, 0));
        slot.0 += row.mean_delay;
        slot.1 += row.delivery_rate;
        slot.2 += 1;
        models
            .entry(key)
            .or_insert((row.conflict_model, row.policy, row.lambda));
    }

    cells
        .into_iter()
        .map(|(key, per_inst)| {
            let (model, policy, lambda) = models[&key];
            let episodes: usize = per_inst.values().map(|v| v.2).sum();
            let delays: Vec<f64> = per_inst.values().map(|v| v.0 / v.2 as f64).collect();
            let rates: Vec<f64> = per_inst.values().map(|v| v.1 / v.2 as f64).collect();
            let (mean_delay, se_delay) = mean_and_se(&delays);
            let (mean_delivery_rate, se_delivery_rate) = mean_and_se(&rates);
            SummaryRow {
                num_nodes: key.0,
                conflict_model: model,
                policy,
                lambda,
                instances: per_inst.len(),
                episodes,
                mean_delay,
                se_delay,
                mean_delivery_rate,
                se_delivery_rate,
            }
        })
        .collect()
}

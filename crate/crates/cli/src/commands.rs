//! The four entry points behind the subcommands. Setup problems (bad
//! paths, missing model, impossible parameter combinations) are config
//! errors; anything that fails once simulation work has started is a
//! runtime error.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use bpsim_core::gnn::{load_checkpoint, predict, save_checkpoint};
use bpsim_core::topology::NetworkInstance;
use bpsim_core::bias::link_distances;
use bpsim_core::rng::derive_seed;
use bpsim_core::{
    bias_table_for_policy, generate_network, run_benchmark, run_episode, sample_episode,
    summarize, train, DistancePolicy, DutyCycles, GnnParams, SummaryRow, TopologyConfig,
};

use crate::config::RunConfig;
use crate::{CliError, Result};

fn create(path: &Path) -> Result<File> {
    File::create(path)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Output file handle with the metadata comment already written.
fn table_file(path: &Path, cfg: &RunConfig) -> Result<File> {
    let mut f = create(path)?;
    writeln!(f, "{}", cfg.metadata_line()).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(f)
}

fn require_out(cfg: &RunConfig, what: &str) -> Result<PathBuf> {
    cfg.out
        .clone()
        .ok_or_else(|| CliError::Config(format!("{what} needs --out")))
}

/// The single network size commands like `episode` operate on.
fn single_size(cfg: &RunConfig, cmd: &str) -> Result<usize> {
    match cfg.nodes.as_slice() {
        [n] => Ok(*n),
        other => Err(CliError::Config(format!(
            "{cmd} runs one network size; --nodes lists {}",
            other.len()
        ))),
    }
}

fn single_policy(cfg: &RunConfig, cmd: &str) -> Result<DistancePolicy> {
    match cfg.policy.as_slice() {
        [p] => Ok(*p),
        other => Err(CliError::Config(format!(
            "{cmd} takes one policy; --policy lists {}",
            other.len()
        ))),
    }
}

/// Loads the checkpoint when any requested policy needs duty cycles.
/// A missing or unreadable checkpoint is a config error: the run could
/// never have produced results.
fn model_for(cfg: &RunConfig, policies: &[DistancePolicy]) -> Result<Option<GnnParams>> {
    if !policies.iter().any(|p| p.needs_duty()) {
        return Ok(None);
    }
    let path = cfg.checkpoint.as_ref().ok_or_else(|| {
        CliError::Config("duty-cycle policies need --checkpoint".to_string())
    })?;
    load_checkpoint(path)
        .map(Some)
        .map_err(|e| CliError::Config(format!("checkpoint {}: {e}", path.display())))
}

fn duty_for(model: Option<&GnnParams>, net: &NetworkInstance) -> Option<DutyCycles> {
    model.map(|params| predict(params, &net.conflicts.laplacian()))
}

fn thread_pool(cfg: &RunConfig) {
    if cfg.jobs > 0 {
        // Ignored when a global pool already exists (tests share a process).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build_global();
    }
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let ckpt_path = cfg.checkpoint.as_ref().ok_or_else(|| {
        CliError::Config("train writes the model to --checkpoint".to_string())
    })?;
    let report = train(&cfg.training())?;
    save_checkpoint(ckpt_path, &report.params)?;

    let curve_path = cfg
        .out
        .clone()
        .unwrap_or_else(|| ckpt_path.with_extension("loss.csv"));
    let mut f = table_file(&curve_path, cfg)?;
    writeln!(f, "episode,update,loss").map_err(|e| CliError::Runtime(e.to_string()))?;
    let per_episode = cfg.updates_per_instance.max(1);
    for (i, loss) in report.losses.iter().enumerate() {
        writeln!(f, "{},{},{}", i / per_episode, i % per_episode, loss)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }

    let tail = report.losses.len().min(20 * per_episode);
    if tail > 0 {
        let recent = &report.losses[report.losses.len() - tail..];
        let mean = recent.iter().sum::<f64>() / tail as f64;
        println!(
            "trained {} episodes ({} updates), recent loss {mean:.4}",
            cfg.train_episodes,
            report.losses.len()
        );
    } else {
        println!("no training episodes; checkpoint holds the initial parameters");
    }
    println!("checkpoint: {}", ckpt_path.display());
    println!("loss curve: {}", curve_path.display());
    Ok(())
}

pub fn cmd_benchmark(cfg: &RunConfig) -> Result<()> {
    let out = require_out(cfg, "benchmark")?;
    if cfg.policy.is_empty() {
        return Err(CliError::Config("benchmark needs at least one --policy".to_string()));
    }
    if cfg.nodes.is_empty() {
        return Err(CliError::Config("benchmark needs at least one network size".to_string()));
    }
    let model = model_for(cfg, &cfg.policy)?;
    thread_pool(cfg);

    let rows = run_benchmark(&cfg.benchmark(), model.as_ref())?;
    let mut writer = csv::Writer::from_writer(table_file(&out, cfg)?);
    for row in &rows {
        writer.serialize(row).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::Runtime(e.to_string()))?;

    let summary = summarize(&rows);
    let summary_path = sibling(&out, "-summary");
    let mut writer = csv::Writer::from_writer(table_file(&summary_path, cfg)?);
    for row in &summary {
        writer.serialize(row).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::Runtime(e.to_string()))?;

    print_summary(&summary);
    println!("{} episode rows: {}", rows.len(), out.display());
    println!("{} summary rows: {}", summary.len(), summary_path.display());
    Ok(())
}

/// `results.csv` -> `results-summary.csv`, keeping the directory.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn print_summary(rows: &[SummaryRow]) {
    println!(
        "{:>6} {:>9} {:>14} {:>7} {:>5} {:>5} {:>10} {:>8} {:>9} {:>8}",
        "nodes", "model", "policy", "lambda", "inst", "eps", "delay", "se", "delivery", "se"
    );
    for r in rows {
        let lambda = r.lambda.map_or("-".to_string(), |l| format!("{l}"));
        println!(
            "{:>6} {:>9} {:>14} {:>7} {:>5} {:>5} {:>10.2} {:>8.2} {:>9.4} {:>8.4}",
            r.num_nodes,
            r.conflict_model.to_string(),
            r.policy.to_string(),
            lambda,
            r.instances,
            r.episodes,
            r.mean_delay,
            r.se_delay,
            r.mean_delivery_rate,
            r.se_delivery_rate
        );
    }
}

/// Builds the instance and episode both single-run commands share.
fn single_instance(cfg: &RunConfig, cmd: &str) -> Result<(NetworkInstance, bpsim_core::Episode)> {
    let num_nodes = single_size(cfg, cmd)?;
    let topo = TopologyConfig {
        num_nodes,
        node_density: cfg.node_density,
        link_range: cfg.link_range,
        conflict_model: cfg.conflict_model,
        interference_range: cfg.interference_range,
        seed: derive_seed(cfg.seed, "cli-topology", &[num_nodes as u64]),
    };
    let net = generate_network(&topo)?;
    let episode_seed = derive_seed(cfg.seed, "cli-episode", &[num_nodes as u64]);
    let episode = sample_episode(&net, &cfg.traffic(), cfg.slots, episode_seed)?;
    Ok((net, episode))
}

pub fn cmd_episode(cfg: &RunConfig) -> Result<()> {
    let policy = single_policy(cfg, "episode")?;
    let model = model_for(cfg, &[policy])?;
    let (net, episode) = single_instance(cfg, "episode")?;
    let duty = duty_for(model.as_ref(), &net);
    let bias = bias_table_for_policy(&net.graph, policy, duty.as_ref(), Some(&episode.rates))?;
    let (metrics, trace) = run_episode(&net, &episode, &bias, cfg.scheduler, cfg.slots)?;

    println!(
        "nodes={} links={} flows={} policy={} scheduler={} slots={}",
        net.num_nodes(),
        net.num_links(),
        episode.flows.len(),
        policy,
        cfg.scheduler,
        cfg.slots
    );
    println!(
        "arrived={} delivered={} delivery-rate={:.6} mean-delay={:.4}",
        metrics.arrived, metrics.delivered, metrics.delivery_rate, metrics.mean_delay
    );

    if let Some(trace_path) = &cfg.trace_out {
        let mut f = table_file(trace_path, cfg)?;
        writeln!(f, "slot,scheduled,moved,delivered,backlog")
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        for (t, slot) in trace.slots.iter().enumerate() {
            let scheduled: Vec<String> =
                slot.scheduled.iter().map(|e| e.to_string()).collect();
            let moved: u32 = slot.transmissions.moves.iter().map(|m| m.moved).sum();
            writeln!(
                f,
                "{t},{},{moved},{},{}",
                scheduled.join(" "),
                slot.transmissions.deliveries.len(),
                slot.total_backlog
            )
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        println!("trace: {}", trace_path.display());
    }
    Ok(())
}

pub fn cmd_inspect_bias(cfg: &RunConfig) -> Result<()> {
    let out = require_out(cfg, "inspect-bias")?;
    let policy = single_policy(cfg, "inspect-bias")?;
    // With a checkpoint on hand the duty column is filled for any policy.
    let model = match (&cfg.checkpoint, policy.needs_duty()) {
        (Some(_), _) => model_for(cfg, &[DistancePolicy::DutyInverse])?,
        (None, true) => model_for(cfg, &[policy])?,
        (None, false) => None,
    };
    let (net, episode) = single_instance(cfg, "inspect-bias")?;
    let duty = duty_for(model.as_ref(), &net);
    let bias = bias_table_for_policy(&net.graph, policy, duty.as_ref(), Some(&episode.rates))?;

    let mut f = table_file(&out, cfg)?;
    bias.write_csv(&mut f)?;

    let distances = link_distances(policy, net.num_links(), duty.as_ref(), Some(&episode.rates))?;
    let links_path = sibling(&out, "-links");
    let mut f = table_file(&links_path, cfg)?;
    writeln!(f, "link,source,target,distance,duty").map_err(|e| CliError::Runtime(e.to_string()))?;
    for e in 0..net.num_links() {
        let (a, b) = net.graph.endpoints(e);
        let duty_cell = duty
            .as_ref()
            .map_or(String::new(), |d| d.value(e).to_string());
        writeln!(f, "{e},{a},{b},{},{duty_cell}", distances[e])
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }

    println!(
        "policy={} nodes={} links={}",
        policy,
        net.num_nodes(),
        net.num_links()
    );
    println!("bias table: {}", out.display());
    println!("per-link distances: {}", links_path.display());
    Ok(())
}

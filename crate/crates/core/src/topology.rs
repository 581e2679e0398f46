//! Random geometric network instances and their conflict graphs.
//!
//! Nodes are dropped uniformly in a square whose area keeps node density
//! constant, and two nodes are linked iff they are within `link_range`.
//! Interference between links is captured by a conflict graph over link
//! ids under one of two models: `Interface` (links conflict when they
//! share an endpoint) or `UnitDisk` (links conflict when any endpoints
//! are within `interference_range`).

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

pub type NodeId = usize;
pub type LinkId = usize;

/// How two links come to interfere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConflictModel {
    /// Links conflict iff they share an endpoint (line graph of the network).
    Interface,
    /// Links conflict iff some endpoint of one is within
    /// `interference_range` of some endpoint of the other.
    UnitDisk,
}

impl std::fmt::Display for ConflictModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConflictModel::Interface => write!(f, "interface"),
            ConflictModel::UnitDisk => write!(f, "unitdisk"),
        }
    }
}

impl std::str::FromStr for ConflictModel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "interface" => Ok(ConflictModel::Interface),
            "unitdisk" => Ok(ConflictModel::UnitDisk),
            other => Err(format!(
                "unknown conflict model {other:?} (expected \"interface\" or \"unitdisk\")"
            )),
        }
    }
}

/// Nodes per unit area used throughout the benchmark protocol.
pub const DEFAULT_NODE_DENSITY: f64 = 8.0 / std::f64::consts::PI;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TopologyConfig {
    pub num_nodes: usize,
    /// Nodes per unit area; the square's side is `sqrt(num_nodes / density)`.
    pub node_density: f64,
    pub link_range: f64,
    pub conflict_model: ConflictModel,
    /// Only read under [`ConflictModel::UnitDisk`].
    pub interference_range: f64,
    pub seed: u64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            num_nodes: 60,
            node_density: DEFAULT_NODE_DENSITY,
            link_range: 1.0,
            conflict_model: ConflictModel::UnitDisk,
            interference_range: 1.0,
            seed: 0,
        }
    }
}

/// Connected undirected graph embedded in the plane.
///
/// Edges are stored canonically as `(i, j)` with `i < j`, sorted
/// lexicographically; a link id is the edge's index in that order.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectivityGraph {
    positions: Vec<[f64; 2]>,
    edges: Vec<(NodeId, NodeId)>,
    adj: Vec<Vec<(NodeId, LinkId)>>,
}

impl ConnectivityGraph {
    /// Builds a graph from explicit positions and edges.
    ///
    /// Edges may be given in either orientation; they are canonicalized.
    /// Fails on out-of-range ids, self-loops, duplicates, or a
    /// disconnected vertex set.
    pub fn from_parts(positions: Vec<[f64; 2]>, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let n = positions.len();
        let mut canon: Vec<(NodeId, NodeId)> = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(Error::InvalidEdge(a, b));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        if canon.windows(2).any(|w| w[0] == w[1]) {
            let d = canon.windows(2).find(|w| w[0] == w[1]).unwrap()[0];
            return Err(Error::InvalidEdge(d.0, d.1));
        }
        let g = Self::assemble(positions, canon);
        if !g.is_connected() {
            return Err(Error::DisconnectedGraph);
        }
        Ok(g)
    }

    fn assemble(positions: Vec<[f64; 2]>, edges: Vec<(NodeId, NodeId)>) -> Self {
        let mut adj = vec![Vec::new(); positions.len()];
        for (id, &(i, j)) in edges.iter().enumerate() {
            adj[i].push((j, id));
            adj[j].push((i, id));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        ConnectivityGraph {
            positions,
            edges,
            adj,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn num_links(&self) -> usize {
        self.edges.len()
    }

    pub fn position(&self, i: NodeId) -> [f64; 2] {
        self.positions[i]
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    /// Canonical `(i, j)` endpoints, `i < j`.
    pub fn endpoints(&self, link: LinkId) -> (NodeId, NodeId) {
        self.edges[link]
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    /// Neighbors of `i` with the connecting link id, sorted by neighbor.
    pub fn neighbors(&self, i: NodeId) -> &[(NodeId, LinkId)] {
        &self.adj[i]
    }

    pub fn degree(&self, i: NodeId) -> usize {
        self.adj[i].len()
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edges.len() as f64 / self.positions.len() as f64
    }

    pub fn link_between(&self, i: NodeId, j: NodeId) -> Option<LinkId> {
        self.adj[i]
            .binary_search_by_key(&j, |&(nbr, _)| nbr)
            .ok()
            .map(|k| self.adj[i][k].1)
    }

    pub fn distance(&self, i: NodeId, j: NodeId) -> f64 {
        let [xi, yi] = self.positions[i];
        let [xj, yj] = self.positions[j];
        ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.positions.len();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for &(j, _) in &self.adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == n
    }
}

/// Conflict relation over link ids, plus its normalized Laplacian.
#[derive(Clone, Debug, PartialEq)]
pub struct ConflictGraph {
    num_links: usize,
    conflicts: Vec<(LinkId, LinkId)>,
    adj: Vec<Vec<LinkId>>,
}

impl ConflictGraph {
    /// Builds from an explicit conflict list (either orientation, no dups).
    pub fn from_parts(num_links: usize, conflicts: &[(LinkId, LinkId)]) -> Result<Self> {
        let mut canon: Vec<(LinkId, LinkId)> = Vec::with_capacity(conflicts.len());
        for &(a, b) in conflicts {
            if a >= num_links || b >= num_links || a == b {
                return Err(Error::InvalidEdge(a, b));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        if canon.windows(2).any(|w| w[0] == w[1]) {
            let d = canon.windows(2).find(|w| w[0] == w[1]).unwrap()[0];
            return Err(Error::InvalidEdge(d.0, d.1));
        }
        Ok(Self::assemble(num_links, canon))
    }

    fn assemble(num_links: usize, conflicts: Vec<(LinkId, LinkId)>) -> Self {
        let mut adj = vec![Vec::new(); num_links];
        for &(a, b) in &conflicts {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        ConflictGraph {
            num_links,
            conflicts,
            adj,
        }
    }

    pub fn num_links(&self) -> usize {
        self.num_links
    }

    pub fn conflicts(&self) -> &[(LinkId, LinkId)] {
        &self.conflicts
    }

    /// Conflicting links of `e`, ascending.
    pub fn neighbors(&self, e: LinkId) -> &[LinkId] {
        &self.adj[e]
    }

    pub fn degree(&self, e: LinkId) -> usize {
        self.adj[e].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn mean_degree(&self) -> f64 {
        if self.num_links == 0 {
            return 0.0;
        }
        2.0 * self.conflicts.len() as f64 / self.num_links as f64
    }

    pub fn are_conflicting(&self, a: LinkId, b: LinkId) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }

    /// True iff no two links in `set` conflict.
    pub fn is_independent(&self, set: &[LinkId]) -> bool {
        let mut marked = vec![false; self.num_links];
        for &e in set {
            marked[e] = true;
        }
        set.iter()
            .all(|&e| self.adj[e].iter().all(|&u| !marked[u]))
    }

    pub fn laplacian(&self) -> NormalizedLaplacian {
        NormalizedLaplacian::new(self)
    }
}

/// Symmetric normalized Laplacian of a conflict graph, `I - D^{-1/2} A D^{-1/2}`,
/// with all-zero rows for isolated vertices.
///
/// Kept as a sparse operator; [`NormalizedLaplacian::apply`] accumulates
/// neighbor terms in ascending id order so a per-vertex local computation
/// can reproduce it bit for bit.
#[derive(Clone, Debug)]
pub struct NormalizedLaplacian {
    adj: Vec<Vec<LinkId>>,
    degrees: Vec<usize>,
    coeffs: Vec<Vec<f64>>,
}

/// Off-diagonal magnitude `1 / sqrt(d_e * d_u)`.
///
/// Exposed so a local, per-vertex computation uses the exact same
/// floating-point expression as the assembled operator.
pub fn laplacian_coeff(deg_e: usize, deg_u: usize) -> f64 {
    1.0 / ((deg_e * deg_u) as f64).sqrt()
}

impl NormalizedLaplacian {
    fn new(cg: &ConflictGraph) -> Self {
        let degrees: Vec<usize> = (0..cg.num_links).map(|e| cg.degree(e)).collect();
        let coeffs = cg
            .adj
            .iter()
            .enumerate()
            .map(|(e, nbrs)| {
                nbrs.iter()
                    .map(|&u| laplacian_coeff(degrees[e], degrees[u]))
                    .collect()
            })
            .collect();
        NormalizedLaplacian {
            adj: cg.adj.clone(),
            degrees,
            coeffs,
        }
    }

    pub fn dim(&self) -> usize {
        self.adj.len()
    }

    pub fn degree(&self, e: LinkId) -> usize {
        self.degrees[e]
    }

    pub fn neighbors(&self, e: LinkId) -> &[LinkId] {
        &self.adj[e]
    }

    /// `L * x` for a feature matrix `x` (one row per vertex).
    pub fn apply(&self, x: &ndarray::Array2<f64>) -> ndarray::Array2<f64> {
        let mut out = ndarray::Array2::zeros(x.raw_dim());
        for e in 0..self.dim() {
            let row = self.apply_row(x, e);
            out.row_mut(e).assign(&row);
        }
        out
    }

    /// Row `e` of `L * x`: zero when isolated, else
    /// `x_e - sum_u coeff(e,u) * x_u` over neighbors in ascending order.
    pub fn apply_row(&self, x: &ndarray::Array2<f64>, e: LinkId) -> ndarray::Array1<f64> {
        let cols = x.ncols();
        let mut out = ndarray::Array1::zeros(cols);
        if self.degrees[e] == 0 {
            return out;
        }
        out.assign(&x.row(e));
        for (k, &u) in self.adj[e].iter().enumerate() {
            let c = self.coeffs[e][k];
            for col in 0..cols {
                out[col] -= c * x[[u, col]];
            }
        }
        out
    }

    /// Dense form, for small instances and spectral checks.
    pub fn to_dense(&self) -> ndarray::Array2<f64> {
        let n = self.dim();
        let mut m = ndarray::Array2::zeros((n, n));
        for e in 0..n {
            if self.degrees[e] == 0 {
                continue;
            }
            m[[e, e]] = 1.0;
            for (k, &u) in self.adj[e].iter().enumerate() {
                m[[e, u]] = -self.coeffs[e][k];
            }
        }
        m
    }
}

/// One sampled topology: the embedded graph plus its conflict structure.
#[derive(Clone, Debug)]
pub struct NetworkInstance {
    pub config: TopologyConfig,
    pub graph: ConnectivityGraph,
    pub conflicts: ConflictGraph,
}

impl NetworkInstance {
    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn num_links(&self) -> usize {
        self.graph.num_links()
    }
}

const MAX_TOPOLOGY_ATTEMPTS: usize = 1000;

/// Samples node positions until the induced link graph is connected, then
/// attaches the conflict graph selected by the config.
pub fn generate_network(cfg: &TopologyConfig) -> Result<NetworkInstance> {
    let n = cfg.num_nodes;
    if n == 0 {
        return Err(Error::InfeasibleTopology {
            num_nodes: 0,
            attempts: 0,
        });
    }
    let side = (n as f64 / cfg.node_density).sqrt();
    let mut rng = stream_rng(cfg.seed, "topology", &[n as u64]);
    for _ in 0..MAX_TOPOLOGY_ATTEMPTS {
        let mut positions = Vec::with_capacity(n);
        for _ in 0..n {
            let x = rng.random_range(0.0..side);
            let y = rng.random_range(0.0..side);
            positions.push([x, y]);
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = positions[i][0] - positions[j][0];
                let dy = positions[i][1] - positions[j][1];
                if (dx * dx + dy * dy).sqrt() <= cfg.link_range {
                    edges.push((i, j));
                }
            }
        }
        let graph = ConnectivityGraph::assemble(positions, edges);
        if !graph.is_connected() {
            continue;
        }
        let conflicts = match cfg.conflict_model {
            ConflictModel::Interface => line_graph_conflicts(&graph),
            ConflictModel::UnitDisk => unit_disk_conflicts(&graph, cfg.interference_range),
        };
        return Ok(NetworkInstance {
            config: cfg.clone(),
            graph,
            conflicts,
        });
    }
    Err(Error::InfeasibleTopology {
        num_nodes: n,
        attempts: MAX_TOPOLOGY_ATTEMPTS,
    })
}

/// Interface conflict model: two links conflict iff they share an endpoint.
pub fn line_graph_conflicts(g: &ConnectivityGraph) -> ConflictGraph {
    let mut pairs = Vec::new();
    for i in 0..g.num_nodes() {
        let incident = g.neighbors(i);
        for a in 0..incident.len() {
            for b in (a + 1)..incident.len() {
                let (ea, eb) = (incident[a].1, incident[b].1);
                pairs.push((ea.min(eb), ea.max(eb)));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    ConflictGraph::assemble(g.num_links(), pairs)
}

/// Unit-disk conflict model: two distinct links conflict iff any endpoint
/// of one is within `interference_range` of any endpoint of the other.
/// Always a superset of the interface model (shared endpoints are at
/// distance zero).
pub fn unit_disk_conflicts(g: &ConnectivityGraph, interference_range: f64) -> ConflictGraph {
    let m = g.num_links();
    let mut pairs = Vec::new();
    for a in 0..m {
        let (i, j) = g.endpoints(a);
        for b in (a + 1)..m {
            let (u, v) = g.endpoints(b);
            let close = g.distance(i, u) <= interference_range
                || g.distance(i, v) <= interference_range
                || g.distance(j, u) <= interference_range
                || g.distance(j, v) <= interference_range;
            if close {
                pairs.push((a, b));
            }
        }
    }
    ConflictGraph::assemble(m, pairs)
}

// --- instance serialization ---------------------------------------------

#[derive(Serialize, Deserialize)]
struct InstanceRecord {
    config: TopologyConfig,
    positions: Vec<[f64; 2]>,
    edges: Vec<(NodeId, NodeId)>,
    conflicts: Vec<(LinkId, LinkId)>,
}

/// Serializes an instance to JSON. Positions survive the round trip
/// bit-exactly.
pub fn instance_to_json(net: &NetworkInstance) -> Result<String> {
    let rec = InstanceRecord {
        config: net.config.clone(),
        positions: net.graph.positions.clone(),
        edges: net.graph.edges.clone(),
        conflicts: net.conflicts.conflicts.clone(),
    };
    Ok(serde_json::to_string(&rec)?)
}

pub fn instance_from_json(s: &str) -> Result<NetworkInstance> {
    let rec: InstanceRecord = serde_json::from_str(s)?;
    let graph = ConnectivityGraph::from_parts(rec.positions, &rec.edges)?;
    let conflicts = ConflictGraph::from_parts(graph.num_links(), &rec.conflicts)?;
    Ok(NetworkInstance {
        config: rec.config,
        graph,
        conflicts,
    })
}

pub fn save_instance(path: &std::path::Path, net: &NetworkInstance) -> Result<()> {
    std::fs::write(path, instance_to_json(net)?)?;
    Ok(())
}

pub fn load_instance(path: &std::path::Path) -> Result<NetworkInstance> {
    instance_from_json(&std::fs::read_to_string(path)?)
}

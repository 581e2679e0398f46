//! Shortest-path bias construction.
//!
//! A [`DistancePolicy`] assigns every link a positive distance; the bias
//! of node `i` toward commodity `c` is then the weighted shortest-path
//! distance from `i` to `c`. Adding that table to the queue backlogs
//! steers backpressure along short routes. Duty-based policies take the
//! per-link duty cycle `x` from the trained predictor; rate-based ones
//! normalize by the link's long-term rate.

use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::DutyCycles;
use crate::topology::{ConnectivityGraph, LinkId, NodeId};
use crate::traffic::LinkRateProcess;

/// How per-link distances are derived.
///
/// `None` disables the bias entirely (classical backpressure). The
/// CLI/CSV token for each variant is shown by its `Display` impl:
/// `bp`, `sp-hop`, `edr-<k>`, `sp-rate-<k>`, `sp-duty`, `sp-duty-rate`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DistancePolicy {
    /// No bias: classical backpressure.
    None,
    /// Every link has distance 1 (hop count).
    Hop,
    /// Every link has distance `k`.
    ScaledHop(f64),
    /// `k * mean_rate / r_e`: shorter distance for faster links.
    RateScaled(f64),
    /// `1 / x_e`: longer distance for links that are rarely scheduled.
    DutyInverse,
    /// `mean_rate / (x_e * r_e)`: duty and rate combined.
    DutyRate,
}

impl DistancePolicy {
    /// True when the policy needs predicted duty cycles.
    pub fn needs_duty(&self) -> bool {
        matches!(self, DistancePolicy::DutyInverse | DistancePolicy::DutyRate)
    }

    /// True when the policy needs the link-rate process.
    pub fn needs_rates(&self) -> bool {
        matches!(self, DistancePolicy::RateScaled(_) | DistancePolicy::DutyRate)
    }

    fn name(&self) -> &'static str {
        match self {
            DistancePolicy::None => "bp",
            DistancePolicy::Hop => "sp-hop",
            DistancePolicy::ScaledHop(_) => "edr",
            DistancePolicy::RateScaled(_) => "sp-rate",
            DistancePolicy::DutyInverse => "sp-duty",
            DistancePolicy::DutyRate => "sp-duty-rate",
        }
    }
}

fn format_scale(k: f64) -> String {
    if k == k.trunc() && k.abs() < 1e15 {
        format!("{}", k as i64)
    } else {
        format!("{k}")
    }
}

impl std::fmt::Display for DistancePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DistancePolicy::ScaledHop(k) => write!(f, "edr-{}", format_scale(*k)),
            DistancePolicy::RateScaled(k) => write!(f, "sp-rate-{}", format_scale(*k)),
            other => write!(f, "{}", other.name()),
        }
    }
}

impl std::str::FromStr for DistancePolicy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bp" => return Ok(DistancePolicy::None),
            "sp-hop" => return Ok(DistancePolicy::Hop),
            "sp-duty" => return Ok(DistancePolicy::DutyInverse),
            "sp-duty-rate" => return Ok(DistancePolicy::DutyRate),
            _ => {}
        }
        let scaled = |prefix: &str, s: &str| -> Option<std::result::Result<f64, String>> {
            let rest = s.strip_prefix(prefix)?;
            Some(match rest.parse::<f64>() {
                Ok(k) if k > 0.0 && k.is_finite() => Ok(k),
                _ => Err(format!("scale in {s:?} must be a positive number")),
            })
        };
        if let Some(k) = scaled("edr-", s) {
            return k.map(DistancePolicy::ScaledHop);
        }
        if let Some(k) = scaled("sp-rate-", s) {
            return k.map(DistancePolicy::RateScaled);
        }
        Err(format!(
            "unknown policy {s:?} (expected bp, sp-hop, edr-<k>, sp-rate-<k>, sp-duty, or sp-duty-rate)"
        ))
    }
}

impl Serialize for DistancePolicy {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for DistancePolicy {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-link distances for a policy. `None` yields all zeros; every other
/// policy yields strictly positive distances or fails.
pub fn link_distances(
    policy: DistancePolicy,
    num_links: usize,
    duty: Option<&DutyCycles>,
    rates: Option<&LinkRateProcess>,
) -> Result<Vec<f64>> {
    match policy {
        DistancePolicy::None => Ok(vec![0.0; num_links]),
        DistancePolicy::Hop => Ok(vec![1.0; num_links]),
        DistancePolicy::ScaledHop(k) => Ok(vec![k; num_links]),
        DistancePolicy::RateScaled(k) => {
            let rates = require_rates(policy, num_links, rates)?;
            let mean = rates.network_mean();
            (0..num_links)
                .map(|e| {
                    let r = rates.long_term(e);
                    if r <= 0.0 {
                        Err(Error::DegenerateLinkRate { link: e })
                    } else {
                        Ok(k * mean / r)
                    }
                })
                .collect()
        }
        DistancePolicy::DutyInverse => {
            let duty = require_duty(policy, duty)?;
            check_duty_len(duty, num_links)?;
            (0..num_links).map(|e| duty_inverse(duty, e)).collect()
        }
        DistancePolicy::DutyRate => {
            let duty = require_duty(policy, duty)?;
            check_duty_len(duty, num_links)?;
            let rates = require_rates(policy, num_links, rates)?;
            let mean = rates.network_mean();
            (0..num_links)
                .map(|e| {
                    let r = rates.long_term(e);
                    if r <= 0.0 {
                        return Err(Error::DegenerateLinkRate { link: e });
                    }
                    Ok(duty_inverse(duty, e)? * mean / r)
                })
                .collect()
        }
    }
}

fn policy_static_name(policy: DistancePolicy) -> &'static str {
    policy.name()
}

fn require_duty<'a>(
    policy: DistancePolicy,
    duty: Option<&'a DutyCycles>,
) -> Result<&'a DutyCycles> {
    duty.ok_or(Error::MissingPolicyInput {
        policy: policy_static_name(policy),
        missing: "predicted duty cycles",
    })
}

fn require_rates<'a>(
    policy: DistancePolicy,
    num_links: usize,
    rates: Option<&'a LinkRateProcess>,
) -> Result<&'a LinkRateProcess> {
    let r = rates.ok_or(Error::MissingPolicyInput {
        policy: policy_static_name(policy),
        missing: "link rate process",
    })?;
    if r.num_links() != num_links {
        return Err(Error::ShapeMismatch {
            what: "link rate process",
            expected: num_links,
            got: r.num_links(),
        });
    }
    Ok(r)
}

fn check_duty_len(duty: &DutyCycles, num_links: usize) -> Result<()> {
    if duty.len() != num_links {
        return Err(Error::ShapeMismatch {
            what: "duty cycles",
            expected: num_links,
            got: duty.len(),
        });
    }
    Ok(())
}

fn duty_inverse(duty: &DutyCycles, e: LinkId) -> Result<f64> {
    let x = duty.value(e);
    if x <= 0.0 || x >= 1.0 || !x.is_finite() {
        return Err(Error::DegenerateDutyCycle { link: e, value: x });
    }
    Ok(1.0 / x)
}

/// Node-by-commodity bias table `B_i^(c)`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasTable {
    num_nodes: usize,
    values: Vec<f64>,
}

impl BiasTable {
    pub fn zero(num_nodes: usize) -> Self {
        BiasTable {
            num_nodes,
            values: vec![0.0; num_nodes * num_nodes],
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    #[inline]
    pub fn get(&self, node: NodeId, commodity: NodeId) -> f64 {
        self.values[node * self.num_nodes + commodity]
    }

    pub fn set(&mut self, node: NodeId, commodity: NodeId, value: f64) {
        self.values[node * self.num_nodes + commodity] = value;
    }

    /// Checks the invariants every bias table must satisfy: finite,
    /// non-negative, and zero toward a node's own commodity.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.num_nodes {
            for c in 0..self.num_nodes {
                let v = self.get(i, c);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::MalformedArtifact {
                        kind: "bias table",
                        detail: format!("entry ({i}, {c}) = {v}"),
                    });
                }
            }
            if self.get(i, i) != 0.0 {
                return Err(Error::MalformedArtifact {
                    kind: "bias table",
                    detail: format!("diagonal entry ({i}, {i}) = {}", self.get(i, i)),
                });
            }
        }
        Ok(())
    }

    /// Writes `source,destination,bias` rows. Values use the shortest
    /// round-trippable decimal form, so a load restores exact bits.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "source,destination,bias")?;
        for i in 0..self.num_nodes {
            for c in 0..self.num_nodes {
                writeln!(w, "{i},{c},{}", self.get(i, c))?;
            }
        }
        Ok(())
    }

    /// Reads the [`BiasTable::write_csv`] schema; `#` lines are comments.
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(r);
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        let mut max_node = 0usize;
        for record in reader.deserialize() {
            let (source, destination, bias): (usize, usize, f64) = record?;
            max_node = max_node.max(source).max(destination);
            entries.push((source, destination, bias));
        }
        let n = max_node + 1;
        if entries.len() != n * n {
            return Err(Error::MalformedArtifact {
                kind: "bias table",
                detail: format!("expected {} rows for {n} nodes, got {}", n * n, entries.len()),
            });
        }
        let mut table = BiasTable::zero(n);
        for (i, c, v) in entries {
            table.set(i, c, v);
        }
        table.validate()?;
        Ok(table)
    }
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: NodeId,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Min-heap on distance via reversed comparison; ties by node id
        // keep the pop order deterministic.
        other
            .dist
            .partial_cmp(&self.dist)
            .expect("finite distances")
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn check_distances(g: &ConnectivityGraph, link_dist: &[f64]) -> Result<()> {
    if link_dist.len() != g.num_links() {
        return Err(Error::ShapeMismatch {
            what: "link distances",
            expected: g.num_links(),
            got: link_dist.len(),
        });
    }
    if let Some(e) = link_dist.iter().position(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::MalformedArtifact {
            kind: "link distances",
            detail: format!("link {e} has distance {}", link_dist[e]),
        });
    }
    Ok(())
}

fn dijkstra(g: &ConnectivityGraph, link_dist: &[f64], source: NodeId) -> Result<Vec<f64>> {
    let n = g.num_nodes();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry {
        dist: 0.0,
        node: source,
    });
    while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(v, link) in g.neighbors(u) {
            let cand = d + link_dist[link];
            if cand < dist[v] {
                dist[v] = cand;
                heap.push(HeapEntry {
                    dist: cand,
                    node: v,
                });
            }
        }
    }
    if let Some(node) = dist.iter().position(|d| d.is_infinite()) {
        return Err(Error::Unreachable { from: source, node });
    }
    Ok(dist)
}

/// All-pairs bias: `B_i^(c)` = weighted shortest-path distance from `i`
/// to `c`, one Dijkstra run per commodity.
pub fn apsp_bias(g: &ConnectivityGraph, link_dist: &[f64]) -> Result<BiasTable> {
    check_distances(g, link_dist)?;
    let n = g.num_nodes();
    let mut table = BiasTable::zero(n);
    for c in 0..n {
        let dist = dijkstra(g, link_dist, c)?;
        for i in 0..n {
            table.set(i, c, dist[i]);
        }
    }
    Ok(table)
}

/// One commodity's bias column by synchronous Bellman-Ford relaxation.
#[derive(Clone, Debug, PartialEq)]
pub struct SsspResult {
    /// `distances[i]` = shortest-path distance from `i` to the commodity.
    pub distances: Vec<f64>,
    /// Relaxation rounds that changed at least one distance; at most
    /// `|V| - 1` on any connected graph.
    pub rounds: usize,
}

/// Bellman-Ford counterpart of one [`apsp_bias`] column, kept as an
/// independent route to the same numbers and as the locality certificate:
/// each round only exchanges values across single links.
pub fn sssp_bias(g: &ConnectivityGraph, link_dist: &[f64], commodity: NodeId) -> Result<SsspResult> {
    check_distances(g, link_dist)?;
    let n = g.num_nodes();
    let mut dist = vec![f64::INFINITY; n];
    dist[commodity] = 0.0;
    let mut rounds = 0;
    loop {
        let mut next = dist.clone();
        let mut changed = false;
        for v in 0..n {
            for &(u, link) in g.neighbors(v) {
                let cand = dist[u] + link_dist[link];
                if cand < next[v] {
                    next[v] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        dist = next;
        rounds += 1;
        if rounds > n {
            return Err(Error::MalformedArtifact {
                kind: "shortest-path relaxation",
                detail: "failed to converge in |V| rounds".into(),
            });
        }
    }
    if let Some(node) = dist.iter().position(|d| d.is_infinite()) {
        return Err(Error::Unreachable {
            from: commodity,
            node,
        });
    }
    Ok(SsspResult {
        distances: dist,
        rounds,
    })
}

/// Full pipeline from policy to table: distances, then all-pairs
/// shortest paths. `None` skips the search and returns the zero table.
pub fn bias_table_for_policy(
    g: &ConnectivityGraph,
    policy: DistancePolicy,
    duty: Option<&DutyCycles>,
    rates: Option<&LinkRateProcess>,
) -> Result<BiasTable> {
    if policy == DistancePolicy::None {
        return Ok(BiasTable::zero(g.num_nodes()));
    }
    let dist = link_distances(policy, g.num_links(), duty, rates)?;
    apsp_bias(g, &dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{generate_network, ConflictModel, TopologyConfig};

    fn path(n: usize) -> ConnectivityGraph {
        let positions = (0..n).map(|i| [i as f64 * 0.9, 0.0]).collect();
        let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        ConnectivityGraph::from_parts(positions, &edges).unwrap()
    }

    fn random_net(seed: u64) -> crate::topology::NetworkInstance {
        generate_network(&TopologyConfig {
            num_nodes: 12,
            conflict_model: ConflictModel::Interface,
            seed,
            ..TopologyConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn policy_tokens_round_trip() {
        let policies = [
            DistancePolicy::None,
            DistancePolicy::Hop,
            DistancePolicy::ScaledHop(10.0),
            DistancePolicy::RateScaled(10.0),
            DistancePolicy::ScaledHop(2.5),
            DistancePolicy::DutyInverse,
            DistancePolicy::DutyRate,
        ];
        for p in policies {
            let token = p.to_string();
            let back: DistancePolicy = token.parse().unwrap();
            assert_eq!(p, back, "token {token}");
        }
        assert_eq!("edr-10".parse::<DistancePolicy>().unwrap(), DistancePolicy::ScaledHop(10.0));
        assert!("edr-0".parse::<DistancePolicy>().is_err());
        assert!("edr--3".parse::<DistancePolicy>().is_err());
        assert!("sp".parse::<DistancePolicy>().is_err());
    }

    #[test]
    fn hop_distances_are_unit_and_scaled_hop_scales() {
        assert_eq!(
            link_distances(DistancePolicy::Hop, 3, None, None).unwrap(),
            vec![1.0; 3]
        );
        assert_eq!(
            link_distances(DistancePolicy::ScaledHop(10.0), 2, None, None).unwrap(),
            vec![10.0, 10.0]
        );
    }

    #[test]
    fn rate_scaled_distances_need_rates_and_divide_by_long_term_rate() {
        let err = link_distances(DistancePolicy::RateScaled(10.0), 2, None, None).unwrap_err();
        assert!(matches!(err, Error::MissingPolicyInput { .. }));

        let net = random_net(4);
        let rates =
            crate::traffic::sample_link_rates(&net, (20.0, 20.0), 0.0, 10, 3);
        let d =
            link_distances(DistancePolicy::RateScaled(10.0), net.num_links(), None, Some(&rates))
                .unwrap();
        // All long-term rates 20, network mean 20: distance k * 20/20 = 10.
        for v in d {
            assert!((v - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn duty_distances_invert_the_duty_cycle() {
        let duty = DutyCycles::from_values(vec![0.5, 0.25]);
        let d = link_distances(DistancePolicy::DutyInverse, 2, Some(&duty), None).unwrap();
        assert_eq!(d, vec![2.0, 4.0]);

        let bad = DutyCycles::from_values(vec![0.5, 1.0]);
        assert!(matches!(
            link_distances(DistancePolicy::DutyInverse, 2, Some(&bad), None),
            Err(Error::DegenerateDutyCycle { link: 1, .. })
        ));
    }

    #[test]
    fn unit_distance_bias_on_a_path_counts_hops() {
        let g = path(5);
        let table = apsp_bias(&g, &vec![1.0; 4]).unwrap();
        for i in 0..5 {
            for c in 0..5 {
                assert_eq!(table.get(i, c), (i as f64 - c as f64).abs());
            }
        }
        table.validate().unwrap();
    }

    #[test]
    fn bias_scales_linearly_with_distances() {
        let net = random_net(9);
        let d1: Vec<f64> = (0..net.num_links()).map(|e| 0.3 + e as f64 * 0.1).collect();
        let d3: Vec<f64> = d1.iter().map(|v| v * 3.0).collect();
        let t1 = apsp_bias(&net.graph, &d1).unwrap();
        let t3 = apsp_bias(&net.graph, &d3).unwrap();
        for i in 0..net.num_nodes() {
            for c in 0..net.num_nodes() {
                assert!((t3.get(i, c) - 3.0 * t1.get(i, c)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bias_table_is_symmetric_and_satisfies_the_triangle_inequality() {
        let net = random_net(14);
        let d: Vec<f64> = (0..net.num_links()).map(|e| 1.0 + (e % 5) as f64 * 0.7).collect();
        let t = apsp_bias(&net.graph, &d).unwrap();
        let n = net.num_nodes();
        for i in 0..n {
            assert_eq!(t.get(i, i), 0.0);
            for c in 0..n {
                assert!((t.get(i, c) - t.get(c, i)).abs() < 1e-9);
                for m in 0..n {
                    assert!(t.get(i, c) <= t.get(i, m) + t.get(m, c) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn bellman_ford_matches_dijkstra_and_counts_path_rounds() {
        let g = path(7);
        let dist = vec![1.0; 6];
        let apsp = apsp_bias(&g, &dist).unwrap();
        let sssp = sssp_bias(&g, &dist, 0).unwrap();
        for i in 0..7 {
            assert_eq!(sssp.distances[i], apsp.get(i, 0));
        }
        // Distances propagate one hop per round from the far end.
        assert_eq!(sssp.rounds, 6);

        let net = random_net(21);
        let d: Vec<f64> = (0..net.num_links())
            .map(|e| 0.2 + ((e * 37) % 11) as f64 * 0.13)
            .collect();
        let apsp = apsp_bias(&net.graph, &d).unwrap();
        for c in 0..net.num_nodes() {
            let sssp = sssp_bias(&net.graph, &d, c).unwrap();
            assert!(sssp.rounds <= net.num_nodes() - 1);
            for i in 0..net.num_nodes() {
                assert_eq!(
                    sssp.distances[i],
                    apsp.get(i, c),
                    "node {i} commodity {c}"
                );
            }
        }
    }

    #[test]
    fn policy_none_yields_the_zero_table() {
        let net = random_net(2);
        let t = bias_table_for_policy(&net.graph, DistancePolicy::None, None, None).unwrap();
        assert_eq!(t, BiasTable::zero(net.num_nodes()));
    }

    #[test]
    fn csv_round_trips_bit_exactly() {
        let net = random_net(5);
        let d: Vec<f64> = (0..net.num_links())
            .map(|e| 1.0 / (1.0 + e as f64) + 0.123456789)
            .collect();
        let t = apsp_bias(&net.graph, &d).unwrap();
        let mut buf = Vec::new();
        buf.extend_from_slice(b"# metadata comment\n");
        t.write_csv(&mut buf).unwrap();
        let back = BiasTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(t.num_nodes(), back.num_nodes());
        for i in 0..t.num_nodes() {
            for c in 0..t.num_nodes() {
                assert_eq!(t.get(i, c).to_bits(), back.get(i, c).to_bits());
            }
        }
    }

    #[test]
    fn malformed_tables_are_rejected() {
        let mut t = BiasTable::zero(3);
        t.set(1, 1, 0.5);
        assert!(t.validate().is_err());
        let mut t = BiasTable::zero(3);
        t.set(0, 1, -1.0);
        assert!(t.validate().is_err());
    }
}

//! Flow placement, Poisson packet arrivals, and time-varying link rates.
//!
//! An [`Episode`] bundles one realization of all three so the same
//! randomness can be replayed against different routing policies.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::topology::{LinkId, NetworkInstance, NodeId};

/// A source/destination pair with a mean arrival rate in packets per slot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub src: NodeId,
    pub dst: NodeId,
    pub rate: f64,
}

/// Sampling ranges for one episode's traffic.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrafficConfig {
    /// Flow count is uniform in `[floor(lo * |V|), ceil(hi * |V|)]`.
    pub flow_count_min_frac: f64,
    pub flow_count_max_frac: f64,
    /// Per-flow mean arrival rate, uniform in this range.
    pub arrival_rate_range: (f64, f64),
    /// Long-term link rate, uniform in this range (packets per slot).
    pub link_rate_range: (f64, f64),
    /// Standard deviation of per-slot Gaussian rate fluctuation.
    pub link_rate_noise_sd: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            flow_count_min_frac: 0.15,
            flow_count_max_frac: 0.30,
            arrival_rate_range: (0.2, 1.0),
            link_rate_range: (10.0, 42.0),
            link_rate_noise_sd: 3.0,
        }
    }
}

/// Inclusive flow-count bounds for a network of `num_nodes` nodes.
pub fn flow_count_range(num_nodes: usize, lo_frac: f64, hi_frac: f64) -> (usize, usize) {
    let lo = (lo_frac * num_nodes as f64).floor() as usize;
    let hi = (hi_frac * num_nodes as f64).ceil() as usize;
    (lo, hi)
}

/// Per-flow, per-slot packet arrival counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalMatrix {
    num_flows: usize,
    horizon: usize,
    counts: Vec<u32>, // row-major [flow][slot]
}

impl ArrivalMatrix {
    /// Builds from explicit counts, laid out `[flow][slot]` row-major.
    pub fn from_counts(num_flows: usize, horizon: usize, counts: Vec<u32>) -> Self {
        assert_eq!(counts.len(), num_flows * horizon);
        ArrivalMatrix {
            num_flows,
            horizon,
            counts,
        }
    }

    pub fn num_flows(&self) -> usize {
        self.num_flows
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn count(&self, flow: usize, slot: usize) -> u32 {
        self.counts[flow * self.horizon + slot]
    }

    pub fn flow_total(&self, flow: usize) -> u64 {
        let base = flow * self.horizon;
        self.counts[base..base + self.horizon]
            .iter()
            .map(|&c| u64::from(c))
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }
}

/// Long-term link rates and their per-slot integer realizations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkRateProcess {
    long_term: Vec<f64>,
    horizon: usize,
    realized: Vec<u32>, // row-major [link][slot]
    network_mean: f64,
}

impl LinkRateProcess {
    /// Builds from explicit per-link realized sequences, one inner vector
    /// per link, all the same length.
    pub fn from_realized(long_term: Vec<f64>, realized: Vec<Vec<u32>>) -> Self {
        assert_eq!(long_term.len(), realized.len());
        let horizon = realized.first().map_or(0, Vec::len);
        assert!(realized.iter().all(|r| r.len() == horizon));
        let flat: Vec<u32> = realized.into_iter().flatten().collect();
        let total: u64 = flat.iter().map(|&x| u64::from(x)).sum();
        let cells = flat.len().max(1);
        LinkRateProcess {
            long_term,
            horizon,
            realized: flat,
            network_mean: total as f64 / cells as f64,
        }
    }

    pub fn num_links(&self) -> usize {
        self.long_term.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Long-term mean rate of one link.
    pub fn long_term(&self, link: LinkId) -> f64 {
        self.long_term[link]
    }

    /// Realized transmittable packets for a link at a slot.
    pub fn realized(&self, link: LinkId, slot: usize) -> u32 {
        self.realized[link * self.horizon + slot]
    }

    /// Empirical mean of the realized rates over all links and slots.
    pub fn network_mean(&self) -> f64 {
        self.network_mean
    }
}

fn uniform_in(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..range.1)
    } else {
        range.0
    }
}

/// Samples `count ~ U[count_range]` flows with distinct ordered (src, dst)
/// pairs, `src != dst`, and rates uniform in `rate_range`.
pub fn sample_flows(
    net: &NetworkInstance,
    count_range: (usize, usize),
    rate_range: (f64, f64),
    seed: u64,
) -> Result<Vec<Flow>> {
    let n = net.num_nodes();
    let available = n * n.saturating_sub(1);
    let mut rng = stream_rng(seed, "flows", &[]);
    let count = if count_range.1 > count_range.0 {
        rng.random_range(count_range.0..=count_range.1)
    } else {
        count_range.0
    };
    if count > available {
        return Err(Error::TooManyFlows {
            requested: count,
            available,
        });
    }
    let mut taken = std::collections::HashSet::new();
    let mut flows = Vec::with_capacity(count);
    while flows.len() < count {
        let src = rng.random_range(0..n);
        let dst = rng.random_range(0..n);
        if src == dst || !taken.insert((src, dst)) {
            continue;
        }
        let rate = uniform_in(&mut rng, rate_range);
        flows.push(Flow { src, dst, rate });
    }
    Ok(flows)
}

/// Independent Poisson arrivals per flow and slot.
pub fn sample_arrivals(flows: &[Flow], horizon: usize, seed: u64) -> ArrivalMatrix {
    let mut rng = stream_rng(seed, "arrivals", &[]);
    let mut counts = Vec::with_capacity(flows.len() * horizon);
    for flow in flows {
        if flow.rate > 0.0 {
            let dist = Poisson::new(flow.rate).expect("positive finite rate");
            for _ in 0..horizon {
                counts.push(dist.sample(&mut rng) as u32);
            }
        } else {
            counts.extend(std::iter::repeat_n(0u32, horizon));
        }
    }
    ArrivalMatrix {
        num_flows: flows.len(),
        horizon,
        counts,
    }
}

/// Samples long-term rates uniform in `rate_range` and realizes each slot
/// as `round(max(0, N(r_e, noise_sd)))`.
pub fn sample_link_rates(
    net: &NetworkInstance,
    rate_range: (f64, f64),
    noise_sd: f64,
    horizon: usize,
    seed: u64,
) -> LinkRateProcess {
    let m = net.num_links();
    let mut rng = stream_rng(seed, "rates", &[]);
    let long_term: Vec<f64> = (0..m).map(|_| uniform_in(&mut rng, rate_range)).collect();
    let mut realized = Vec::with_capacity(m * horizon);
    for &r in &long_term {
        if noise_sd > 0.0 {
            let dist = Normal::new(r, noise_sd).expect("finite mean, positive sd");
            for _ in 0..horizon {
                realized.push(dist.sample(&mut rng).max(0.0).round() as u32);
            }
        } else {
            realized.extend(std::iter::repeat_n(r.max(0.0).round() as u32, horizon));
        }
    }
    let total: u64 = realized.iter().map(|&x| u64::from(x)).sum();
    let cells = (m * horizon).max(1);
    LinkRateProcess {
        long_term,
        horizon,
        realized,
        network_mean: total as f64 / cells as f64,
    }
}

/// One realization of flows, arrivals, and link rates, replayable against
/// any routing policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub flows: Vec<Flow>,
    pub arrivals: ArrivalMatrix,
    pub rates: LinkRateProcess,
}

impl Episode {
    pub fn horizon(&self) -> usize {
        self.arrivals.horizon()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Samples a full episode. The three components draw from independent
/// streams derived from `seed`, so they can also be reproduced one at a
/// time with the standalone samplers.
pub fn sample_episode(
    net: &NetworkInstance,
    cfg: &TrafficConfig,
    horizon: usize,
    seed: u64,
) -> Result<Episode> {
    let count_range = flow_count_range(
        net.num_nodes(),
        cfg.flow_count_min_frac,
        cfg.flow_count_max_frac,
    );
    let flows = sample_flows(net, count_range, cfg.arrival_rate_range, seed)?;
    let arrivals = sample_arrivals(&flows, horizon, seed);
    let rates = sample_link_rates(net, cfg.link_rate_range, cfg.link_rate_noise_sd, horizon, seed);
    Ok(Episode {
        flows,
        arrivals,
        rates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{generate_network, ConflictModel, TopologyConfig};

    fn net(n: usize, seed: u64) -> NetworkInstance {
        generate_network(&TopologyConfig {
            num_nodes: n,
            conflict_model: ConflictModel::Interface,
            seed,
            ..TopologyConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn flow_count_range_for_a_hundred_nodes() {
        assert_eq!(flow_count_range(100, 0.15, 0.30), (15, 30));
        assert_eq!(flow_count_range(20, 0.15, 0.30), (3, 6));
    }

    #[test]
    fn flows_are_distinct_pairs_with_rates_in_range() {
        let net = net(20, 1);
        for seed in 0..20 {
            let flows = sample_flows(&net, (3, 6), (0.2, 1.0), seed).unwrap();
            assert!((3..=6).contains(&flows.len()));
            let mut seen = std::collections::HashSet::new();
            for f in &flows {
                assert_ne!(f.src, f.dst);
                assert!(seen.insert((f.src, f.dst)), "duplicate pair");
                assert!((0.2..1.0).contains(&f.rate));
            }
        }
    }

    #[test]
    fn flow_rate_sample_mean_approaches_midpoint() {
        let net = net(20, 1);
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut seed = 0;
        while count < 10_000 {
            let flows = sample_flows(&net, (50, 50), (0.2, 1.0), seed).unwrap();
            sum += flows.iter().map(|f| f.rate).sum::<f64>();
            count += flows.len();
            seed += 1;
        }
        let mean = sum / count as f64;
        assert!((mean - 0.6).abs() < 0.01, "mean rate {mean}");
    }

    #[test]
    fn too_many_flows_is_an_error() {
        let net = net(5, 2);
        let err = sample_flows(&net, (25, 25), (0.2, 1.0), 0).unwrap_err();
        assert!(matches!(
            err,
            Error::TooManyFlows {
                requested: 25,
                available: 20
            }
        ));
    }

    #[test]
    fn two_node_network_admits_exactly_one_flow() {
        let net = net(2, 3);
        let flows = sample_flows(&net, (1, 1), (0.5, 0.5), 9).unwrap();
        assert_eq!(flows.len(), 1);
        assert_eq!(flows[0].rate, 0.5);
    }

    #[test]
    fn unit_rate_arrivals_concentrate_around_the_horizon() {
        let flows = [Flow {
            src: 0,
            dst: 1,
            rate: 1.0,
        }];
        let t = 10_000;
        let arr = sample_arrivals(&flows, t, 11);
        let total = arr.flow_total(0) as f64;
        assert!(
            (total - t as f64).abs() <= 3.0 * (t as f64).sqrt(),
            "total {total}"
        );
    }

    #[test]
    fn zero_rate_flow_never_arrives() {
        let flows = [Flow {
            src: 0,
            dst: 1,
            rate: 0.0,
        }];
        let arr = sample_arrivals(&flows, 500, 4);
        assert_eq!(arr.total(), 0);
    }

    #[test]
    fn arrival_counts_pass_a_poisson_dispersion_check() {
        // Dispersion index of Poisson counts falls in the two-sided 1%
        // chi-square band [1 - 2.576*sqrt(2/n), 1 + 2.576*sqrt(2/n)].
        let flows = [Flow {
            src: 0,
            dst: 1,
            rate: 0.7,
        }];
        let t = 10_000usize;
        let arr = sample_arrivals(&flows, t, 21);
        let mean = arr.flow_total(0) as f64 / t as f64;
        let var = (0..t)
            .map(|s| (arr.count(0, s) as f64 - mean).powi(2))
            .sum::<f64>()
            / (t as f64 - 1.0);
        let index = var / mean;
        let half = 2.576 * (2.0 / t as f64).sqrt();
        assert!(
            (1.0 - half..=1.0 + half).contains(&index),
            "dispersion {index} outside [{}, {}]",
            1.0 - half,
            1.0 + half
        );
    }

    #[test]
    fn realized_rates_track_the_long_term_mean() {
        let net = net(2, 3);
        let rates = sample_link_rates(&net, (10.0, 10.0), 3.0, 100_000, 8);
        assert_eq!(rates.long_term(0), 10.0);
        let mean = (0..100_000)
            .map(|t| rates.realized(0, t) as f64)
            .sum::<f64>()
            / 100_000.0;
        assert!((9.8..=10.2).contains(&mean), "mean realized {mean}");
    }

    #[test]
    fn zero_noise_realizes_the_rounded_long_term_rate() {
        let net = net(2, 3);
        let rates = sample_link_rates(&net, (25.4, 25.4), 0.0, 10, 8);
        for t in 0..10 {
            assert_eq!(rates.realized(0, t), 25);
        }
    }

    #[test]
    fn long_term_rates_average_to_the_range_midpoint() {
        let net = net(30, 5);
        let mut sum = 0.0;
        let mut links = 0usize;
        for seed in 0..400 {
            let rates = sample_link_rates(&net, (10.0, 42.0), 0.0, 1, seed);
            for e in 0..rates.num_links() {
                sum += rates.long_term(e);
            }
            links += rates.num_links();
            if links >= 10_000 {
                break;
            }
        }
        let mean = sum / links as f64;
        assert!((mean - 26.0).abs() < 0.5, "mean long-term rate {mean}");
    }

    #[test]
    fn network_mean_is_the_realized_average() {
        let net = net(2, 3);
        let rates = sample_link_rates(&net, (12.0, 12.0), 0.0, 4, 8);
        assert_eq!(rates.network_mean(), 12.0);
    }

    #[test]
    fn episode_round_trips_through_json_bit_exactly() {
        let net = net(15, 6);
        let ep = sample_episode(&net, &TrafficConfig::default(), 50, 42).unwrap();
        let back = Episode::from_json(&ep.to_json().unwrap()).unwrap();
        assert_eq!(ep, back);
        for (a, b) in ep.flows.iter().zip(&back.flows) {
            assert_eq!(a.rate.to_bits(), b.rate.to_bits());
        }
        assert_eq!(
            ep.rates.network_mean().to_bits(),
            back.rates.network_mean().to_bits()
        );
    }

    #[test]
    fn episode_components_match_the_standalone_samplers() {
        let net = net(15, 6);
        let cfg = TrafficConfig::default();
        let ep = sample_episode(&net, &cfg, 40, 7).unwrap();
        let flows = sample_flows(&net, flow_count_range(15, 0.15, 0.30), (0.2, 1.0), 7).unwrap();
        assert_eq!(ep.flows, flows);
        assert_eq!(ep.arrivals, sample_arrivals(&flows, 40, 7));
        assert_eq!(ep.rates, sample_link_rates(&net, (10.0, 42.0), 3.0, 40, 7));
    }
}

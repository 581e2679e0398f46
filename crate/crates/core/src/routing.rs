//! Per-commodity queues and backpressure link decisions.
//!
//! Every node keeps one FIFO per commodity (= destination node). Each
//! slot, every link picks the commodity maximizing the differential of
//! effective backlog `U + B` across the link (bias table `B` all zero
//! recovers classical backpressure), the two directions collapse into one
//! non-negative link weight, and scheduled links move packets capped by
//! the slot's realized rate.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::bias::BiasTable;
use crate::topology::{ConnectivityGraph, LinkId, NodeId};
use crate::traffic::{ArrivalMatrix, Flow};

/// One queued packet: owning flow and the slot it entered the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub flow: u32,
    pub birth_slot: u32,
}

/// Per-(node, commodity) FIFO queues.
///
/// The backlog seen by routing is simply each FIFO's length, so the
/// count/record views can never disagree.
#[derive(Clone, Debug)]
pub struct QueueState {
    num_nodes: usize,
    queues: Vec<VecDeque<Packet>>, // index: node * num_nodes + commodity
    total_queued: u64,
}

impl QueueState {
    pub fn new(num_nodes: usize) -> Self {
        QueueState {
            num_nodes,
            queues: vec![VecDeque::new(); num_nodes * num_nodes],
            total_queued: 0,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    #[inline]
    fn idx(&self, node: NodeId, commodity: NodeId) -> usize {
        node * self.num_nodes + commodity
    }

    /// `U_node(commodity)`: packets for `commodity` queued at `node`.
    #[inline]
    pub fn backlog(&self, node: NodeId, commodity: NodeId) -> usize {
        self.queues[self.idx(node, commodity)].len()
    }

    /// Packets currently queued anywhere.
    pub fn total_queued(&self) -> u64 {
        self.total_queued
    }

    /// Read-only view of one FIFO, oldest packet first.
    pub fn queue(&self, node: NodeId, commodity: NodeId) -> &VecDeque<Packet> {
        &self.queues[self.idx(node, commodity)]
    }

    fn push(&mut self, node: NodeId, commodity: NodeId, packet: Packet) {
        debug_assert_ne!(node, commodity, "destination queues must stay empty");
        let idx = self.idx(node, commodity);
        self.queues[idx].push_back(packet);
        self.total_queued += 1;
    }

    fn pop(&mut self, node: NodeId, commodity: NodeId) -> Packet {
        let idx = self.idx(node, commodity);
        let p = self.queues[idx].pop_front().expect("pop from empty queue");
        self.total_queued -= 1;
        p
    }
}

/// Enqueues slot `slot`'s arrivals at each flow's source. Returns how many
/// packets arrived.
pub fn apply_arrivals(
    state: &mut QueueState,
    flows: &[Flow],
    arrivals: &ArrivalMatrix,
    slot: usize,
) -> u64 {
    let mut total = 0u64;
    for (f, flow) in flows.iter().enumerate() {
        let count = arrivals.count(f, slot);
        for _ in 0..count {
            state.push(
                flow.src,
                flow.dst,
                Packet {
                    flow: f as u32,
                    birth_slot: slot as u32,
                },
            );
        }
        total += u64::from(count);
    }
    total
}

/// The direction and commodity a link would serve this slot, plus its
/// MaxWeight link weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkDecision {
    pub link: LinkId,
    pub sender: NodeId,
    pub receiver: NodeId,
    pub commodity: NodeId,
    /// `max(w_ij, w_ji)` with each direction clamped at zero.
    pub weight: f64,
}

/// Picks the commodity maximizing the effective-backlog differential from
/// `i` to `j` (ties to the smallest commodity id) and returns the attained
/// differential, which may be negative.
pub fn select_commodity(
    queues: &QueueState,
    bias: &BiasTable,
    i: NodeId,
    j: NodeId,
) -> (NodeId, f64) {
    let n = queues.num_nodes();
    let mut best_c = 0;
    let mut best = f64::NEG_INFINITY;
    for c in 0..n {
        let eff_i = queues.backlog(i, c) as f64 + bias.get(i, c);
        let eff_j = queues.backlog(j, c) as f64 + bias.get(j, c);
        let diff = eff_i - eff_j;
        if diff > best {
            best = diff;
            best_c = c;
        }
    }
    (best_c, best)
}

/// Collapses the two directional backpressures into one link weight:
/// each direction clamps at zero, the larger wins, and an exact tie goes
/// to the canonical `i -> j` direction.
pub fn link_weight(bp_ij: f64, bp_ji: f64) -> (f64, bool) {
    let w_ij = bp_ij.max(0.0);
    let w_ji = bp_ji.max(0.0);
    if w_ij >= w_ji {
        (w_ij, true)
    } else {
        (w_ji, false)
    }
}

/// Per-link decisions for one slot, indexed by link id.
pub fn link_decisions(
    graph: &ConnectivityGraph,
    queues: &QueueState,
    bias: &BiasTable,
) -> Vec<LinkDecision> {
    (0..graph.num_links())
        .map(|e| {
            let (i, j) = graph.endpoints(e);
            let (c_fwd, bp_fwd) = select_commodity(queues, bias, i, j);
            let (c_rev, bp_rev) = select_commodity(queues, bias, j, i);
            let (weight, forward) = link_weight(bp_fwd, bp_rev);
            let (sender, receiver, commodity) = if forward {
                (i, j, c_fwd)
            } else {
                (j, i, c_rev)
            };
            LinkDecision {
                link: e,
                sender,
                receiver,
                commodity,
                weight,
            }
        })
        .collect()
}

/// One executed transmission: `moved` packets of `commodity` crossed the
/// link from `sender` to `receiver`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransmissionRecord {
    pub link: u32,
    pub sender: u32,
    pub receiver: u32,
    pub commodity: u32,
    pub moved: u32,
}

/// A packet that reached its destination this slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub flow: u32,
    pub birth_slot: u32,
}

/// Everything that moved during one slot's transmission stage.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotTransmissions {
    pub moves: Vec<TransmissionRecord>,
    pub deliveries: Vec<DeliveryRecord>,
}

/// Executes the schedule: each scheduled link with positive weight moves
/// up to its realized rate in packets of its chosen commodity, oldest
/// first. Packets arriving at their destination leave the network and are
/// reported as deliveries.
///
/// Scheduled links never share a node (independence under either conflict
/// model), so commit order cannot change the outcome; links commit in
/// ascending id order.
pub fn commit_transmissions(
    state: &mut QueueState,
    schedule: &[LinkId],
    decisions: &[LinkDecision],
    rates_at_slot: &[u32],
) -> SlotTransmissions {
    let mut out = SlotTransmissions::default();
    for &e in schedule {
        let d = &decisions[e];
        if d.weight <= 0.0 {
            continue;
        }
        let backlog = state.backlog(d.sender, d.commodity);
        let moved = (rates_at_slot[e] as usize).min(backlog);
        if moved == 0 {
            continue;
        }
        for _ in 0..moved {
            let packet = state.pop(d.sender, d.commodity);
            if d.receiver == d.commodity {
                out.deliveries.push(DeliveryRecord {
                    flow: packet.flow,
                    birth_slot: packet.birth_slot,
                });
            } else {
                state.push(d.receiver, d.commodity, packet);
            }
        }
        out.moves.push(TransmissionRecord {
            link: e as u32,
            sender: d.sender as u32,
            receiver: d.receiver as u32,
            commodity: d.commodity as u32,
            moved: moved as u32,
        });
    }
    out
}

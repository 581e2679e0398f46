//! MaxWeight link scheduling: pick a high-utility independent set of
//! links in the conflict graph each slot.
//!
//! Three solvers share the contract that zero-utility links are never
//! scheduled and the returned set is independent: `Greedy` (global sort,
//! maximal), `LocalGreedy` (synchronous local-maximum rounds, maximal),
//! and `Exact` (branch-and-bound optimum, capped instance size).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::routing::LinkDecision;
use crate::topology::{ConflictGraph, LinkId};

/// Links activated in one slot, ascending by id.
pub type Schedule = Vec<LinkId>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulerKind {
    Greedy,
    LocalGreedy,
    Exact,
}

impl std::fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SchedulerKind::Greedy => write!(f, "greedy"),
            SchedulerKind::LocalGreedy => write!(f, "local-greedy"),
            SchedulerKind::Exact => write!(f, "exact"),
        }
    }
}

impl std::str::FromStr for SchedulerKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "greedy" => Ok(SchedulerKind::Greedy),
            "local-greedy" => Ok(SchedulerKind::LocalGreedy),
            "exact" => Ok(SchedulerKind::Exact),
            other => Err(format!(
                "unknown scheduler {other:?} (expected greedy, local-greedy, or exact)"
            )),
        }
    }
}

/// Per-link MaxWeight utilities: realized rate times link weight.
pub fn build_utilities(decisions: &[LinkDecision], rates_at_slot: &[u32]) -> Vec<f64> {
    debug_assert_eq!(decisions.len(), rates_at_slot.len());
    decisions
        .iter()
        .zip(rates_at_slot)
        .map(|(d, &r)| f64::from(r) * d.weight)
        .collect()
}

pub fn solve(kind: SchedulerKind, cg: &ConflictGraph, utilities: &[f64]) -> Result<Schedule> {
    match kind {
        SchedulerKind::Greedy => Ok(greedy_maximal_schedule(cg, utilities)),
        SchedulerKind::LocalGreedy => Ok(local_greedy_schedule(cg, utilities)),
        SchedulerKind::Exact => exact_mwis(cg, utilities),
    }
}

pub fn schedule_weight(schedule: &[LinkId], utilities: &[f64]) -> f64 {
    schedule.iter().map(|&e| utilities[e]).sum()
}

/// `a` wins over `b` on higher utility, then on smaller id.
fn beats(utilities: &[f64], a: LinkId, b: LinkId) -> bool {
    utilities[a] > utilities[b] || (utilities[a] == utilities[b] && a < b)
}

/// Greedy maximal scheduling: admit links in order of decreasing utility
/// (ties by smaller id), skipping anything conflicting with an earlier
/// pick. Maximal over the positive-utility links.
pub fn greedy_maximal_schedule(cg: &ConflictGraph, utilities: &[f64]) -> Schedule {
    debug_assert_eq!(cg.num_links(), utilities.len());
    let mut order: Vec<LinkId> = (0..cg.num_links()).filter(|&e| utilities[e] > 0.0).collect();
    order.sort_unstable_by(|&a, &b| {
        utilities[b]
            .partial_cmp(&utilities[a])
            .expect("finite utilities")
            .then(a.cmp(&b))
    });
    let mut blocked = vec![false; cg.num_links()];
    let mut picked = Vec::new();
    for e in order {
        if blocked[e] {
            continue;
        }
        picked.push(e);
        for &u in cg.neighbors(e) {
            blocked[u] = true;
        }
    }
    picked.sort_unstable();
    picked
}

/// Distributed-style greedy: in synchronous rounds, every undecided link
/// that beats all its undecided conflicting neighbors joins, and its
/// neighbors drop out. Matches the greedy contract (independent, maximal
/// over positive-utility links) without a global sort.
pub fn local_greedy_schedule(cg: &ConflictGraph, utilities: &[f64]) -> Schedule {
    debug_assert_eq!(cg.num_links(), utilities.len());
    const UNDECIDED: u8 = 0;
    const IN: u8 = 1;
    const OUT: u8 = 2;
    let mut state = vec![UNDECIDED; cg.num_links()];
    for e in 0..cg.num_links() {
        if utilities[e] <= 0.0 {
            state[e] = OUT;
        }
    }
    loop {
        let joined: Vec<LinkId> = (0..cg.num_links())
            .filter(|&e| state[e] == UNDECIDED)
            .filter(|&e| {
                cg.neighbors(e)
                    .iter()
                    .all(|&u| state[u] != UNDECIDED || beats(utilities, e, u))
            })
            .collect();
        if joined.is_empty() {
            break;
        }
        for &e in &joined {
            state[e] = IN;
            for &u in cg.neighbors(e) {
                if state[u] == UNDECIDED {
                    state[u] = OUT;
                }
            }
        }
    }
    (0..cg.num_links()).filter(|&e| state[e] == IN).collect()
}

/// Largest instance [`exact_mwis`] accepts.
pub const EXACT_MWIS_LIMIT: usize = 25;

/// Optimal MaxWeight schedule by branch and bound over the
/// positive-utility links. Refuses instances above [`EXACT_MWIS_LIMIT`].
pub fn exact_mwis(cg: &ConflictGraph, utilities: &[f64]) -> Result<Schedule> {
    debug_assert_eq!(cg.num_links(), utilities.len());
    if cg.num_links() > EXACT_MWIS_LIMIT {
        return Err(Error::InstanceTooLarge {
            limit: EXACT_MWIS_LIMIT,
            got: cg.num_links(),
        });
    }
    let mut order: Vec<LinkId> = (0..cg.num_links()).filter(|&e| utilities[e] > 0.0).collect();
    order.sort_unstable_by(|&a, &b| {
        utilities[b]
            .partial_cmp(&utilities[a])
            .expect("finite utilities")
            .then(a.cmp(&b))
    });
    let mut best = Vec::new();
    let mut best_weight = 0.0;
    let mut chosen = Vec::new();
    branch(
        cg,
        utilities,
        &order,
        0,
        0.0,
        &mut chosen,
        &mut best,
        &mut best_weight,
    );
    best.sort_unstable();
    Ok(best)
}

#[allow(clippy::too_many_arguments)]
fn branch(
    cg: &ConflictGraph,
    utilities: &[f64],
    order: &[LinkId],
    from: usize,
    weight: f64,
    chosen: &mut Vec<LinkId>,
    best: &mut Vec<LinkId>,
    best_weight: &mut f64,
) {
    if weight > *best_weight {
        *best_weight = weight;
        best.clone_from(chosen);
    }
    let remaining: f64 = order[from..].iter().map(|&e| utilities[e]).sum();
    if weight + remaining <= *best_weight {
        return;
    }
    for idx in from..order.len() {
        let e = order[idx];
        if chosen.iter().any(|&c| cg.are_conflicting(c, e)) {
            continue;
        }
        chosen.push(e);
        branch(
            cg,
            utilities,
            order,
            idx + 1,
            weight + utilities[e],
            chosen,
            best,
            best_weight,
        );
        chosen.pop();
        // Everything after idx is no heavier than e; if even taking e
        // cannot reach best, siblings cannot either.
        let rest: f64 = order[idx..].iter().map(|&u| utilities[u]).sum();
        if weight + rest <= *best_weight {
            return;
        }
    }
}

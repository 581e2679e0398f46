use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Topology sampling kept producing disconnected graphs.
    #[error("no connected topology with {num_nodes} nodes after {attempts} attempts")]
    InfeasibleTopology { num_nodes: usize, attempts: usize },

    /// Asked for more flows than there are distinct ordered node pairs.
    #[error("cannot place {requested} flows: only {available} distinct (src, dst) pairs")]
    TooManyFlows { requested: usize, available: usize },

    /// An input collection had the wrong length for the network it targets.
    #[error("{what}: expected length {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Exact solver refused an instance above its size cap.
    #[error("exact MWIS limited to {limit} links, instance has {got}")]
    InstanceTooLarge { limit: usize, got: usize },

    /// A distance policy was evaluated without the data it needs.
    #[error("distance policy {policy} requires {missing}")]
    MissingPolicyInput {
        policy: &'static str,
        missing: &'static str,
    },

    /// A link rate of zero makes rate-normalized distances undefined.
    #[error("link {link} has zero long-term rate; rate-scaled distances are undefined")]
    DegenerateLinkRate { link: usize },

    /// A duty cycle outside (0, 1) makes duty-based distances undefined.
    #[error("link {link} has duty cycle {value} outside (0, 1)")]
    DegenerateDutyCycle { link: usize, value: f64 },

    /// Shortest-path search could not reach some node.
    #[error("node {node} unreachable from node {from}")]
    Unreachable { from: usize, node: usize },

    /// Edge list contained a self-loop, duplicate, or out-of-range id.
    #[error("invalid edge ({0}, {1}): self-loop, duplicate, or bad id")]
    InvalidEdge(usize, usize),

    /// Hand-built graph was not connected.
    #[error("graph is not connected")]
    DisconnectedGraph,

    /// A simulation-time invariant failed; state is not trustworthy past this.
    #[error("invariant breach at slot {slot}: {what}")]
    InvariantBreach { slot: usize, what: String },

    /// Malformed serialized artifact (instance, episode, checkpoint, table).
    #[error("malformed {kind}: {detail}")]
    MalformedArtifact { kind: &'static str, detail: String },

    /// Checkpoint version this build does not understand.
    #[error("unsupported checkpoint version {got} (supported: {supported})")]
    UnsupportedVersion { got: u32, supported: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

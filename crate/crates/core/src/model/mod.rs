mod algorithm;
pub mod io;
mod path;
mod scheme;
mod topology;
mod traffic;

pub use algorithm::{Adaptivity, AlgorithmKind, PathSelector, UnknownAlgorithm};
pub use path::{Path, PathDisplay, Walk};
pub use scheme::{
    churn, normalize, prune_to_budget, validate_scheme, PathDistribution, RoutingScheme, Violation,
    PROBABILITY_TOLERANCE,
};
pub use topology::{Edge, EdgeId, LinkId, Node, NodeId, NodeKind, Topology, TopologyBuilder};
pub use traffic::TrafficMatrix;

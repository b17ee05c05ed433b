use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("link references unknown node `{0}`")]
    UnknownNode(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("link {a}-{b} has non-positive capacity {capacity}")]
    NonPositiveCapacity { a: String, b: String, capacity: f64 },
    #[error("link {a}-{b} has negative latency weight {weight}")]
    NegativeWeight { a: String, b: String, weight: f64 },
    #[error("topology is not connected")]
    Disconnected,
    #[error("host `{host}` must attach to exactly one switch (degree {degree})")]
    HostDegree { host: String, degree: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RoutingError {
    #[error("no path from {src} to {dst}")]
    UnreachablePair { src: String, dst: String },
    #[error("VLB needs at least two switches")]
    TooFewSwitches,
    #[error("k must be at least 1")]
    InvalidK,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RaeckeError {
    #[error("tree construction stopped at the iteration limit ({0}) before the utilization threshold")]
    IterationLimit(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("switch graph has no links")]
    NoLinks,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McfError {
    #[error("phase limit {phases} reached with gap {gap:.4} above accuracy")]
    PhaseLimit { phases: usize, gap: f64 },
    #[error("base path set misses pairs with positive demand: {}", fmt_pairs(.0))]
    MissingPaths(Vec<(String, String)>),
    #[error("demand envelope over an empty window")]
    EmptyWindow,
    #[error("failing link {0} disconnects the network")]
    DisconnectedScenario(String),
    #[error("no path from {src} to {dst}")]
    Unreachable { src: String, dst: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

fn fmt_pairs(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(a, b)| format!("{a}->{b}")).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DemandError {
    #[error("first traffic matrix carries no demand")]
    ZeroDemand,
    #[error("no host receives traffic; cannot pick a flash sink")]
    NoEligibleSink,
    #[error("need at least two hosts")]
    TooFewHosts,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Mcf(#[from] McfError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictError {
    #[error("history has {have} matrices, need {need}")]
    InsufficientHistory { need: usize, have: usize },
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid predictor configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("actual and predicted sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no connected removal of {phi} links found")]
    Infeasible { phi: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Raecke(#[from] RaeckeError),
    #[error(transparent)]
    Mcf(#[from] McfError),
    #[error(transparent)]
    Demand(#[from] DemandError),
}

/// Any error raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Raecke(#[from] RaeckeError),
    #[error(transparent)]
    Mcf(#[from] McfError),
    #[error(transparent)]
    Demand(#[from] DemandError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

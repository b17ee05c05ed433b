//! Traffic engineering for wide-area networks.
//!
//! Oblivious path selectors (SPF, ECMP, KSP, VLB, Räcke), demand-aware
//! multi-commodity flow solvers, semi-oblivious rate adaptation over fixed
//! path sets, synthetic demand generation, demand prediction, and a fluid
//! simulator with failures and flash bursts.

pub mod bundled;
pub mod demands;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod mcf;
pub mod model;
pub mod predict;
pub mod raecke;
pub mod routing;
pub mod sim;

pub use error::*;
pub use model::*;
pub use model::io::{parse_tm_sequence, parse_topology, read_tm_sequence, read_topology, write_tm_sequence};
pub use routing::{ecmp, ksp, spf, vlb, Coverage, KspConfig};
pub use raecke::{frt_tree, paths_from_distribution, raecke_distribution, stretch, RaeckeConfig, RoutingTree, TreeDistribution};
pub use mcf::{demand_envelope, mcf_mw, optimal_mcf_step, semi_mcf, semi_mcf_env, semi_mcf_ft_env, FlowSolution, MwConfig};
pub use sim::{failure_schedule, max_min_allocate, metrics_rollup, recover_global, recover_local, simulate, Recovery, SimConfig, SimReport, Summary};

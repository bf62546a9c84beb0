//! Prize-collecting arborescences, Lagrangian search and orienteering.

pub mod bench;
pub mod error;
pub mod graph;
pub mod iterpca;
pub mod lagrange;
pub mod oracle;
pub mod orienteering;
pub mod tsplib;

pub use error::{PcaError, Result};
pub use graph::{pcc, Arborescence, Arc, ArcId, Digraph, DistMatrix, NodeId, PcwInstance};
pub use iterpca::{iter_pca, iter_pca_stepwise, Certificate, PcaOutput};
pub use lagrange::{b_search_kmlp, bin_search_pca, lb_param, LambdaProbe, SearchConfig, Termination, TreeDistribution};
pub use orienteering::{
    solve, solve_cycle, solve_p2p, solve_rooted, OrienteeringInstance, OrienteeringOutcome, RouteKind, RoutedSolution,
    SolverConfig, UpperBoundReport,
};
pub use tsplib::{generate_rewards, parse_tsplib, RewardScheme, TsplibInstance};

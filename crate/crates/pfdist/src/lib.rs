//! Numerical solver for the real solutions of lossless power flow equations.
//!
//! The system lives on a connected graph with a slack node 0: for every other
//! node k there is a unit-circle equation `x_k^2 + y_k^2 = 1` and a flow
//! equation `sum_m b_km (x_k y_m - x_m y_k) = P_k` over the neighbors m of k,
//! with `(x_0, y_0) = (1, 0)` fixed. The susceptances b are the parameters.
//!
//! The pipeline: seed one nontrivial solution at random complex parameters,
//! grow it to a full set of orbit representatives by monodromy loops, then
//! carry that start set to any target parameters with a single parameter
//! homotopy per representative. On top of that sit Monte Carlo experiments for
//! the distribution of real-solution counts over random parameters, a Kac /
//! Sturm random-polynomial baseline, and sphere-grid region maps.
//!
//! Batch loops (trials, path bundles, grid cells) run on rayon when the
//! default `parallel` feature is enabled and fall back to sequential loops
//! otherwise; results are identical either way because every work item derives
//! its RNG from the run seed and its own index.

pub mod baseline;
pub mod distribution;
pub mod exec;
pub mod linalg;
pub mod monodromy;
pub mod network;
pub mod regions;
pub mod solver;
pub mod tracker;

pub use baseline::{kac_expected, random_poly_distribution, BaselineError, RealPolynomial};
pub use distribution::{
    dkw_epsilon, run_distribution, summarize, DistributionConfig, DistributionError,
    DistributionSummary, EmpiricalDistribution, Trial,
};
pub use exec::Pool;
pub use linalg::{CMat, LinalgError, NewtonResult, NewtonSystem};
pub use monodromy::{monodromy_solve, MonodromyError, OrbitSet, StoppingRule};
pub use network::{GraphFamily, Network, NetworkError, Point, PolySystem, SymmetryGroup};
pub use regions::{sample_region, RegionMap, RegionSpec, RegionsError};
pub use solver::{
    build_start_set, solve_all, GroupMode, SolutionSet, SolveError, SolveOptions, StartSet,
};
pub use tracker::{Homotopy, PathResult, PathStatus, TrackOptions};

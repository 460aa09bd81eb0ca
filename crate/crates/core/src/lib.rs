//! Anchor-free localization of sensor networks from noisy pairwise
//! distance bounds.
//!
//! Every range measurement between two nodes becomes a pair of squared
//! distance constraints. All constraints are folded into a single
//! max-of-ratios function of the configuration, parameterized by a scalar
//! budget `c0` on the sum of squared node norms. The scalar value function
//! obtained by minimizing that ratio over configurations is non-increasing
//! in `c0` and crosses 1 exactly at the optimal objective value, so
//! localization reduces to a one-dimensional root-finding problem. Each
//! evaluation of the value function is a finite minimax problem, solved
//! here by gradient descent on a log-sum-exp smoothing with a shrinking
//! smoothing parameter and Wolfe line searches.
//!
//! Modules:
//! - [`network`]: instance model, constraint functions and gradients.
//! - [`lagrangian`]: max-ratio function, its smoothing, and the gradient.
//! - [`solver`]: smoothing gradient descent with Wolfe line search.
//! - [`root`]: bracket expansion and bisection on the value function.
//! - [`harness`]: random instance generation, rigid alignment, error
//!   metrics, and density sweeps.
//! - [`fileio`]: line-oriented text formats for instances and positions.

pub mod error;
pub mod fileio;
pub mod harness;
pub mod lagrangian;
pub mod network;
pub mod root;
pub mod solver;

pub use error::{Error, Result};
pub use harness::{ErrorReport, GenerationSpec, SweepParams, SweepRow, TruthAndInstance};
pub use lagrangian::{LagrangianCoefficients, SmoothedEvaluation};
pub use network::{Configuration, Edge, FeasibilityReport, NetworkInstance};
pub use root::{Bracket, BracketOutcome, LocalizationResult, PsiEstimate, RootFinder, SignDecision};
pub use solver::{BoxRegion, MinimaxSolution, SolveTrace, SolverConfig, StepRecord};

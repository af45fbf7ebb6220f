//! Minimum-impurity hard partitioning of a noisy discrete observation.
//!
//! Given a joint distribution `p(X, Y)` over a hidden input `X` (N values) and an
//! observation `Y` (M values), find a hard quantizer `Q: Y -> Z` with K labels that
//! minimizes `beta * F(X, Z) + C(p_Z)`, where `F` is a frequency-weighted concave
//! impurity (entropy or Gini) and `C` is a separable concave function of the label
//! distribution (output entropy or a linear transmission cost).
//!
//! The crate is organized by stage:
//!
//! * [`distributions`] validated problem instances, posteriors, the binary-input
//!   Gaussian channel builder and information measures;
//! * [`impurity`] and [`constraints`] the two halves of the objective together with
//!   their closed-form derivatives;
//! * [`solver`] the gradient-distance assignment iteration, restarts and beta sweeps;
//! * [`oracle`] exhaustive and contiguity-based global optima plus a separability
//!   checker used to verify solver output;
//! * [`cli`] the command-line front-end.

pub mod cli;
pub mod constraints;
pub mod distributions;
mod error;
pub mod impurity;
pub mod oracle;
pub mod solver;

pub use constraints::ConstraintSpec;
pub use distributions::{ChannelSpec, JointDistribution, ObservationWeights};
pub use error::{Error, Result};
pub use impurity::{ClusterJoint, ImpurityLoss};
pub use oracle::OracleResult;
pub use solver::{
    ClusterStats, ObjectiveSpec, PartitionAssignment, RestartOptions, SolveOptions, SolveReport,
};

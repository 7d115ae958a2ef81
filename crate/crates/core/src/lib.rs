//! Joint transmit beamforming and fronthaul compression under per-antenna
//! power constraints.
//!
//! * [`network`]: instances, designs, and the constraint evaluators.
//! * [`sdr`]: cone programs for the semidefinite relaxation and for the
//!   inner problem of the partial Lagrangian dual.
//! * [`conic`]: residual-controlled interior-point solver for those programs.
//! * [`dual`]: projected gradient ascent on the power multipliers (exact,
//!   inexact, and subgradient variants).
//! * [`recovery`]: rank-one beamformer extraction and certification.
//! * [`bench`]: configuration, instance generation, and Monte-Carlo sweeps.

pub mod bench;
pub mod conic;
pub mod dual;
pub mod error;
pub mod hermitian;
pub mod network;
pub mod recovery;
pub mod sdr;

pub use bench::{paper_config, ExperimentConfig, Method};
pub use conic::{solve, SolveResult, SolveStatus, SolverSettings};
pub use dual::{run, Algorithm, OptimizerSettings, OutcomeReport};
pub use error::{Error, Result};
pub use network::{BeamformingDesign, CovarianceDesign, NetworkInstance};

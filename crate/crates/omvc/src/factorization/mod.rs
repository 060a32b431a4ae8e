//! The numerical core: per-chunk alternating minimization with
//! Hessian-preconditioned projected-gradient steps, closed-form consensus,
//! and incremental history accumulators.

pub mod alternation;
pub mod basis;
pub mod config;
pub mod consensus;
pub mod latent;
pub mod loss;
pub mod objective;
pub mod state;

pub use alternation::{chunk_alternation, draw_initial_factors, AlternationReport};
pub use basis::{basis_gradient, update_basis, StepFlags};
pub use config::SolverConfig;
pub use consensus::{consensus_residual, solve_consensus};
pub use latent::{latent_gradient, update_latent};
pub use loss::LossTracker;
pub use objective::chunk_objective;
pub use state::{ChunkFactors, FactorState, ViewFactor};

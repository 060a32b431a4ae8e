//! Streaming runs over a dataset: pass orchestration, consensus storage,
//! and checkpoint/resume.

pub mod checkpoint;
pub mod consensus_store;
pub mod run;

pub use checkpoint::Checkpoint;
pub use consensus_store::ConsensusStore;
pub use run::{
    resume_run, run_multi_pass, run_one_pass, working_set_estimate, LossPoint, RunFlags,
    RunOptions, RunReport,
};

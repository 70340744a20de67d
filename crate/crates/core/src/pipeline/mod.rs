//! Orchestration on top of the validator: streaming filter mode, batch
//! verifier mode, convergence detection, the refinement-loop simulator and
//! synthetic fixtures.

mod batch;
mod convergence;
pub mod fixtures;
pub mod io;
mod refine;
mod workers;

pub use batch::{
    evaluate, filter_stream, score_batch, summarize, verify_batch, Accepted, BatchSummary, FilterStats,
    RejectionReasons, VerifyOutcome,
};
pub use convergence::{convergence_check, ConvergenceStatus, TIE_TOLERANCE};
pub use fixtures::{generate_fixtures, Fixtures};
pub use refine::{
    run_refinement_loop, synthetic_student, IterationRecord, RefinementError, RefinementHistory, StudentAdapter,
    StudentBelief, StudentQuery, SyntheticStudent,
};
pub use workers::default_jobs;

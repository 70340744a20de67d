//! Rule-based quality validation for document visual question answering.
//!
//! A prediction is a (reasoning trace, answer, bounding box) tuple. The
//! validator scores it against a ground-truth example with detected OCR
//! regions, explains what went wrong, and drives batch filtering, batch
//! verification and a simulated refinement loop.

pub mod cli;
pub mod cot;
pub mod error;
pub mod feedback;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod validators;

pub use error::{Error, Result};
pub use model::{BBox, DocumentExample, PageGeometry, PredictionTuple, QualityBreakdown, Region, ValidatorConfig};

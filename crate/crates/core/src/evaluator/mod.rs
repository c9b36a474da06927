//! Scoring backends for candidate models.

mod cache;
mod external;
mod surrogate;

pub use cache::Cached;
pub use external::{
    external_evaluate, ExternalEvaluator, WorkerCommand, WorkerRequest, WorkerResponse,
    DEFAULT_TRAIN_EPOCHS, PROTOCOL_VERSION,
};
pub use surrogate::{surrogate_evaluate, SurrogateEvaluator, SurrogateWeights};

use thiserror::Error;

use crate::objective::EvaluationResult;
use crate::scalar::Scalar;
use crate::search_space::ArchitectureCode;

#[derive(Debug, Error)]
pub enum EvaluatorError {
    /// The backend cannot serve any further requests.
    #[error("evaluator unavailable: {0}")]
    Unavailable(String),
}

/// Anything that can score a valid architecture code.
///
/// Per-candidate problems (bad reply, timeout, crash mid-request) are
/// reported as failed results. `Err` means the backend itself is gone.
pub trait Evaluator<T: Scalar> {
    fn evaluate(&mut self, code: &ArchitectureCode) -> Result<EvaluationResult<T>, EvaluatorError>;

    /// Whether wall-clock time of a call is meaningful to log. In-process
    /// scoring reports none so that episode logs stay reproducible.
    fn measures_wall_time(&self) -> bool {
        false
    }
}

impl<T: Scalar, E: Evaluator<T> + ?Sized> Evaluator<T> for Box<E> {
    fn evaluate(&mut self, code: &ArchitectureCode) -> Result<EvaluationResult<T>, EvaluatorError> {
        (**self).evaluate(code)
    }

    fn measures_wall_time(&self) -> bool {
        (**self).measures_wall_time()
    }
}

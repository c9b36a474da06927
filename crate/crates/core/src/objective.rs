//! Feasibility, the log-barrier objective, and shaped rewards.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Objective settings. `lambda` weights the barrier; lower objective is better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ObjectiveConfig<T> {
    pub lambda: T,
    pub t_max: T,
    /// Infeasible results get the failure return instead of the barrier value.
    pub hard_reject: bool,
    pub failure_mae: T,
}

impl<T: Scalar> ObjectiveConfig<T> {
    /// Defaults: `lambda = e^-19`, hard rejection on, failure MAE `1e6`.
    pub fn new(t_max: T) -> Self {
        Self {
            lambda: T::lit(-19.0).exp(),
            t_max,
            hard_reject: true,
            failure_mae: T::lit(1e6),
        }
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if !(self.t_max > T::zero() && self.t_max.is_finite()) {
            return Err(ObjectiveError::InvalidConfig("t_max must be positive".into()));
        }
        if !(self.lambda >= T::zero() && self.lambda.is_finite()) {
            return Err(ObjectiveError::InvalidConfig("lambda must be non-negative".into()));
        }
        if !(self.failure_mae > T::zero() && self.failure_mae.is_finite()) {
            return Err(ObjectiveError::InvalidConfig("failure_mae must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", tag = "status", rename_all = "snake_case")]
pub enum EvaluationResult<T> {
    Ok { mae: T, inference_time: T },
    Failed { reason: String },
}

impl<T: Scalar> EvaluationResult<T> {
    /// An ok result; non-finite, negative MAE or non-positive time become failures.
    pub fn ok(mae: T, inference_time: T) -> Self {
        if !mae.is_finite() || !inference_time.is_finite() {
            return Self::failed("non-finite measurement");
        }
        if mae < T::zero() || inference_time <= T::zero() {
            return Self::failed("measurement out of range");
        }
        Self::Ok { mae, inference_time }
    }

    pub fn failed(reason: impl Into<String>) -> Self {
        Self::Failed { reason: reason.into() }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Self::Ok { .. })
    }

    pub fn mae(&self) -> Option<T> {
        match self {
            Self::Ok { mae, .. } => Some(*mae),
            Self::Failed { .. } => None,
        }
    }

    pub fn inference_time(&self) -> Option<T> {
        match self {
            Self::Ok { inference_time, .. } => Some(*inference_time),
            Self::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObjectiveError {
    #[error("evaluation failed: {0}")]
    FailedEvaluation(String),
    #[error("cannot shape a return over zero transitions")]
    ZeroTransitions,
    #[error("invalid objective config: {0}")]
    InvalidConfig(String),
}

/// `T(m) <= t_max`, boundary inclusive.
pub fn feasible<T: Scalar>(r: &EvaluationResult<T>, cfg: &ObjectiveConfig<T>) -> Result<bool, ObjectiveError> {
    match r {
        EvaluationResult::Ok { inference_time, .. } => Ok(*inference_time <= cfg.t_max),
        EvaluationResult::Failed { reason } => Err(ObjectiveError::FailedEvaluation(reason.clone())),
    }
}

/// `mae - lambda * ln(t_max / T)`; failures score `failure_mae`.
pub fn objective_value<T: Scalar>(r: &EvaluationResult<T>, cfg: &ObjectiveConfig<T>) -> T {
    match r {
        EvaluationResult::Ok { mae, inference_time } => {
            *mae - cfg.lambda * (cfg.t_max / *inference_time).ln()
        }
        EvaluationResult::Failed { .. } => cfg.failure_mae,
    }
}

/// Episode return `R`, the negated objective, with hard rejection applied.
pub fn episode_return<T: Scalar>(r: &EvaluationResult<T>, cfg: &ObjectiveConfig<T>) -> T {
    match feasible(r, cfg) {
        Err(_) => -cfg.failure_mae,
        Ok(false) if cfg.hard_reject => -cfg.failure_mae,
        Ok(_) => -objective_value(r, cfg),
    }
}

/// Splits `total` equally over `num_transitions` steps.
pub fn shape_rewards<T: Scalar>(total: T, num_transitions: usize) -> Result<Vec<T>, ObjectiveError> {
    if num_transitions == 0 {
        return Err(ObjectiveError::ZeroTransitions);
    }
    let n = T::from_usize(num_transitions).expect("transition count representable");
    Ok(vec![total / n; num_transitions])
}

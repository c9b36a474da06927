use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("epsilon schedule has no breakpoints")]
    EmptySchedule,
    #[error("epsilon breakpoints must be sorted by episode")]
    Unsorted,
    #[error("epsilon values must lie in [0, 1]")]
    OutOfRange,
}

/// Piecewise-linear ε over episodes, clamped outside the breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", transparent)]
pub struct EpsilonSchedule<T> {
    pub breakpoints: Vec<(u64, T)>,
}

impl<T: Scalar> EpsilonSchedule<T> {
    pub fn new(breakpoints: Vec<(u64, T)>) -> Result<Self, ScheduleError> {
        let s = Self { breakpoints };
        s.validate()?;
        Ok(s)
    }

    /// Holds 0.9 for the first 10% of episodes, decays linearly to 0.0 at
    /// 90%, then holds 0.0.
    pub fn default_for(episodes: u64) -> Self {
        let last = episodes.saturating_sub(1);
        let hold = episodes / 10;
        let end = (episodes * 9 / 10).clamp(hold, last.max(hold));
        Self {
            breakpoints: vec![(0, T::lit(0.9)), (hold, T::lit(0.9)), (end, T::zero())],
        }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        if self.breakpoints.is_empty() {
            return Err(ScheduleError::EmptySchedule);
        }
        if self.breakpoints.windows(2).any(|w| w[0].0 > w[1].0) {
            return Err(ScheduleError::Unsorted);
        }
        if self
            .breakpoints
            .iter()
            .any(|&(_, e)| !(e >= T::zero() && e <= T::one()))
        {
            return Err(ScheduleError::OutOfRange);
        }
        Ok(())
    }
}

pub fn epsilon_at<T: Scalar>(schedule: &EpsilonSchedule<T>, episode: u64) -> Result<T, ScheduleError> {
    let bp = &schedule.breakpoints;
    let (&(first_ep, first_eps), &(last_ep, last_eps)) = match (bp.first(), bp.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(ScheduleError::EmptySchedule),
    };
    if episode < first_ep {
        return Ok(first_eps);
    }
    if episode >= last_ep {
        return Ok(last_eps);
    }
    // Last segment whose start is at or before `episode`.
    let i = bp.iter().rposition(|&(e, _)| e <= episode).unwrap_or(0);
    let (e0, v0) = bp[i];
    let (e1, v1) = bp[i + 1];
    if e1 == e0 {
        return Ok(v1);
    }
    let frac = T::from_u64(episode - e0).expect("episode") / T::from_u64(e1 - e0).expect("episode");
    Ok(v0 + (v1 - v0) * frac)
}

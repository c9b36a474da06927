//! Tabular Q-learning over the state-vector trajectory space.

mod schedule;
mod table;

pub use schedule::{epsilon_at, EpsilonSchedule, ScheduleError};
pub use table::{CheckpointError, CheckpointMeta, QCheckpoint, QTable};

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{Cached, Evaluator, EvaluatorError};
use crate::objective::{self, EvaluationResult, ObjectiveConfig};
use crate::scalar::Scalar;
use crate::search_space::{
    action_space, start_state, ArchitectureCode, ParameterCatalog, StateError, StateVector,
};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct QLearningConfig<T> {
    pub alpha: T,
    pub gamma: T,
    pub episodes: u64,
    pub epsilon_schedule: EpsilonSchedule<T>,
    pub rng_seed: u64,
}

impl<T: Scalar> QLearningConfig<T> {
    /// `alpha = 0.001`, `gamma = 0.9`, default ε schedule.
    pub fn new(episodes: u64, rng_seed: u64) -> Self {
        Self {
            alpha: T::lit(0.001),
            gamma: T::lit(0.9),
            episodes,
            epsilon_schedule: EpsilonSchedule::default_for(episodes),
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<(), QLearningError> {
        if !(self.alpha > T::zero() && self.alpha <= T::one()) {
            return Err(QLearningError::InvalidConfig("alpha must lie in (0, 1]".into()));
        }
        if !(self.gamma >= T::zero() && self.gamma <= T::one()) {
            return Err(QLearningError::InvalidConfig("gamma must lie in [0, 1]".into()));
        }
        self.epsilon_schedule.validate()?;
        Ok(())
    }
}

impl Default for QLearningConfig<f64> {
    fn default() -> Self {
        Self::new(2000, 0)
    }
}

#[derive(Debug, Error)]
pub enum QLearningError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("invalid q-learning config: {0}")]
    InvalidConfig(String),
}

/// `(1 − α)·q + α·(r + γ·max_next)`; the discounted term is dropped when
/// there is no next state.
pub fn bellman_update<T: Scalar>(q: T, alpha: T, gamma: T, reward: T, max_next: Option<T>) -> T {
    let target = match max_next {
        Some(m) => reward + gamma * m,
        None => reward,
    };
    (T::one() - alpha) * q + alpha * target
}

/// ε-greedy choice; greedy ties go to the first action in canonical order.
pub fn select_action<T: Scalar, R: Rng + ?Sized>(
    state: &StateVector,
    qtable: &QTable<T>,
    catalog: &ParameterCatalog,
    epsilon: T,
    rng: &mut R,
) -> Result<StateVector, StateError> {
    let actions = action_space(state, catalog)?;
    let explore = rng.gen::<f64>() < epsilon.as_f64();
    if explore {
        return Ok(actions[rng.gen_range(0..actions.len())]);
    }
    let mut best = actions[0];
    let mut best_q = qtable.get(state, &best);
    for a in &actions[1..] {
        let q = qtable.get(state, a);
        if q > best_q {
            best = *a;
            best_q = q;
        }
    }
    Ok(best)
}

fn is_final(s: &StateVector, catalog: &ParameterCatalog) -> bool {
    s.is_terminal() || s.index >= catalog.max_blocks as i32
}

/// Walks from the start state until a terminal state or block index N.
pub fn sample_trajectory<T: Scalar, R: Rng + ?Sized>(
    qtable: &QTable<T>,
    catalog: &ParameterCatalog,
    epsilon: T,
    rng: &mut R,
) -> Result<ArchitectureCode, StateError> {
    let mut states = vec![start_state()];
    let mut s = start_state();
    while !is_final(&s, catalog) {
        s = select_action(&s, qtable, catalog, epsilon, rng)?;
        states.push(s);
    }
    Ok(ArchitectureCode::new(states))
}

/// The learned policy's trajectory (ε = 0).
pub fn greedy_rollout<T: Scalar>(
    qtable: &QTable<T>,
    catalog: &ParameterCatalog,
) -> Result<ArchitectureCode, StateError> {
    let mut rng = seed::stream_rng(0, "greedy", 0);
    sample_trajectory(qtable, catalog, T::zero(), &mut rng)
}

/// Applies the iterative Bellman update to every transition of `code`,
/// last transition first, with the return split equally over transitions.
/// Returns the number of entries written.
pub fn update_trajectory<T: Scalar>(
    qtable: &mut QTable<T>,
    code: &ArchitectureCode,
    return_r: T,
    alpha: T,
    gamma: T,
    catalog: &ParameterCatalog,
) -> Result<usize, StateError> {
    let n = code.transitions();
    let Ok(rewards) = objective::shape_rewards(return_r, n) else {
        return Ok(0);
    };
    for i in (0..n).rev() {
        let s = code.states[i];
        let a = code.states[i + 1];
        let max_next = if i + 1 == n {
            None
        } else {
            let next_actions = action_space(&a, catalog)?;
            qtable.max_over(&a, &next_actions)
        };
        let updated = bellman_update(qtable.get(&s, &a), alpha, gamma, rewards[i], max_next);
        qtable.set(s, a, updated);
    }
    Ok(n)
}

/// One line of the episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EpisodeRecord<T> {
    pub episode: u64,
    pub epsilon: T,
    pub code: ArchitectureCode,
    pub mae: Option<T>,
    pub inference_time: Option<T>,
    pub feasible: bool,
    /// Penalized objective, always `-return_r`.
    pub objective: T,
    pub return_r: T,
    pub from_cache: bool,
    pub wall_time_ms: u64,
}

impl<T: Scalar> EpisodeRecord<T> {
    pub fn result(&self) -> EvaluationResult<T> {
        match (self.mae, self.inference_time) {
            (Some(m), Some(t)) => EvaluationResult::ok(m, t),
            _ => EvaluationResult::failed("failed evaluation"),
        }
    }

    /// Whether this episode may be reported as the best model.
    pub fn counts_as_best(&self) -> bool {
        self.feasible && self.mae.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BestFound<T> {
    pub code: ArchitectureCode,
    pub episode: u64,
    pub mae: T,
    pub inference_time: T,
    pub objective: T,
}

impl<T: Scalar> BestFound<T> {
    /// Keeps the strictly lower objective; earlier episodes win ties.
    pub fn consider(best: &mut Option<Self>, rec: &EpisodeRecord<T>) {
        if !rec.counts_as_best() {
            return;
        }
        if best.as_ref().is_some_and(|b| b.objective <= rec.objective) {
            return;
        }
        *best = Some(Self {
            code: rec.code.clone(),
            episode: rec.episode,
            mae: rec.mae.expect("ok result"),
            inference_time: rec.inference_time.expect("ok result"),
            objective: rec.objective,
        });
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome<T> {
    pub best: Option<BestFound<T>>,
    pub greedy: ArchitectureCode,
    pub qtable: QTable<T>,
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("evaluator unavailable at episode {episode}: {source}")]
    EvaluatorUnavailable {
        episode: u64,
        #[source]
        source: EvaluatorError,
    },
    #[error("episode sink failed at episode {episode}: {message}")]
    Sink { episode: u64, message: String },
    #[error(transparent)]
    QLearning(#[from] QLearningError),
}

impl From<StateError> for SearchError {
    fn from(e: StateError) -> Self {
        Self::QLearning(e.into())
    }
}

/// Receives each episode record together with the table after its update.
pub trait EpisodeSink<T> {
    fn record(&mut self, record: &EpisodeRecord<T>, qtable: &QTable<T>) -> Result<(), String>;
}

impl<T, F> EpisodeSink<T> for F
where
    F: FnMut(&EpisodeRecord<T>, &QTable<T>) -> Result<(), String>,
{
    fn record(&mut self, record: &EpisodeRecord<T>, qtable: &QTable<T>) -> Result<(), String> {
        self(record, qtable)
    }
}

/// Discards every record.
pub struct NoSink;

impl<T> EpisodeSink<T> for NoSink {
    fn record(&mut self, _: &EpisodeRecord<T>, _: &QTable<T>) -> Result<(), String> {
        Ok(())
    }
}

/// Search state that can be stopped after any episode and resumed.
///
/// Episode `e` draws from its own random stream derived from
/// `(rng_seed, "trajectory", e)`, so a resumed search needs only the table
/// and the episode counter to continue exactly as an uninterrupted one.
#[derive(Debug, Clone)]
pub struct Search<T> {
    catalog: ParameterCatalog,
    qcfg: QLearningConfig<T>,
    ocfg: ObjectiveConfig<T>,
    qtable: QTable<T>,
    next_episode: u64,
    best: Option<BestFound<T>>,
}

impl<T: Scalar> Search<T> {
    pub fn new(
        catalog: ParameterCatalog,
        qcfg: QLearningConfig<T>,
        ocfg: ObjectiveConfig<T>,
    ) -> Result<Self, QLearningError> {
        catalog
            .validate()
            .map_err(|e| QLearningError::InvalidConfig(e.to_string()))?;
        qcfg.validate()?;
        ocfg.validate()
            .map_err(|e| QLearningError::InvalidConfig(e.to_string()))?;
        Ok(Self {
            catalog,
            qcfg,
            ocfg,
            qtable: QTable::new(),
            next_episode: 0,
            best: None,
        })
    }

    /// Continues from a checkpointed table after `next_episode` completed episodes.
    pub fn resume(mut self, qtable: QTable<T>, next_episode: u64, best: Option<BestFound<T>>) -> Self {
        self.qtable = qtable;
        self.next_episode = next_episode;
        self.best = best;
        self
    }

    pub fn qtable(&self) -> &QTable<T> {
        &self.qtable
    }

    pub fn next_episode(&self) -> u64 {
        self.next_episode
    }

    pub fn best(&self) -> Option<&BestFound<T>> {
        self.best.as_ref()
    }

    pub fn config(&self) -> &QLearningConfig<T> {
        &self.qcfg
    }

    pub fn is_done(&self) -> bool {
        self.next_episode >= self.qcfg.episodes
    }

    pub fn checkpoint(&self) -> QCheckpoint<T> {
        self.qtable.checkpoint(CheckpointMeta {
            episode: self.next_episode,
            rng_state_seed: self.qcfg.rng_seed,
            alpha: self.qcfg.alpha,
            gamma: self.qcfg.gamma,
        })
    }

    /// Runs one episode: sample, evaluate, update, record.
    pub fn step<E: Evaluator<T>>(
        &mut self,
        evaluator: &mut Cached<T, E>,
    ) -> Result<EpisodeRecord<T>, SearchError> {
        let episode = self.next_episode;
        let epsilon = epsilon_at(&self.qcfg.epsilon_schedule, episode).map_err(QLearningError::from)?;
        let mut rng = seed::stream_rng(self.qcfg.rng_seed, "trajectory", episode);
        let code = sample_trajectory(&self.qtable, &self.catalog, epsilon, &mut rng)?;

        let timed = evaluator.measures_wall_time();
        let started = Instant::now();
        let (result, from_cache) = evaluator
            .lookup(&code)
            .map_err(|source| SearchError::EvaluatorUnavailable { episode, source })?;
        let wall_time_ms = if timed && !from_cache {
            u64::try_from(started.elapsed().as_millis()).unwrap_or(u64::MAX)
        } else {
            0
        };

        let return_r = objective::episode_return(&result, &self.ocfg);
        update_trajectory(
            &mut self.qtable,
            &code,
            return_r,
            self.qcfg.alpha,
            self.qcfg.gamma,
            &self.catalog,
        )?;
        let record = EpisodeRecord {
            episode,
            epsilon,
            feasible: objective::feasible(&result, &self.ocfg).unwrap_or(false),
            mae: result.mae(),
            inference_time: result.inference_time(),
            objective: -return_r,
            return_r,
            from_cache,
            wall_time_ms,
            code,
        };
        BestFound::consider(&mut self.best, &record);
        self.next_episode += 1;
        Ok(record)
    }

    /// Runs remaining episodes, handing each record to `sink`.
    pub fn run<E: Evaluator<T>>(
        &mut self,
        evaluator: &mut Cached<T, E>,
        sink: &mut dyn EpisodeSink<T>,
    ) -> Result<(), SearchError> {
        self.run_until(self.qcfg.episodes, evaluator, sink)
    }

    /// Runs episodes until `stop` episodes have completed (capped at the total).
    pub fn run_until<E: Evaluator<T>>(
        &mut self,
        stop: u64,
        evaluator: &mut Cached<T, E>,
        sink: &mut dyn EpisodeSink<T>,
    ) -> Result<(), SearchError> {
        let stop = stop.min(self.qcfg.episodes);
        while self.next_episode < stop {
            let record = self.step(evaluator)?;
            sink.record(&record, &self.qtable)
                .map_err(|message| SearchError::Sink {
                    episode: record.episode,
                    message,
                })?;
        }
        Ok(())
    }

    pub fn outcome(&self) -> Result<SearchOutcome<T>, SearchError> {
        Ok(SearchOutcome {
            best: self.best.clone(),
            greedy: greedy_rollout(&self.qtable, &self.catalog)?,
            qtable: self.qtable.clone(),
        })
    }
}

/// Runs a complete search from an empty table.
pub fn run_search<T: Scalar, E: Evaluator<T>>(
    catalog: &ParameterCatalog,
    qcfg: &QLearningConfig<T>,
    ocfg: &ObjectiveConfig<T>,
    evaluator: &mut Cached<T, E>,
    sink: &mut dyn EpisodeSink<T>,
) -> Result<SearchOutcome<T>, SearchError> {
    let mut search = Search::new(catalog.clone(), qcfg.clone(), *ocfg)?;
    search.run(evaluator, sink)?;
    search.outcome()
}

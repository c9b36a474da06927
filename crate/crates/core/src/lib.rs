//! Constraint-aware Q-learning search over parameterized spatial-temporal
//! GCN architectures.
//!
//! Candidate models are encoded as trajectories of 5-integer state vectors
//! ([`search_space`]), decoded into symbolic computation graphs ([`graph`]),
//! scored by pluggable backends ([`evaluator`]) under a log-barrier
//! inference-time objective ([`objective`]), and searched with tabular
//! ε-greedy Q-learning ([`qlearning`]).
//!
//! Real-valued types are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common case.

pub mod evaluator;
pub mod graph;
pub mod objective;
pub mod qlearning;
pub mod scalar;
pub mod search_space;
pub mod seed;

pub use scalar::Scalar;

pub type ObjectiveConfigF64 = objective::ObjectiveConfig<f64>;
pub type ObjectiveConfigF32 = objective::ObjectiveConfig<f32>;
pub type EvaluationResultF64 = objective::EvaluationResult<f64>;
pub type EvaluationResultF32 = objective::EvaluationResult<f32>;
pub type QLearningConfigF64 = qlearning::QLearningConfig<f64>;
pub type QLearningConfigF32 = qlearning::QLearningConfig<f32>;
pub type QTableF64 = qlearning::QTable<f64>;
pub type QTableF32 = qlearning::QTable<f32>;
pub type EpisodeRecordF64 = qlearning::EpisodeRecord<f64>;
pub type SearchF64 = qlearning::Search<f64>;
pub type SurrogateWeightsF64 = evaluator::SurrogateWeights<f64>;
pub type SurrogateWeightsF32 = evaluator::SurrogateWeights<f32>;

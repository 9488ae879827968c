//! Graph actor-critic trained with PPO.

pub mod checkpoint;
pub mod gradcheck;
pub mod nn;
pub mod policy;
pub mod ppo;

pub use checkpoint::Checkpoint;
pub use policy::{ArchConfig, Decision, PolicyNet};
pub use ppo::{infer, train, EpisodeMetrics, InferenceResult, ScenarioSource, TrainConfig, TrainOutput, TransitionRecord};

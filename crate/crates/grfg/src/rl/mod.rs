//! Value-based agents for the selection cascade: a small ReLU network per
//! agent, Adam updates over replayed one-step TD targets, epsilon-greedy
//! exploration on a multiplicative decay schedule, and binary checkpoints
//! that restore behavior exactly.

mod adam;
mod agent;
mod checkpoint;
mod mlp;
mod replay;

pub use adam::AdamState;
pub use agent::{
    select_action, AgentConfig, GroupAgent, GroupTransition, OpAgent, OpTransition, TrainCadence,
};
pub use checkpoint::{load_cascade, save_cascade};
pub use mlp::{Mlp, MlpGrads};
pub use replay::ReplayBuffer;

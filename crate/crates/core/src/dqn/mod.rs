//! Deep Q-learning: experience replay, epsilon-greedy selection, bootstrapped
//! targets from a periodically synced target network.

mod agent;
mod replay;

pub use agent::{
    argmax, compute_target, maybe_sync_target, minibatch_update, select_action, train_step, DqnAgent, DqnConfig,
};
pub use replay::{ReplayBuffer, Transition};

//! Interactive deep reinforcement learning for AUV path following.
//!
//! A planar kinematic vehicle is steered by a DQN agent toward a straight
//! line or a sinusoid. Agents learn from the environment reward, from a
//! trainer's reward, or from their sum.

pub mod dqn;
pub mod error;
pub mod feedback;
pub mod guidance;
pub mod harness;
pub mod nn;
pub mod reward;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};

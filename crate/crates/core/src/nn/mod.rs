//! Minimal fully connected Q-network: forward pass, backpropagation for a
//! squared error on one selected output, Adam updates, checkpoints and a
//! finite-difference gradient checker.

mod adam;
mod checkpoint;
mod gradcheck;
mod mlp;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{decode_f64, deserialize, encode_f64, serialize, Checkpoint, CheckpointError, FORMAT};
pub use gradcheck::{gradient_check, GradCheckReport, RELATIVE_FLOOR};
pub use mlp::{Dense, Gradients, Mlp};

/// Deep value copy, used for target-network syncs.
pub fn copy_params(src: &Mlp) -> Mlp {
    src.clone()
}

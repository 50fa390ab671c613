//! Dense feed-forward networks with analytic gradients, Adam and a binary
//! checkpoint format. Double precision throughout.

mod adam;
pub mod checkpoint;
mod net;

pub use adam::{adam_step, AdamConfig, AdamState, StepStats};
pub use checkpoint::{load_net, save_net};
pub use net::{Activation, DenseNet, ForwardCache, Gradients, Layer};

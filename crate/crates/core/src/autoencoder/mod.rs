//! Dense denoising autoencoder: forward pass, backpropagation and Adadelta
//! training.

mod backprop;
mod network;
mod train;

pub use backprop::{backward, Gradients, Loss};
pub use network::{logistic, Activation, ForwardPass, Layer, NetworkParams};
pub use train::{train, Adadelta, AdadeltaConfig, TrainConfig, TrainOutcome};

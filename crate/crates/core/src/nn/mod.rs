//! Minimal differentiable-tensor engine sized for LocNet.
//!
//! There is no general autograd graph: models are static layer sequences with
//! a few skip and gate junctions whose backward passes are written out by hand.

pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod optim;
pub mod scalar;
pub mod tensor;

pub use layers::{same_padding, sigmoid_scalar, BatchNorm2d, Conv2d, Dense, Dropout, Layer, Mode, Relu, Sigmoid};
pub use loss::euclidean_loss;
pub use optim::{adam_step, Adam, AdamConfig, AdamState};
pub use scalar::Scalar;
pub use tensor::{add, mul, sum_loss, Tensor};

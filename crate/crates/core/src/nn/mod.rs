//! Minimal dense tensors with hand-written backward passes: 2-D convolution,
//! ReLU, sigmoid, min-max scaling, the convolutional encoders, Adam and a
//! central-difference gradient checker. Everything is `f64`.

pub mod activation;
pub mod adam;
pub mod checkpoint;
pub mod conv;
pub mod encoder;
pub mod gradcheck;
mod tensor;

pub use activation::{minmax_scale, minmax_scale_backward, relu_backward, relu_forward, sigmoid, sigmoid_backward, sigmoid_forward};
pub use adam::{adam_step, Adam, AdamConfig, AdamState};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvLayer};
pub use encoder::{Encoder, EncoderConfig, EncoderTape};
pub use gradcheck::grad_check;
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("image {height}x{width} is not divisible by tile size {tile}")]
    Resolution { height: usize, width: usize, tile: usize },
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

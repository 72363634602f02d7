//! Dense-network numerics shared by actors, critics and forward models.

mod adam;
mod gradcheck;
mod matrix;
mod mlp;
mod serialize;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{gradient_check, half_mse_loss, random_network_suite, relative_error, GradCheckReport, SuiteReport, FD_STEP, SUITE_MIN_GRADIENT};
pub use matrix::Matrix;
pub use mlp::{Activation, DenseLayer, ForwardCache, Gradients, LayerGradient, Mlp};
pub use serialize::{read_adam, read_mlp, write_adam, write_mlp};

#[derive(Debug, thiserror::Error)]
pub enum NumericError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("forward cache does not belong to the current parameters")]
    StaleCache,
    #[error("non-finite value in layer {layer}")]
    NonFinite { layer: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed snapshot: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

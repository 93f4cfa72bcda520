//! Differentiable kernels for the fixed generator/critic layer set, each
//! with a hand-derived backward pass.
//!
//! Kernels are pure functions of their parameters and inputs. Reductions run
//! in a fixed order, so results do not depend on thread count.

mod activation;
mod batchnorm;
pub mod checkpoint;
mod conv;
mod dense;
mod dropout;
pub mod gradcheck;
mod optim;
mod param;
mod scalar;
mod tensor;
mod upsample;

pub use activation::{activation, Activation};
pub use batchnorm::{BatchNormCache, BatchNormLayer};
pub use checkpoint::{Blob, Checkpoint};
pub use conv::{conv1d_backward, conv1d_forward, Conv1dGrads, Conv1dLayer};
pub use dense::{dense_backward, dense_forward, DenseGrads, DenseLayer};
pub use dropout::Dropout;
pub use gradcheck::{grad_check, CaseSpec, LayerKind};
pub use optim::{optimizer_step, OptimizerState};
pub use param::{Module, Param};
pub use scalar::Scalar;
pub use tensor::Tensor3;
pub use upsample::{upsample, upsample_backward, UpsampleMode};

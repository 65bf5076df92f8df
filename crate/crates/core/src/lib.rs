//! Tensor normal distributions and multi-task networks with learned task
//! covariance, for multi-task classification.
//!
//! - [`tensor`] and [`matrix`]: dense order-3 tensors, matricization, mode
//!   products and Kronecker products.
//! - [`tnd`]: the tensor normal distribution with Kronecker-structured
//!   covariance, its log-density, sampling and flip-flop estimation.
//! - [`net`]: a multi-task network whose task-specific layers stack into
//!   order-3 parameter tensors carrying a tensor normal prior.
//! - [`trainer`]: alternating optimization of network parameters and the
//!   prior's feature, class and task covariances.
//! - [`data`]: multi-task datasets, seeded splits and a synthetic generator
//!   with a known task covariance.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod data;
pub mod error;
pub mod linalg;
pub mod matrix;
pub mod net;
pub mod tensor;
pub mod tnd;
pub mod trainer;

pub use error::{Error, Result};
pub use linalg::{OpCounter, SpdFactor};
pub use matrix::{kronecker, DenseMatrix};
pub use tensor::Tensor3;
pub use tnd::{
    flip_flop_mle, mle_mean, normalize_identifiable, FlipFlopFit, FlipFlopOptions,
    KronCovariance, TensorNormal,
};
pub use trainer::{train, TrainConfig, TrainReport, Trained};

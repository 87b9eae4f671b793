//! Cascading-rejection (CR) discriminator heads on a small reverse-mode
//! autodiff engine, plus a 2D Gaussian-mixture lab for measuring mode
//! collapse.
//!
//! Batches are feature-major throughout: a batch of `B` points in `d`
//! dimensions is a `d × B` tensor, and a head with `N` stages returns
//! `N × B` scores.

pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod cr_head;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod linalg;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod selftest;
pub mod tensor;
pub mod train;

pub use autodiff::{Gradients, Graph, NodeId};
pub use config::{HeadKind, RunConfig, Task};
pub use cr_head::{CCRHead, CRHead};
pub use data::{Batch, GmmSpec, LatentSpec};
pub use error::{Error, Result, Shape};
pub use loss::LossForm;
pub use metrics::{GaussianMoments, ModeReport};
pub use rng::{Rng, Stream};
pub use tensor::Tensor;
pub use train::{sweep, train, RunLog};

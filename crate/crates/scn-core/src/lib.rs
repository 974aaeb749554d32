//! Subspace-configurable networks (SCNs).
//!
//! An SCN pairs a small configuration network `h` with `D` base weight
//! vectors. For a transformation parameter `alpha` the inference weights are
//! composed as `theta = sum_i beta_i * theta_i` with `beta = h(enc(alpha))`
//! on the probability simplex. This crate carries the whole numeric stack:
//! a reverse-mode tape over dense tensors, inference architectures with flat
//! parameter layouts, parameterized input transformations, deterministic
//! synthetic datasets, the SCN/baseline training loops, entropy-based search
//! over alpha, and subspace diagnostics.
//!
//! The crate is `no_std` + `alloc`; all file IO lives in the companion
//! `scn-tools` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod data;
pub mod diag;
pub mod error;
pub mod netspec;
pub mod rng;
pub mod scalar;
pub mod scn;
pub mod search;
pub mod tensor;
pub mod train;
pub mod transforms;

pub use error::{Result, ScnError};
pub use scalar::Scalar;
pub use tensor::Tensor;

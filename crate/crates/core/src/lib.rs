//! Billiards in strictly convex planar tables with randomly perturbed
//! reflection angles.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every numerical
//! piece: arc-length tables, the deterministic billiard map and its
//! differential, the perturbation kernels, seeded Markov chains, the
//! ergodicity diagnostics and the reachability / minorization checks.
//! Parallelism is abstracted behind [`exec::Executor`]; the std companion
//! crate supplies a thread-pool implementation.
#![no_std]
#![deny(rustdoc::broken_intra_doc_links)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod billiard_map;
pub mod chain;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod kernel;
pub mod math;
pub mod reachability;
pub mod rng;
pub mod tolerances;

pub use billiard_map::{Jacobian2x2, PhasePoint};
pub use error::{Error, Result};
pub use geometry::{Table, TableSpec};
pub use kernel::{Kernel, KernelFamily};

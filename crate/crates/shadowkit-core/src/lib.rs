//! Numerical machinery for generalized hyperbolic splittings on finite windows of `l^p(Z)`.
//!
//! The crate is `no_std` (with `alloc`). Every object lives on a finite index
//! window; maps that move support (the weighted shifts) are guarded by a
//! boundary-mass check so truncation never silently corrupts a result.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod error;

pub mod boundedsol;
pub mod clstruct;
pub mod graphtf;
pub mod semiconj;
pub mod seqcore;
pub mod shadow;
pub mod systems;

pub use error::{Error, Result};

/// Crate version, echoed in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

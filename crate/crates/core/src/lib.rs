//! Stability analysis and robust output regulation for impedance passive linear
//! systems coupled with internal-model controllers.
//!
//! Plants and controllers are finite-dimensional state-space realizations, either
//! given directly or obtained from the discretizations in [`pde_models`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_loop;
pub mod controllers;
pub mod error;
pub mod examples;
pub mod fit;
pub mod io;
pub mod lti;
pub mod numerics;
pub mod pde_models;
pub mod propagate;
pub mod regulation;
pub mod stability;

pub use error::{Error, Result};

//! Distributed Bregman-proximal solvers for monotone variational inequalities
//! whose local operators are statistically similar, run on a simulated
//! parameter-server cluster with exact communication accounting.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod check;
pub mod cli;
pub mod bench;
pub mod cluster;
pub mod error;
pub mod geometry;
pub mod inner;
pub mod numeric;
pub mod operators;
pub mod paus;
pub mod restart;

pub use error::{Error, Result};
pub use geometry::{DualVector, GeometrySetup, Point};

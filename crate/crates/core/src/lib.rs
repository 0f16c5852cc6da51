//! Numerical verification of extrinsic geometry for submanifolds of `S^n × ℝ`.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod immersion;
pub mod inequalities;
pub mod operators;
pub mod quadrature;
pub mod report;
pub mod survey;
pub mod taylor;
pub mod variational;

pub use error::{GeomError, Result};

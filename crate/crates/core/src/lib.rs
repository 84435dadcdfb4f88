//! Symbolic and numerical checks for geometric Hamilton-Jacobi theory.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here works on
//! [`Expr`] trees: build Hamiltonians, Lagrangians, one-forms and differential
//! operators symbolically, then verify identities on randomly sampled points
//! of a [`Domain`].

#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod check;
pub mod diffop;
mod error;
pub mod expr;
pub mod integrate;
pub mod joint;
pub mod lagrangian;
pub mod liegroup;
pub mod linalg;
pub mod phase;
pub mod quantum;
pub mod tdhj;

pub use check::{CheckOptions, CheckReport, Domain, Point};
pub use error::{Error, Result};
pub use expr::{Expr, Func};
pub use num_complex::Complex64;

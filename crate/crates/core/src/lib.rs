//! Symmetry-reduced variational solver for normalized solutions of
//! `-Δu = f(u) - μu` in `R^N` with prescribed mass `‖u‖²_{L²} = m`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod flow;
pub mod grid;
pub mod io;
pub mod nonlinearity;
pub mod precond;
pub mod radial;
pub mod survey;
pub mod testmaps;

pub use error::{Error, Result};

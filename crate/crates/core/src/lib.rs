//! Numerical laboratory for Husimi functions and Wehrl entropy.
//!
//! The crate covers N spin-1/2 particles ([`qspin`], [`husimi`]), the
//! rejection-sampling experiments whose recorded directions follow the Husimi
//! function ([`bayes`]), the charged spinning top that plays the classical
//! counterpart ([`classitop`]) and a single continuous-variable mode
//! ([`cvmode`]). Randomness is seeded and chunked so results are identical at
//! any thread count ([`rng`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod bayes;
pub mod classitop;
pub mod cvmode;
pub mod error;
pub mod husimi;
pub mod qspin;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use qspin::{DensityMatrix, DirectionTuple, Ket, UnitVector};

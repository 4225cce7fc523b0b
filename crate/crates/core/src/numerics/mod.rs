//! Dense-matrix layer: matrices, seeded randomness, a reverse-mode tape over
//! the primitives the model needs, and a finite-difference gradient checker.
//!
//! Training and inference run in `f32`; gradient checks run the same code in
//! `f64`. Everything is generic over [`Scalar`].

mod gradcheck;
mod matrix;
mod rng;
mod tape;

pub use gradcheck::{grad_check, GradCheckReport};
pub use matrix::Matrix;
pub use rng::{gumbel_from_uniform, Rng, GUMBEL_EPS};
pub use tape::{Gradients, Tape, Var};

use std::fmt::{Debug, Display};
use std::iter::Sum;

use thiserror::Error;

/// Floating-point element type.
pub trait Scalar:
    num_traits::Float + num_traits::FromPrimitive + Debug + Display + Sum + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("{op}: shape mismatch between {}x{} and {}x{}", lhs.0, lhs.1, rhs.0, rhs.1)]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("data length {len} does not match {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, len: usize },
    #[error("leaky_relu slope {0} outside (0, 1)")]
    InvalidSlope(f64),
    #[error("label {label} out of range for {classes} classes")]
    InvalidLabel { label: usize, classes: usize },
    #[error("non-finite loss while probing tensor {tensor} coordinate {index}")]
    NonFiniteProbe { tensor: usize, index: usize },
    #[error("gradient check: {0}")]
    GradCheck(String),
}

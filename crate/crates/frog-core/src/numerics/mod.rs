//! Dense tensor arithmetic, reverse-mode automatic differentiation, parameter
//! initialization, Adam, and a finite-difference gradient-check oracle.
//!
//! Everything is generic over [`Real`] so the same code runs in 32-bit
//! (training default) and 64-bit (mandatory for gradient checking, where
//! single precision would drown the finite-difference signal in roundoff).

mod adam;
mod gradcheck;
mod init;
mod param;
mod tape;
mod tensor;

pub use adam::Adam;
pub use gradcheck::{grad_check, GradCheckReport, DEFAULT_FD_STEP};
pub use init::{init_params, zeros};
pub use param::{BoundParams, ParamSet, Parameter};
pub use tape::{Grads, Tape, Var};
pub use tensor::{softmax, softmax_in_place, Tensor};

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar the toolkit is generic over. Implemented for `f32`
/// and `f64`; 64-bit is required by the gradient-check and invariant suites.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    const NAME: &'static str;
}

impl Real for f32 {
    const NAME: &'static str = "f32";
}

impl Real for f64 {
    const NAME: &'static str = "f64";
}

/// Lossy conversion from `f64` into the working precision.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from(x).expect("f64 -> Real conversion")
}

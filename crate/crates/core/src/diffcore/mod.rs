//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records primitives as they are evaluated; [`Tape::backward`]
//! replays it in reverse. Parameters live outside the tape and are bound as
//! leaves for each forward pass.

mod gradcheck;
mod optim;
mod tape;
mod tensor;

pub use gradcheck::{analytic_gradient, grad_check, max_relative_error, numeric_gradient};
pub use optim::{OptimKind, OptimState};
pub use tape::{softmax, Gradients, Tape, Var, LOG_FLOOR};
pub use tensor::Tensor;

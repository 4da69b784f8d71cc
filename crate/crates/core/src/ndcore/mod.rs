//! Dense tensors, reverse-mode autodiff, Adam and gradient checking.

mod gradcheck;
mod optim;
mod tape;
mod tensor;


use rand::RngCore;
use thiserror::Error;

pub use gradcheck::{
    finite_diff_check, relative_error, GradCheckReport, DEFAULT_STEP, DEFAULT_TOLERANCE,
    REL_ERROR_FLOOR,
};
pub use optim::{AdamState, LrSchedule, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS};
pub use tape::{Gradients, NeighborLists, Tape, Var};
pub use tensor::{log_softmax_rows, Scalar, Tensor};

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("shape {shape:?} does not match data length {len}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("rows have different lengths")]
    Ragged,
    #[error("{op}: index {index} out of bounds ({bound})")]
    Index {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("cross entropy over zero unmasked rows")]
    AllMasked,
    #[error("backward root must hold one element, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),
    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("non-finite gradient for parameter {index}")]
    NonFinite { index: usize },
    #[error("dropout probability {0} outside [0, 1)")]
    DropoutProbability(f64),
}

/// Train mode samples dropout masks; eval mode is the identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted-dropout mask: each entry is 0 with probability `rho`, otherwise
/// `1 / (1 - rho)`.
pub fn dropout_mask<T: Scalar>(
    shape: &[usize],
    rho: f64,
    rng: &mut impl RngCore,
) -> Result<Tensor<T>, TensorError> {
    if !(0.0..1.0).contains(&rho) {
        return Err(TensorError::DropoutProbability(rho));
    }
    let keep = T::from_f64(1.0 / (1.0 - rho));
    let mut mask = Tensor::zeros(shape);
    for m in mask.data_mut() {
        if crate::rng::unit_f64(rng) >= rho {
            *m = keep;
        }
    }
    Ok(mask)
}

/// Applies inverted dropout to `x` on the tape. Eval mode returns `x` itself.
pub fn dropout<T: Scalar>(
    tape: &mut Tape<'_, T>,
    x: Var,
    rho: f64,
    mode: Mode,
    rng: &mut impl RngCore,
) -> Result<Var, TensorError> {
    if !(0.0..1.0).contains(&rho) {
        return Err(TensorError::DropoutProbability(rho));
    }
    if mode == Mode::Eval || rho == 0.0 {
        return Ok(x);
    }
    let mask = dropout_mask(tape.value(x).shape(), rho, rng)?;
    tape.mask(x, mask)
}

//! From-scratch tensor arithmetic, reverse-mode differentiation and the
//! layer primitives the policy networks are built from.

pub mod error;
pub mod gradcheck;
pub mod init;
pub mod ops;
pub mod tape;
pub mod tensor;

pub use error::{EngineError, Result};
pub use gradcheck::{grad_check, GradCheck};
pub use ops::conv::{conv2d_forward, conv3d_forward};
pub use ops::elementwise::leaky_relu;
pub use ops::norm::{batchnorm_forward, BatchNormState, BatchNormStats, NormMode};
pub use ops::recurrent::{
    gru_step, lstm_step, GateParams, GateVars, GruParams, GruVars, LstmParams, LstmVars,
};
pub use ops::residual::residual_block_forward;
pub use tape::{Tape, Var};
pub use tensor::{Element, Tensor};

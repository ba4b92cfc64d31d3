//! Windowed sequence vectors, structured operators and cocycles.

mod linop;
mod opseq;
mod vector;
mod window;

pub use linop::{LinOp, Mat, OpKind};
pub(crate) use linop::dense_norm;
pub use opseq::OperatorSeq;
pub use vector::{sup_norm, truncation_guard, SeqVec, GUARD_MARGIN, GUARD_MASS};
pub use window::{ext_f64, NormExp, Window};

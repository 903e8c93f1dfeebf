//! Reverse-mode automatic differentiation over a recorded tape.
//!
//! A [`Graph`] records every operation of one forward pass. Parameters are
//! borrowed from their store rather than copied, so a graph lives only as
//! long as the step that built it. [`Graph::backward`] walks the tape in
//! reverse and returns gradients for every leaf that asked for one.
//!
//! Operators are coarse (convolution, batch norm, multi-head attention,
//! losses) with hand-written adjoints; see the gradient suite for their
//! finite-difference checks.

mod attention;
mod basic;
mod conv;
mod graph;
mod loss;
mod norm;

pub(crate) mod kernels;

pub use attention::attention_weights;
pub use conv::{conv_out_len, conv_transpose_out_len};
pub use graph::{Gradients, Graph, ParamRef, Var};
pub use loss::softmax_rows;
pub use norm::{BatchStats, BN_EPS, LN_EPS};

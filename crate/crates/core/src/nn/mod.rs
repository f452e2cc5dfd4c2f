//! Minimal differentiable building blocks in 64-bit floats.

pub mod blocks;
pub mod gradcheck;
pub mod graph;
pub mod optim;
pub mod params;
pub mod tensor;

pub use blocks::{
    FeedForward, FeedForwardKind, Grn, GrnConfig, GrnHidden, Linear, Lstm, LstmCell, MultiHeadAttention, Norm,
    NormType, VariableSelection,
};
pub use gradcheck::{gradcheck, GradCheckReport, SCALE_FLOOR};
pub use graph::{sigmoid, Graph, Var, NORM_EPS};
pub use optim::Optimizer;
pub use params::{Gradients, Init, ParamId, ParamStore, Parameter};
pub use tensor::Tensor;

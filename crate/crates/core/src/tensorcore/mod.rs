//! Dense tensors, reverse-mode differentiation and the Adam optimizer.

mod adam;
pub mod container;
mod gemm;
mod graph;
mod tensor;

pub use adam::{Adam, ParamSet};
pub use gemm::gemm;
pub use graph::{recon_loss_terms, Gradients, Graph, LossTerms, Var, LAYER_NORM_EPS};
pub use tensor::Tensor;

#[cfg(test)]
mod gradcheck;

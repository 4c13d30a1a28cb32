//! Minimal reverse-mode automatic differentiation over 1-D `f64` tensors.
//!
//! The engine is deliberately small: an append-only node arena evaluated
//! eagerly on construction, a reverse topological sweep for gradients, and a
//! parameter store with Adam. Everything is deterministic — fixed summation
//! order, no threading, no hash-order-dependent arithmetic.

pub mod graph;
pub mod params;
pub mod tensor;

pub use graph::{Graph, NodeId};
pub use params::{AdamConfig, Gradients, ParamId, ParamStore};
pub use tensor::{dot_slices, stable_sigmoid, Tensor};

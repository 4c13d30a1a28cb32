//! Core engine for solving letter-string analogies ("abc is to abd as ijk is to ?")
//! with trainable neural logic.
//!
//! The pipeline: compile an analogy into a propositional implication over
//! letter variables, evaluate it with neural AND/OR/NOT modules acting on
//! letter embeddings, train those modules per problem on generated alphabet
//! data plus the problem's own example, then rank candidate answers by the
//! predicted truth of their induced implication.

pub mod autodiff;
pub mod bench;
pub mod data;
pub mod logic;
pub mod loss;
pub mod model;
pub mod train;

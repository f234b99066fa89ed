//! Retrieval-grounded beam search for interactive theorem proving.
//!
//! The pipeline: a [`prover::Prover`] backend executes commands; the
//! [`index`] stores every intermediate goal of known proofs; [`retrieval`]
//! and [`names`] ground each prompt built by [`prompt`]; [`candidates`]
//! cleans model output; [`search`] runs the beam.

pub mod candidates;
pub mod index;
pub mod llm;
pub mod names;
pub mod prompt;
pub mod prover;
pub mod retrieval;
pub mod search;
pub mod term;

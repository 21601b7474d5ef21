//! Loop ensembles on finite graphs, split-and-merge dynamics, U(d) holonomies
//! and the Casimir calculus that links them.

pub mod connection;
pub mod error;
pub mod exec;
pub mod generate;
pub mod harness;
pub mod loops;
pub mod measures;
pub mod splitmerge;
pub mod stats;
pub mod topology;
pub mod unitary;

pub use error::{Error, Result};

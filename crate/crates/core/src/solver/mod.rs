//! P1 finite-element energies and their minimization.

mod functional;
mod optimize;
mod sequence;

pub use functional::{assemble, gradient_field, DiscreteFunctional};
pub use optimize::{minimize, SolveResult, SolverOptions};
pub use sequence::{minimizing_sequence, SequenceReport, SequenceStep};

//! Finite-dimensional quantum information toolkit.
//!
//! States, observables, channels, instruments and bipartite entanglement on
//! dense complex matrices, with a small set of protocol simulations and a
//! batch command-line front end.

pub mod channels;
pub mod cli;
pub mod discrimination;
pub mod entanglement;
pub mod error;
pub mod instruments;
pub mod linalg;
pub mod random;
pub mod observables;
pub mod protocols;
pub mod states;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, OperatorExt, C64};
pub use states::State;

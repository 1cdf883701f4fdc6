//! Wald's sequential probability ratio test viewed as an absorbing ternary
//! state process `U_k ∈ {+1, −1, ε}`.
//!
//! The crate simulates the test ([`sprt`], [`ensemble`]), computes the same
//! state probabilities exactly by density propagation ([`oracle`]), and
//! evaluates information densities, mutual information and the
//! boundary-ratio constant κ on either kind of table ([`info`], [`verify`]).

pub mod ensemble;
pub mod error;
pub mod experiment;
mod gauss;
pub mod info;
pub mod io;
pub mod model;
pub mod oracle;
pub mod sprt;
pub mod table;
pub mod verify;

pub use error::{Error, Result};
pub use model::{Hypothesis, NoiseModel, TestConfig};
pub use sprt::{Decision, SprtState, TernaryState};
pub use table::{EnsembleTable, TableSource};

pub mod acceptance;
pub mod continuum;
pub mod energetics;
pub mod error;
pub mod formulations;
pub mod grid;
pub mod harness;
pub mod ode;
pub mod pentadiag;
pub mod step_chain;

pub use error::{Error, Result};

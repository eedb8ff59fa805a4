use alloc::boxed::Box;
use alloc::string::String;

use crate::models::PhaseState;
use crate::C64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite input")]
    NonFinite,
    #[error("modulus {0} is not in the upper half plane")]
    Modulus(C64),
    #[error("theta series not converged after {0} terms")]
    Truncation(usize),
    #[error("argument within the pole guard of lattice point {nearest}")]
    Pole { nearest: C64 },
    #[error("identity `{0}` has no constant term")]
    NoConstant(&'static str),
    #[error("unsupported root system: {0}")]
    RootSystem(String),
    #[error("invalid model or state: {0}")]
    Model(String),
    #[error("collision at path parameter {s}")]
    Collision { s: f64, last: Box<PhaseState> },
    #[error("step size underflow at path parameter {s}")]
    StepUnderflow { s: f64 },
    #[error("invalid path: {0}")]
    Path(String),
    #[error("path passes within {distance} of singular point {point}")]
    Singular { point: C64, distance: f64 },
}

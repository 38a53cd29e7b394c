//! Secrecy-capacity and entanglement-generation toolkit for compound
//! wiretap channels at desk scale.

pub mod capacity;
pub mod caps;
pub mod channels;
pub mod entgen;
pub mod error;
pub mod infotheory;
pub mod qcore;
pub mod rng;
pub mod schema;
pub mod typicality;
pub mod verify;
pub mod wiretapsim;

pub use error::{QwkError, Result};
pub use qcore::{CMat, CVec, DensityOperator, HilbertLabel, PureState, C64};

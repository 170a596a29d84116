//! Constructive hypercyclicity for two-generator matrix semigroups.
#![no_std]

extern crate alloc;

pub mod error;
pub mod ext;
pub mod contfrac;
pub mod exact;
pub mod field;
pub mod scalar;
pub mod search;
pub mod matrix;
pub mod systems;
pub mod steering;
pub mod verify;

pub use error::{Error, ParseError, Result};
pub use ext::{ExtReal, Precision};
pub use field::{Field, FieldElement, Scalar};

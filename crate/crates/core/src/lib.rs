//! Hybrid qubit-bus gate simulation, stabilizer graph states and
//! cluster-state growth statistics.
#![no_std]
extern crate alloc;

pub mod analytics;
pub mod busim;
pub mod error;
pub mod gates;
pub mod graphstab;
pub mod growth;
mod math;
pub mod register;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

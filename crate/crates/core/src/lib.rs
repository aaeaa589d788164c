//! Variational quantum generators trained adversarially against classical
//! or quantum discriminators.
//!
//! The crate is layered bottom-up: [`simulator`] evolves dense statevectors,
//! [`circuits`] describes parameterized circuits and the encoder/ansatz
//! families, [`gradients`] differentiates expectation values with the
//! parameter-shift rule, [`autodiff`] chains those derivatives through
//! classical computations, [`models`] holds the generator and discriminators,
//! and [`training`] runs the adversarial loop.

pub mod autodiff;
pub mod circuits;
pub mod error;
pub mod gradients;
pub mod models;
pub mod seed;
pub mod simulator;
pub mod training;

pub use error::{Error, Result};

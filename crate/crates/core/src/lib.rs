//! Quantum reservoir computing for univariate time-series forecasting.
//!
//! A fully connected transverse-field Ising register is driven by the input
//! series through its first qubit; the Pauli-Z expectations of every qubit
//! form the reservoir features, and a linear readout trained by
//! pseudoinverse maps them to the next value of the series. An echo-state
//! network baseline and a small experiment harness sit alongside.

pub mod data;
pub mod error;
pub mod esn;
pub mod evolve;
pub mod experiment;
pub mod ising;
pub mod quantum;
pub mod readout;
pub mod reservoir;
pub mod seed;

pub use error::{Error, Result};

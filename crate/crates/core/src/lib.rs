//! Fault-tolerant preparation of Q1 quantum polar code states.
//!
//! Monte-Carlo Pauli-frame simulation of the measurement-based preparation
//! circuit and its factory scheduler, closed-form estimates of preparation
//! rate and residual error, and density-evolution estimates of the logical
//! error rate under Steane error correction.

pub mod analytic;
pub mod driver;
pub mod error;
pub mod factory;
pub mod logical_rate;
pub mod noise_model;
pub mod polar_core;
pub mod prep_sim;

pub use error::{Error, Result};

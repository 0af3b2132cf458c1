//! Hybrid classical-quantum graph classification on a software statevector
//! simulator.
//!
//! The crate provides the full stack: exact statevector simulation with a
//! dense-unitary verification oracle, a parameterized gate library with
//! parameter-shift metadata, Monte Carlo noise channels, TU-format graph
//! ingestion, a small dense-NN kernel with reverse-mode gradients, the
//! pooled quantum graph convolution model family, and an experiment runner.

pub mod data;
pub mod error;
pub mod experiment;
pub mod gates;
pub mod grad;
pub mod model;
pub mod nn;
pub mod noise;
pub mod seeding;
pub mod statevector;

pub use error::{Error, Result};

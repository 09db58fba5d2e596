//! Binaural signal matching toolkit.
//!
//! Simulates rigid-sphere microphone-array recordings in shoebox rooms,
//! designs LS / MagLS binaural rendering filters with head-rotation
//! compensation, extracts auditory binaural cues (ILD, IPD, IVS) and
//! computes the signal-level and binaural loss suite used to score
//! corrected binaural renderings. The [`dataset`] module ties everything
//! together into reproducible input/target training pairs.

pub mod acoustics;
pub mod auditory;
pub mod bsm;
pub mod config;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod hrtf;
pub mod metrics;
pub mod registry;
pub mod signal;

pub use error::{Error, Result};
pub use num_complex::Complex64;

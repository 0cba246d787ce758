//! Modeling toolkit for quasi-phasematched sum-frequency upconversion in
//! ion-exchanged KTP channel waveguides: material dispersion, guided-mode
//! solving, phasematching and tuning curves, overlap/coupling accounting,
//! and loss-aware three-wave propagation dynamics.

pub mod cli;
pub mod config;
pub mod coupling;
pub mod device;
pub mod dynamics;
pub mod qpm;
pub mod report;
pub mod error;
pub mod grid;
pub mod material;

mod eigen;
pub mod modes;

pub use error::{Error, Result};

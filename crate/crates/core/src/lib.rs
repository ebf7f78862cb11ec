//! Proximity between datasets represented as embedding point clouds.
//!
//! The central measure is the signed distance (SD) between a source and a
//! target cloud under a polyharmonic kernel, swept over growing hypercubes
//! around the target ([`sd::sid_sweep`]) and summed into a cumulative score
//! ([`sd::csid`]). Baselines (FID, KID, sharpness, min-sinΘ), a friendly
//! neighbour ranking engine and seeded Gaussian scenarios sit alongside.

pub mod baseline;
pub mod cli;
pub mod cloud;
pub mod error;
pub mod kernel;
pub mod ranking;
pub mod report;
pub mod sd;
pub mod stats;
pub mod subspace;
pub mod synth;

pub use error::{Error, Result};

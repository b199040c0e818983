//! Command-line front end for simulating and reconstructing photon-number
//! statistics from on/off detection under tunable thermal noise.

pub mod commands;
pub mod config;
pub mod experiments;

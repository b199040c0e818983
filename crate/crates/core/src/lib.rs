//! Photon-number statistics behind an on/off detector with a tunable thermal
//! noise admixture: measurement kernels, synthetic click data, calibration,
//! and maximum-likelihood reconstruction of the signal distribution.

pub mod calibrate;
pub mod detector;
pub mod error;
pub mod io;
pub mod povm;
pub mod reconstruct;
pub mod sim;
pub mod state;

pub use calibrate::{calibrate_nbar, calibrate_settings};
pub use detector::{
    no_click_probability, thermal_no_click_probability, DetectorSetting, MeasurementRecord,
};
pub use error::{Error, Result};
pub use povm::{
    efficiency_kernel, empirical_averaged_kernel, gaussian_averaged_kernel, thermal_kernel,
    NoiseDistribution, PovmElement,
};
pub use reconstruct::{
    em_step, error_bound, log_likelihood, predicted_error_bound, reconstruct, InitialState,
    ReconstructionConfig, ReconstructionReport,
};
pub use sim::{
    bin_shot_log, simulate_fixed, simulate_gaussian_noise, simulate_random_walk, RandomWalkSpec,
    ShotLog, ShotRecord,
};
pub use state::{fidelity, PhotonDistribution};

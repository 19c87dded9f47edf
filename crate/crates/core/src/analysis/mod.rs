//! Roofline classification, the workload-mix model, sweeps and calibration.

pub mod calibrate;
pub mod mix;
pub mod roofline;
pub mod sweep;

//! Event-driven simulator for a host, a PCIe-attached systolic-array
//! accelerator and the memory system between them.

pub mod accel;
pub mod analysis;
pub mod config;
pub mod error;
pub mod figures;
pub mod memsys;
pub mod pcie;
pub mod sim;
pub mod smmu;
pub mod system;
pub mod workload;

pub use error::{Error, Result};
pub use sim::SimTime;

//! Network topology and generators of networked dynamics traces.

pub mod busdata;
pub mod linear;
pub mod measurement;
pub mod perturbation;
pub mod swing;
pub mod topology;
pub mod trace;

pub use busdata::BusData;
pub use linear::{simulate_linear, LinearDynamicsParams};
pub use measurement::{noise_rows, sample_measurements};
pub use perturbation::{GaussianSpec, Injection, PerturbationProcess, PoissonSpec};
pub use swing::{simulate_swing, GeneratorParams, LoadParams, SwingInitial, SwingParams, SwingSimulator};
pub use topology::NetworkTopology;
pub use trace::DynamicsTrace;

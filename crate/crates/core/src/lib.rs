//! Periodic Cahn-Hilliard solver: Fourier pseudo-spectral space, variable-step
//! BDF2 time stepping with a generalized scalar auxiliary variable, and a
//! toolkit for the discrete orthogonal/complementary convolution kernels of
//! the BDF2 difference operator.

pub mod adaptive;
pub mod bdf;
pub mod cli;
pub mod experiments;
pub mod io;
pub mod monitor;
pub mod spectral;
pub mod stepper;

pub use adaptive::{run_with_policy, AdaptiveParams, ControlError, StepPolicy};
pub use bdf::{r_max_root, random_mesh, BdfCoeffs, BdfError, TimeMesh};
pub use experiments::{run_convergence, run_scenario, ConvergenceSetup, Scenario, ScenarioName};
pub use spectral::{Grid, SpectralError, SpectralField};
pub use stepper::{energy, GsavState, StepError, StepRecord, StepperOptions};

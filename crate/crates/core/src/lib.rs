//! Core algorithms for periodic 3-D incompressible flow on the unit torus:
//! spectral field calculus, the linearized-vorticity solver and its Picard
//! iteration toward Navier-Stokes solutions, Monte Carlo estimators for
//! drift-diffusion heat kernels and vorticity transport, and a verification
//! lab for Gaussian envelope inequalities.
//!
//! All computation is dimensionless: unit period, viscosity 1/2. Physical
//! problems enter through the scaling map in [`iterate`].

pub mod bounds;
pub mod drift;
pub mod error;
pub mod fft;
pub mod field;
pub mod flows;
pub mod gaussian;
pub mod grid;
pub mod io;
pub mod iterate;
pub mod solver;
pub mod spectral;
pub mod stats;
pub mod stochastic;

pub use error::{Error, Result};
pub use fft::{from_spectral, to_spectral, SpectralField};
pub use field::{PeriodicVectorField, TensorField};
pub use gaussian::GaussianKernelParams;
pub use grid::GridSpec;

//! Recovery of periodic Dirac streams from irregular time samples by Cadzow
//! plug-and-play gradient descent (CPGD), with the GenFRI and
//! least-squares + Cadzow baselines and a benchmark harness.

pub mod assignment;
pub mod bench;
pub mod cli;
pub mod denoise;
pub mod error;
pub mod fri;
pub mod genfri;
pub mod io;
pub mod linalg;
pub mod lowrank;
pub mod solvers;
pub mod toeplitz;

pub use error::{Error, Result};
pub use linalg::C64;
pub use solvers::{cpgd, ls_cadzow, ForwardModel, Method, Radius, RecoveryTrace, SolverConfig, StoppingRule};
pub use toeplitz::FourierVector;

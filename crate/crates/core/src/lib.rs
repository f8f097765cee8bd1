//! Parallel diffusion of charged particles in a focusing magnetic field:
//! transport coefficients from nested pitch-angle integrals, exact
//! rewriting of the diffusion equation, and a Monte Carlo simulator.

pub mod cli;
pub mod coefficients;
pub mod eidf;
pub mod error;
pub mod mc;
pub mod models;
pub mod moments;

pub use error::{Error, Result};

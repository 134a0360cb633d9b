//! Spectral laboratory for 2D periodic incompressible flow: solvers for the
//! momentum equation, rigorous-bound calculators, high-mode slaving maps and
//! trajectory-space dynamics, plus a nudging-based data assimilation variant.

pub mod bounds;
pub mod cli;
pub mod config;
pub mod detform;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod nudging;
pub mod slaving;
pub mod spectral;
pub mod trajectory;

pub use error::{Error, Result};

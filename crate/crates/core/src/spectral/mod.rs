//! Fourier-space representation of 2D periodic divergence-free fields and
//! the pseudospectral operators acting on them.

pub mod fft;
pub mod field;
pub mod ops;

pub use field::{leray_project, GridSpec, ModeCut, SpectralField};
pub use ops::{bilinear, bilinear_self, kolmogorov_force, random_divfree_field};

//! Spectral and scattering theory of the half-line Dirac operator
//! `H = −iσ₂ d/dx + mσ₃ + V` with Dirichlet condition `f₁(0) = 0` and a compactly
//! supported real symmetric potential `V`.
//!
//! The central objects are the Jost function `f₁(0, λ)`, the entire function
//! `F(λ) = (λ − m) f₁⁺(0, λ) f₁⁻(0, λ)` whose zeros are the eigenvalues,
//! antibound states and resonances, the scattering phase and the modified
//! Fredholm determinant `det[(I + VR₀)e^{−VR₀}]`.

pub mod error;
pub mod fixtures;
pub mod fredholm;
pub mod io;
pub mod jost;
pub mod ode;
pub mod oracle;
pub mod plane;
pub mod poly;
pub mod potential;
pub mod quad;
pub mod scattering;
pub mod states;
pub mod verify;

pub use error::{Error, Result};
pub use plane::{Rect, Sheet, SpectralPoint, C64};
pub use potential::{derived_scalars, gauge_transform, make_potential, DerivedScalars, Potential, PotentialSpec};

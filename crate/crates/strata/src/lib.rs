//! Numerics on the moduli space of unit-area flat tori with two marked points,
//! realised as the quotient `SAff₂(ℤ)\SAff₂(ℝ)`.
//!
//! The crate is organised bottom-up: group arithmetic and sampling
//! ([`saff_group`]), exact enveloping-algebra computations ([`enveloping`]),
//! special functions ([`special_fn`]), Fourier analysis along the Heisenberg and
//! torus directions ([`heisenberg_fourier`]), automorphic series ([`series`]),
//! Siegel–Veech transforms ([`siegel_veech`]), invariant differential operators
//! ([`operators`]) and a per-mode spectral solver ([`spectral`]).

pub mod cli;
pub mod enveloping;
pub mod error;
pub mod heisenberg_fourier;
pub mod operators;
pub mod quad;
pub mod saff_group;
pub mod series;
pub mod siegel_veech;
pub mod special_fn;
pub mod spectral;

pub use error::{Result, StrataError};
pub use num_complex::Complex64 as C64;

/// `e(x) = exp(2πix)`.
#[inline]
pub fn e(x: f64) -> C64 {
    let t = std::f64::consts::TAU * x;
    C64::new(t.cos(), t.sin())
}

//! Pseudo-spectral laboratory for the third-order Benjamin-Ono equation
//!
//! ```text
//! phi_t - phi_xxx + 3/4 phi^2 phi_x + 3/4 [phi H phi_x + H(phi phi_x)]_x = 0
//! ```
//!
//! posed on a periodic interval standing in for the real line. The crate
//! provides the spectral operators (Hilbert transform, Littlewood-Paley
//! projections, Sobolev and Besov norms), exact Airy propagators, an
//! integrating-factor RK4 stepper, the conserved and almost-conserved
//! functionals, the normal form and gauge transformations, and the
//! dispersive-decay diagnostics. The [`expcli`] module ties these together
//! into reproducible experiments driven by JSON configuration files.

// guards are written `!(x > 0.0)` so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dispersion;
pub mod expcli;
pub mod flows;
pub mod invariants;
pub mod normalform;
pub mod spectral;
pub mod stepper;

pub use spectral::{
    ComplexField, DyadicBand, Field, FrequencyEnvelope, Half, RealField, SpectralError,
    SpectralGrid,
};

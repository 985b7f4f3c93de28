//! Periodic pseudo-spectral core.
//!
//! Everything downstream acts on [`Field`]s sampled on a [`SpectralGrid`]:
//! Fourier multipliers, the Hilbert transform, derivatives, Littlewood-Paley
//! projections, Sobolev/Besov norms and frequency envelopes. Products of
//! fields go through [`product`], which zero-pads to twice the resolution so
//! that up to cubic products are free of aliasing.

mod field;
mod grid;
pub mod lp;
mod norms;
mod ops;
pub mod product;
pub mod snapshot;

pub use field::{ComplexField, Field, RealField, Scalar};
pub use grid::SpectralGrid;
pub use lp::{
    band_norms, besov_norm, envelope, project, project_at_or_above, project_band, project_below,
    project_range, resolved_bands, DyadicBand, FrequencyEnvelope, Half,
};
pub use norms::sobolev_norm;
pub use ops::{
    abs_d_power, antiderivative, antiderivative_dropping_mean, apply_symbol, derivative, filter,
    hilbert,
};

use thiserror::Error;

/// Relative zero-mode tolerance: a field's mean counts as zero when it is
/// below this multiple of its L² norm.
pub const TAU_MEAN: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("point count {0} must be a power of two and at least 8")]
    BadPointCount(usize),
    #[error("domain length {0} must be finite and positive")]
    BadLength(f64),
    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("symbol is not finite at wavenumber {xi}")]
    NonFiniteSymbol { xi: f64 },
    #[error("derivative order {0} outside [1, 4]")]
    BadOrder(u32),
    #[error("field mean {mean:e} exceeds zero-mode tolerance {tolerance:e}")]
    NonzeroMean { mean: f64, tolerance: f64 },
    #[error("band {k} is beyond grid resolution (max wavenumber {max_wavenumber})")]
    Unresolved { k: u32, max_wavenumber: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("envelope exponent {0} outside (0, 1/2]")]
    BadDelta(f64),
    #[error("products take between 1 and {max} factors, got {got}")]
    FactorCount { max: usize, got: usize },
    #[error("snapshot: {0}")]
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, SpectralError>;

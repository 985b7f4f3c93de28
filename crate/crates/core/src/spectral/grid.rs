use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Result, SpectralError};

/// Uniform periodic sampling of `[-L/2, L/2)`.
///
/// Wavenumbers are stored in FFT order: index `m < n/2` carries `2πm/L`,
/// index `m >= n/2` carries `2π(m-n)/L`, so the Nyquist mode sits at
/// `-πn/L`.
pub struct SpectralGrid {
    n: usize,
    length: f64,
    spacing: f64,
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    forward_padded: Arc<dyn Fft<f64>>,
    inverse_padded: Arc<dyn Fft<f64>>,
}

impl SpectralGrid {
    pub fn new(n: usize, length: f64) -> Result<Arc<Self>> {
        if n < 8 || !n.is_power_of_two() {
            return Err(SpectralError::BadPointCount(n));
        }
        if !length.is_finite() || length <= 0.0 {
            return Err(SpectralError::BadLength(length));
        }
        let dk = 2.0 * PI / length;
        let wavenumbers = (0..n)
            .map(|m| {
                let mode = if m < n / 2 { m as i64 } else { m as i64 - n as i64 };
                mode as f64 * dk
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Arc::new(SpectralGrid {
            n,
            length,
            spacing: length / n as f64,
            wavenumbers,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            forward_padded: planner.plan_fft_forward(2 * n),
            inverse_padded: planner.plan_fft_inverse(2 * n),
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Magnitude of the Nyquist wavenumber, `πn/L`.
    pub fn max_wavenumber(&self) -> f64 {
        PI * self.n as f64 / self.length
    }

    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    /// Signed integer mode of FFT index `m`.
    pub fn mode(&self, m: usize) -> i64 {
        if m < self.n / 2 {
            m as i64
        } else {
            m as i64 - self.n as i64
        }
    }

    /// Centered sample coordinate `x_j = -L/2 + j L/n`.
    pub fn x(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.spacing
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Unnormalized forward DFT, `c_m = Σ_j f_j e^{-2πi jm/n}`.
    pub(crate) fn fft(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Unnormalized inverse DFT.
    pub(crate) fn ifft(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }

    pub(crate) fn fft_padded(&self, buf: &mut [Complex64]) {
        self.forward_padded.process(buf);
    }

    pub(crate) fn ifft_padded(&self, buf: &mut [Complex64]) {
        self.inverse_padded.process(buf);
    }

    /// Two grids are interchangeable when they sample the same interval
    /// with the same point count.
    pub fn same_as(&self, other: &SpectralGrid) -> bool {
        self.n == other.n && self.length == other.length
    }
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

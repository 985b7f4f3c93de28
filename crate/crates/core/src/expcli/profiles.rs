//! Named initial data. Each profile is centered at `center` with width
//! `width`, scaled by `amplitude`:
//!
//! | name | formula |
//! |---|---|
//! | `gaussian_bump` | `ε exp(-(x-c)²/(2w²))` |
//! | `gaussian_dipole` | `ε (x-c)/w · exp(1/2 - (x-c)²/(2w²))` (peak value ε, mean zero) |
//! | `sech_bump` | `ε sech((x-c)/w)` |
//! | `two_mode` | `ε [cos(ξ₁(x-c)) + cos(ξ₂(x-c))]/2`, `ξ₁ = Ξ/2`, `ξ₂ = Ξ` snapped to grid modes |
//! | `random_bandlimited` | random Fourier coefficients on modes `0 < |ξ| ≤ Ξ`, sup norm ε |
//!
//! Bump profiles have nonzero mean and are only valid for the linear flow.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::spectral::{RealField, SpectralGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    GaussianBump,
    GaussianDipole,
    SechBump,
    TwoMode,
    RandomBandlimited,
}

impl ProfileName {
    pub fn has_zero_mean(self) -> bool {
        !matches!(self, ProfileName::GaussianBump | ProfileName::SechBump)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub name: ProfileName,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default = "one")]
    pub width: f64,
    /// Largest wavenumber for the spectral profiles.
    #[serde(default = "four")]
    pub bandlimit: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

fn four() -> f64 {
    4.0
}

impl Profile {
    pub fn new(name: ProfileName, amplitude: f64) -> Self {
        Profile {
            name,
            amplitude,
            center: 0.0,
            width: 1.0,
            bandlimit: 4.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.amplitude.is_finite() {
            return Err("profile amplitude must be finite".into());
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err("profile width must be positive".into());
        }
        if !(self.bandlimit > 0.0 && self.bandlimit.is_finite()) {
            return Err("profile bandlimit must be positive".into());
        }
        Ok(())
    }

    /// Samples the profile on `grid`.
    pub fn build(&self, grid: &Arc<SpectralGrid>) -> RealField {
        let (e, c, w) = (self.amplitude, self.center, self.width);
        match self.name {
            ProfileName::GaussianBump => {
                RealField::from_fn(grid, |x| e * (-(x - c).powi(2) / (2.0 * w * w)).exp())
            }
            ProfileName::GaussianDipole => RealField::from_fn(grid, |x| {
                let z = (x - c) / w;
                e * z * (0.5 - 0.5 * z * z).exp()
            }),
            ProfileName::SechBump => RealField::from_fn(grid, |x| e / ((x - c) / w).cosh()),
            ProfileName::TwoMode => {
                let dk = 2.0 * std::f64::consts::PI / grid.length();
                let snap = |xi: f64| ((xi / dk).round().max(1.0)) * dk;
                let (k1, k2) = (snap(0.5 * self.bandlimit), snap(self.bandlimit));
                RealField::from_fn(grid, |x| {
                    0.5 * e * ((k1 * (x - c)).cos() + (k2 * (x - c)).cos())
                })
            }
            ProfileName::RandomBandlimited => random_bandlimited(grid, self.seed, self.bandlimit, e),
        }
    }
}

/// Mean-zero real field with independent uniform complex coefficients
/// on the modes `0 < |ξ| ≤ bandlimit`, rescaled to sup norm `amplitude`.
pub fn random_bandlimited(
    grid: &Arc<SpectralGrid>,
    seed: u64,
    bandlimit: f64,
    amplitude: f64,
) -> RealField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n();
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    let xi = grid.wavenumbers();
    for m in 1..n / 2 {
        if xi[m] > bandlimit {
            break;
        }
        let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        spec[m] = c;
        spec[n - m] = c.conj();
    }
    let f = RealField::from_spectrum(grid, spec);
    let sup = f.sup_norm();
    if sup == 0.0 {
        f
    } else {
        f.scale(amplitude / sup)
    }
}

//! Littlewood-Paley projections built from one fixed smooth bump.
//!
//! The bump `ψ` equals 1 on `[-1, 1]`, vanishes outside `[-2, 2]` and is
//! joined in between by the C^∞ step `s(u) = e^{-1/u} / (e^{-1/u} + e^{-1/(1-u)})`:
//! `ψ(ξ) = 1 - s(|ξ| - 1)`. Then `P_0 = ψ(ξ)`, `P_k = ψ(ξ/2^k) - ψ(ξ/2^{k-1})`
//! and `P_{<k} = ψ(ξ/2^{k-1})`, so `Σ_{j≤K} P_j = ψ(ξ/2^K)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{filter, ComplexField, Field, Result, Scalar, SpectralError, SpectralGrid};

/// C^∞ transition from 0 at `u <= 0` to 1 at `u >= 1`.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        a / (a + b)
    }
}

/// The bump `ψ`: 1 on `[-1, 1]`, 0 outside `[-2, 2]`.
pub fn bump(z: f64) -> f64 {
    1.0 - smooth_step(z.abs() - 1.0)
}

fn dyadic(k: u32) -> f64 {
    2f64.powi(k as i32)
}

/// Weight of band `k` (both halves) at `ξ`.
pub fn band_weight(k: u32, xi: f64) -> f64 {
    if k == 0 {
        bump(xi)
    } else {
        bump(xi / dyadic(k)) - bump(xi / dyadic(k - 1))
    }
}

/// Weight of `P_{<k}` at `ξ`; `P_{<0}` is zero.
pub fn below_weight(k: u32, xi: f64) -> f64 {
    if k == 0 {
        0.0
    } else {
        bump(xi / dyadic(k - 1))
    }
}

/// Weight of `P_{(k1,k2)} = Σ_{k1<j<k2} P_j`.
pub fn range_weight(k1: u32, k2: u32, xi: f64) -> f64 {
    if k2 <= k1 + 1 {
        0.0
    } else {
        bump(xi / dyadic(k2 - 1)) - bump(xi / dyadic(k1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Half {
    Both,
    /// `ξ >= 0`
    Plus,
    /// `ξ < 0`
    Minus,
}

impl Half {
    pub fn weight(self, xi: f64) -> f64 {
        match self {
            Half::Both => 1.0,
            Half::Plus => (xi >= 0.0) as u8 as f64,
            Half::Minus => (xi < 0.0) as u8 as f64,
        }
    }
}

/// Dyadic frequency block `|ξ| ≈ 2^k`, optionally restricted to one sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicBand {
    pub k: u32,
    pub half: Half,
}

impl DyadicBand {
    pub fn new(k: u32, half: Half) -> Self {
        DyadicBand { k, half }
    }

    pub fn both(k: u32) -> Self {
        DyadicBand::new(k, Half::Both)
    }

    pub fn plus(k: u32) -> Self {
        DyadicBand::new(k, Half::Plus)
    }

    pub fn weight(&self, xi: f64) -> f64 {
        band_weight(self.k, xi) * self.half.weight(xi)
    }
}

/// Fails unless `2^k` does not exceed the grid's largest wavenumber.
pub fn check_resolved(grid: &SpectralGrid, k: u32) -> Result<()> {
    let max_wavenumber = grid.max_wavenumber();
    if k < 63 && dyadic(k) <= max_wavenumber {
        Ok(())
    } else {
        Err(SpectralError::Unresolved { k, max_wavenumber })
    }
}

/// Bands `0..=K` with `2^K` the largest dyadic frequency on the grid.
pub fn resolved_bands(grid: &SpectralGrid) -> std::ops::RangeInclusive<u32> {
    let top = grid.max_wavenumber().log2().floor().max(0.0) as u32;
    0..=top
}

fn real_symbol(w: f64) -> Complex64 {
    Complex64::new(w, 0.0)
}

/// `P_k f` with both halves kept; preserves the sample type.
pub fn project<T: Scalar>(f: &Field<T>, k: u32) -> Result<Field<T>> {
    check_resolved(f.grid(), k)?;
    filter(f, |xi| real_symbol(band_weight(k, xi)))
}

/// `P_k^± f` (or `P_k f` for [`Half::Both`]) as a complex field.
pub fn project_band<T: Scalar>(f: &Field<T>, band: DyadicBand) -> Result<ComplexField> {
    check_resolved(f.grid(), band.k)?;
    filter(&f.to_complex(), |xi| real_symbol(band.weight(xi)))
}

/// `P_{<k} f`.
pub fn project_below<T: Scalar>(f: &Field<T>, k: u32) -> Result<Field<T>> {
    check_resolved(f.grid(), k.saturating_sub(1))?;
    filter(f, |xi| real_symbol(below_weight(k, xi)))
}

/// `P_{>=k} f = f - P_{<k} f`.
pub fn project_at_or_above<T: Scalar>(f: &Field<T>, k: u32) -> Result<Field<T>> {
    check_resolved(f.grid(), k.saturating_sub(1))?;
    filter(f, |xi| real_symbol(1.0 - below_weight(k, xi)))
}

/// `P_{(k1,k2)} f`, the bands strictly between `k1` and `k2`.
pub fn project_range<T: Scalar>(f: &Field<T>, k1: u32, k2: u32) -> Result<Field<T>> {
    check_resolved(f.grid(), k2.saturating_sub(1))?;
    filter(f, |xi| real_symbol(range_weight(k1, k2, xi)))
}

/// `‖P_k f‖_{L²}` for every resolved band, by Plancherel.
pub fn band_norms<T: Scalar>(f: &Field<T>) -> Vec<f64> {
    let grid = f.grid();
    let n = grid.n() as f64;
    let norm = grid.length() / (n * n);
    let xi = grid.wavenumbers();
    let spec = f.spectrum();
    resolved_bands(grid)
        .map(|k| {
            let s: f64 = spec
                .iter()
                .zip(xi)
                .map(|(c, &x)| {
                    let w = band_weight(k, x);
                    w * w * c.norm_sqr()
                })
                .sum();
            (norm * s).sqrt()
        })
        .collect()
}

/// `sup_k 2^{sk} ‖P_k f‖_{L²}` over the resolved bands.
pub fn besov_norm<T: Scalar>(f: &Field<T>, s: f64) -> f64 {
    band_norms(f)
        .iter()
        .enumerate()
        .map(|(k, b)| 2f64.powf(s * k as f64) * b)
        .fold(0.0, f64::max)
}

/// Slowly varying majorant of the dyadic norms of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEnvelope {
    pub delta: f64,
    pub c: Vec<f64>,
}

impl FrequencyEnvelope {
    /// `c_j <= 2^{δ|j-k|} c_k` for all pairs, up to relative slack `tol`.
    pub fn is_slowly_varying(&self, tol: f64) -> bool {
        self.c.iter().enumerate().all(|(j, &cj)| {
            self.c.iter().enumerate().all(|(k, &ck)| {
                let d = (j as f64 - k as f64).abs();
                cj <= 2f64.powf(self.delta * d) * ck * (1.0 + tol) + f64::MIN_POSITIVE
            })
        })
    }

    pub fn majorizes(&self, norms: &[f64]) -> bool {
        norms.len() <= self.c.len() && norms.iter().zip(&self.c).all(|(b, c)| b <= c)
    }
}

/// Minimal slowly varying envelope `c_k = sup_j 2^{-δ|j-k|} ‖P_j f‖`.
pub fn envelope<T: Scalar>(f: &Field<T>, delta: f64) -> Result<FrequencyEnvelope> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(SpectralError::BadDelta(delta));
    }
    let norms = band_norms(f);
    let c = (0..norms.len())
        .map(|k| {
            norms
                .iter()
                .enumerate()
                .map(|(j, b)| 2f64.powf(-delta * (j as f64 - k as f64).abs()) * b)
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(FrequencyEnvelope { delta, c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::RealField;
    use std::f64::consts::PI;

    #[test]
    fn bump_shape() {
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(1.0), 1.0);
        assert_eq!(bump(-1.0), 1.0);
        assert_eq!(bump(2.0), 0.0);
        assert_eq!(bump(3.0), 0.0);
        assert!((bump(1.5) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = bump(1.0 + i as f64 / 100.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn separates_disjoint_bands() {
        let g = SpectralGrid::new(64, 2.0 * PI).unwrap();
        let f = RealField::from_fn(&g, |x| x.sin() + (16.0 * x).sin());
        let p4 = project(&f, 4).unwrap();
        let expected = RealField::from_fn(&g, |x| (16.0 * x).sin());
        assert!(p4.max_abs_diff(&expected) < 1e-13);
    }

    #[test]
    fn positive_half_of_sine() {
        let g = SpectralGrid::new(64, 2.0 * PI).unwrap();
        let f = RealField::from_fn(&g, f64::sin);
        let p = project_band(&f, DyadicBand::plus(0)).unwrap();
        let expected =
            ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, x) / Complex64::new(0.0, 2.0));
        assert!(p.max_abs_diff(&expected) < 1e-13);
    }

    #[test]
    fn complementary_projections() {
        let g = SpectralGrid::new(128, 2.0 * PI).unwrap();
        let f = RealField::from_fn(&g, |x| (x.sin() * 2.0).exp() - 1.0);
        for k in 0..5 {
            let lo = project_below(&f, k).unwrap();
            let hi = project_at_or_above(&f, k).unwrap();
            assert!((&lo + &hi).max_abs_diff(&f) < 1e-12);
        }
    }

    #[test]
    fn open_range_excludes_zero_mode() {
        let g = SpectralGrid::new(64, 2.0 * PI).unwrap();
        let c = RealField::from_fn(&g, |_| 1.5);
        assert!(project_range(&c, 0, 4).unwrap().sup_norm() < 1e-15);
        // cos x lies entirely in P_0, so nothing is left in (0, k)
        let cos = RealField::from_fn(&g, f64::cos);
        assert!(project_range(&cos, 0, 5).unwrap().sup_norm() < 1e-15);
    }

    #[test]
    fn unresolved_band_is_rejected() {
        let g = SpectralGrid::new(16, 2.0 * PI).unwrap();
        let f = RealField::from_fn(&g, f64::sin);
        assert!(project(&f, 3).is_ok());
        assert!(matches!(
            project(&f, 4),
            Err(SpectralError::Unresolved { k: 4, .. })
        ));
        assert_eq!(resolved_bands(&g), 0..=3);
    }

    #[test]
    fn besov_of_zero_and_single_band() {
        let g = SpectralGrid::new(64, 2.0 * PI).unwrap();
        assert_eq!(besov_norm(&RealField::zeros(&g), 0.5), 0.0);
        let f = RealField::from_fn(&g, |x| (8.0 * x).sin() / PI.sqrt());
        assert!((besov_norm(&f, 0.5) - 2f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn envelope_examples() {
        let g = SpectralGrid::new(64, 2.0 * PI).unwrap();
        let zero = envelope(&RealField::zeros(&g), 0.25).unwrap();
        assert!(zero.c.iter().all(|&c| c == 0.0));
        let f = RealField::from_fn(&g, |x| (4.0 * x).cos() / PI.sqrt());
        let env = envelope(&f, 0.25).unwrap();
        for (k, c) in env.c.iter().enumerate() {
            let expected = 2f64.powf(-0.25 * (k as f64 - 2.0).abs());
            assert!((c - expected).abs() < 1e-12, "k={k} c={c}");
        }
        assert!(env.is_slowly_varying(1e-12));
        assert!(env.majorizes(&band_norms(&f)));
        assert_eq!(envelope(&f, 0.0).unwrap_err(), SpectralError::BadDelta(0.0));
        assert!(envelope(&f, 0.6).is_err());
    }
}

//! Quadratic normal form and gauge transform for one frequency band.
//!
//! For a band `k ≥ 1`,
//!
//! ```text
//! B_k(φ,φ) = ¼[ iP_k⁺(φ ∂⁻¹φ) - P_k⁺(Hφ ∂⁻¹φ) - 2i ∂⁻¹(P_{<k}φ) P_k⁺φ ]
//! φ̃_k⁺ = P_k⁺φ + B_k(φ,φ)
//! ψ_k⁺ = φ̃_k⁺ e^{-iΦ_{<k}},   Φ = -½∂⁻¹φ
//! ```
//!
//! With this sign of the last term, `(∂_t - ∂ₓ³)ψ_k⁺` is cubic in the
//! amplitude while `(∂_t - ∂ₓ³)P_k⁺φ` is quadratic. Flipping the last term to
//! `+2i` (see [`ThirdTermSign::Plus`]) requires the opposite gauge
//! `e^{+iΦ_{<k}}` for the same cancellation.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flows::{airy_propagate, FlowError, FlowKind};
use crate::invariants::EnergySeries;
use crate::spectral::lp::check_resolved;
use crate::spectral::product::{product, product_mixed};
use crate::spectral::{
    antiderivative, antiderivative_dropping_mean, hilbert, project, project_at_or_above,
    project_band, project_below, project_range, ComplexField, DyadicBand, RealField,
    SpectralError,
};
use crate::stepper::{evolve, least_squares_slope, Order, StepperError, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormalFormError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Stepper(#[from] StepperError),
    #[error("band index must be at least 1, got {0}")]
    BandZero(u32),
    #[error("need at least 3 frames, got {0}")]
    TooFewFrames(usize),
    #[error("frames must be equally spaced for centered differences")]
    UnevenFrames,
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

pub type Result<T> = std::result::Result<T, NormalFormError>;

/// Sign of the `∂⁻¹(P_{<k}φ)P_k⁺φ` term in `B_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThirdTermSign {
    /// `-2i`, paired with the gauge `e^{-iΦ_{<k}}`.
    Minus,
    /// `+2i`, paired with the gauge `e^{+iΦ_{<k}}`.
    Plus,
}

impl ThirdTermSign {
    fn factor(self) -> f64 {
        match self {
            ThirdTermSign::Minus => -1.0,
            ThirdTermSign::Plus => 1.0,
        }
    }
}

const I: Complex64 = Complex64::new(0.0, 1.0);

fn band_k(k: u32) -> Result<()> {
    if k == 0 {
        Err(NormalFormError::BandZero(k))
    } else {
        Ok(())
    }
}

/// `Φ = -½ ∂⁻¹φ`, so that `-2∂ₓΦ = φ`.
pub fn gauge_phase(phi: &RealField) -> Result<RealField> {
    Ok(&antiderivative(phi)? * -0.5)
}

/// `Φ_{<k} = P_{<k}Φ`.
pub fn gauge_phase_below(phi: &RealField, k: u32) -> Result<RealField> {
    Ok(project_below(&gauge_phase(phi)?, k)?)
}

/// The ordered bilinear form `B_k(f, g)`; `B_k(φ,φ)` is [`bk`].
pub fn bk_ordered(f: &RealField, g: &RealField, k: u32, sign: ThirdTermSign) -> Result<ComplexField> {
    band_k(k)?;
    check_resolved(f.grid(), k)?;
    let plus = DyadicBand::plus(k);
    let ig = antiderivative(g)?;
    let t1 = project_band(&product(&[f, &ig])?, plus)?;
    let t2 = project_band(&product(&[&hilbert(f), &ig])?, plus)?;
    let low = antiderivative_dropping_mean(&project_below(f, k)?);
    let t3 = product_mixed(&[&low], &[&project_band(g, plus)?])?;
    let out = &(&(&t1 * I) - &t2) + &(&t3 * (I * 2.0 * sign.factor()));
    Ok(&out * 0.25)
}

/// Symmetric polarization `(B_k(f,g) + B_k(g,f))/2`.
pub fn bk_bilinear(f: &RealField, g: &RealField, k: u32) -> Result<ComplexField> {
    let a = bk_ordered(f, g, k, ThirdTermSign::Minus)?;
    let b = bk_ordered(g, f, k, ThirdTermSign::Minus)?;
    Ok(&(&a + &b) * 0.5)
}

/// `B_k(φ, φ)`.
pub fn bk(phi: &RealField, k: u32) -> Result<ComplexField> {
    bk_signed(phi, k, ThirdTermSign::Minus)
}

pub fn bk_signed(phi: &RealField, k: u32, sign: ThirdTermSign) -> Result<ComplexField> {
    phi.require_zero_mean()?;
    bk_ordered(phi, phi, k, sign)
}

/// `B_0(φ,φ) = -¼[P_0(∂⁻¹φ_{>0}·Hφ) + P_0H(∂⁻¹φ_{>0}·Hφ)]`.
pub fn b0(phi: &RealField) -> Result<RealField> {
    phi.require_zero_mean()?;
    let high = antiderivative_dropping_mean(&project_at_or_above(phi, 1)?);
    let prod = product(&[&high, &hilbert(phi)])?;
    let p0 = project(&prod, 0)?;
    Ok(&(&p0 + &hilbert(&p0)) * -0.25)
}

/// `2B_k(v,φ) - ½ i ∂⁻¹v_{(0,k)} P_k⁺φ`, with the symmetric `B_k`.
pub fn bk_lin(phi: &RealField, v: &RealField, k: u32) -> Result<ComplexField> {
    phi.require_zero_mean()?;
    v.require_zero_mean()?;
    let sym = bk_bilinear(v, phi, k)?;
    let low = antiderivative_dropping_mean(&project_range(v, 0, k)?);
    let corr = product_mixed(&[&low], &[&project_band(phi, DyadicBand::plus(k))?])?;
    Ok(&(&sym * 2.0) - &(&corr * (0.5 * I)))
}

/// All intermediate objects of the band-`k` transformation.
#[derive(Debug, Clone)]
pub struct BandTransform {
    pub k: u32,
    pub phi_k_plus: ComplexField,
    pub b_k: ComplexField,
    pub tilde_phi: ComplexField,
    /// `Φ_{<k}`
    pub phase: RealField,
    pub psi: ComplexField,
}

pub fn band_transform(phi: &RealField, k: u32) -> Result<BandTransform> {
    band_transform_signed(phi, k, ThirdTermSign::Minus)
}

/// Band transform with the chosen sign convention; the gauge factor is
/// `e^{-iΦ_{<k}}` for [`ThirdTermSign::Minus`] and `e^{+iΦ_{<k}}` otherwise.
pub fn band_transform_signed(phi: &RealField, k: u32, sign: ThirdTermSign) -> Result<BandTransform> {
    let phi_k_plus = project_band(phi, DyadicBand::plus(k))?;
    let b_k = bk_signed(phi, k, sign)?;
    let tilde_phi = &phi_k_plus + &b_k;
    let phase = gauge_phase_below(phi, k)?;
    let s = sign.factor();
    let values = tilde_phi
        .values()
        .iter()
        .zip(phase.values())
        .map(|(z, p)| z * Complex64::from_polar(1.0, s * p))
        .collect();
    let psi = ComplexField::new(Arc::clone(phi.grid()), values)?;
    Ok(BandTransform {
        k,
        phi_k_plus,
        b_k,
        tilde_phi,
        phase,
        psi,
    })
}

impl BandTransform {
    /// `max_x ||ψ| - |φ̃|| / sup|φ̃|`; zero up to round-off.
    pub fn unitarity_defect(&self) -> f64 {
        let sup = self.tilde_phi.sup_norm();
        if sup == 0.0 {
            return 0.0;
        }
        self.psi
            .values()
            .iter()
            .zip(self.tilde_phi.values())
            .map(|(a, b)| (a.norm() - b.norm()).abs())
            .fold(0.0, f64::max)
            / sup
    }
}

/// Size constants of `B_k` over `trials` band-localized random fields:
/// `C_k = max ‖B_k‖/(2^{-k/2}‖φ‖²)` and `D_k = max ‖B_k‖/(2^{-k}‖φ‖_∞‖φ‖)`.
pub fn bk_scaling_constants(
    grid: &Arc<crate::spectral::SpectralGrid>,
    k: u32,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    band_k(k)?;
    check_resolved(grid, k)?;
    let (mut c, mut d): (f64, f64) = (0.0, 0.0);
    for i in 0..trials as u64 {
        let raw = crate::expcli::profiles::random_bandlimited(
            grid,
            seed.wrapping_add(i),
            2f64.powi(k as i32 + 1),
            1.0,
        );
        let phi = project(&raw, k)?;
        let l2 = phi.l2_norm();
        if l2 == 0.0 {
            continue;
        }
        let b = bk(&phi, k)?.l2_norm();
        c = c.max(b / (2f64.powf(-(k as f64) / 2.0) * l2 * l2));
        d = d.max(b / (2f64.powi(-(k as i32)) * phi.sup_norm() * l2));
    }
    Ok((c, d))
}

/// `(∂_t - ∂ₓ³)u` at the middle of three equally spaced samples, by a
/// centered difference of `e^{-t∂ₓ³}u`.
pub fn airy_defect(before: &ComplexField, after: &ComplexField, delta: f64) -> ComplexField {
    let fwd = airy_propagate(after, -delta);
    let bwd = airy_propagate(before, delta);
    &(&fwd - &bwd) * (0.5 / delta)
}

fn check_uniform(times: &[f64]) -> Result<()> {
    if times.len() < 3 {
        return Err(NormalFormError::TooFewFrames(times.len()));
    }
    let h = times[1] - times[0];
    if times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1e-300))
    {
        return Err(NormalFormError::UnevenFrames);
    }
    Ok(())
}

/// Measured `(∂_t - ∂ₓ³)` of `P_k⁺φ` (`residual_raw`) and `ψ_k⁺`
/// (`residual_gauged`) at every interior frame, as L² norms.
pub fn airy_residual(traj: &Trajectory, k: u32) -> Result<EnergySeries> {
    let times = traj.times();
    check_uniform(&times)?;
    let delta = times[1] - times[0];
    let transforms = traj
        .frames
        .iter()
        .map(|(_, f)| band_transform(f, k))
        .collect::<Result<Vec<_>>>()?;
    let mut raw = Vec::new();
    let mut gauged = Vec::new();
    for j in 1..transforms.len() - 1 {
        let (a, b) = (&transforms[j - 1], &transforms[j + 1]);
        raw.push(airy_defect(&a.phi_k_plus, &b.phi_k_plus, delta).l2_norm());
        gauged.push(airy_defect(&a.psi, &b.psi, delta).l2_norm());
    }
    let mut series = EnergySeries::new(times[1..times.len() - 1].to_vec());
    series.push("residual_raw", raw);
    series.push("residual_gauged", gauged);
    Ok(series)
}

/// Parameters of the amplitude sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Step used to reach `t_probe - delta`.
    pub dt: f64,
    /// Frame spacing of the centered difference.
    pub delta: f64,
    pub t_probe: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            dt: 1e-3,
            delta: 1e-3,
            t_probe: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub epsilon: f64,
    pub k: u32,
    pub t: f64,
    pub residual_raw: f64,
    pub residual_gauged: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicScaling {
    pub k: u32,
    pub slope_raw: Order,
    pub slope_gauged: Order,
    pub rows: Vec<ResidualRow>,
}

/// Residuals below this multiple of `ε‖profile‖` count as round-off.
pub const RESIDUAL_ROUNDOFF: f64 = 1e-9;

fn fit(eps: &[f64], values: &[f64], scale: &[f64]) -> Order {
    if values
        .iter()
        .zip(scale)
        .all(|(v, s)| *v <= RESIDUAL_ROUNDOFF * s)
    {
        return Order::Exact;
    }
    if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Order::Indeterminate;
    }
    let pts: Vec<(f64, f64)> = eps.iter().zip(values).map(|(e, v)| (e.ln(), v.ln())).collect();
    Order::Fitted(least_squares_slope(&pts))
}

/// Residual slopes of `P_k⁺φ` and `ψ_k⁺` against the amplitude of
/// `φ(0) = ε·profile`, measured at `t_probe` on the given flow.
pub fn cubic_scaling_test(
    kind: &FlowKind,
    profile: &RealField,
    amplitudes: &[f64],
    k: u32,
    options: &SweepOptions,
) -> Result<CubicScaling> {
    if amplitudes.len() < 4 {
        return Err(NormalFormError::DegenerateFit(format!(
            "need at least 4 amplitudes, got {}",
            amplitudes.len()
        )));
    }
    let ratio = amplitudes[1] / amplitudes[0];
    if amplitudes.iter().any(|a| !(*a > 0.0))
        || !(ratio > 1.0)
        || amplitudes
            .windows(2)
            .any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-6)
    {
        return Err(NormalFormError::DegenerateFit(
            "amplitudes must be a positive increasing geometric ladder".into(),
        ));
    }
    let SweepOptions { dt, delta, t_probe } = *options;
    if !(delta > 0.0 && dt > 0.0 && t_probe >= delta) {
        return Err(NormalFormError::DegenerateFit("need dt, delta > 0 and t_probe >= delta".into()));
    }
    band_k(k)?;
    check_resolved(profile.grid(), k)?;
    let norm = profile.l2_norm();
    let mut rows = Vec::with_capacity(amplitudes.len());
    for &eps in amplitudes {
        let f0 = profile * eps;
        let t0 = t_probe - delta;
        let steps = (t0 / dt).ceil() as usize;
        let before = evolve(kind, &f0, 0.0, t0, steps, true)?;
        let mid = evolve(kind, &before, t0, t_probe, 1, true)?;
        let after = evolve(kind, &mid, t_probe, t_probe + delta, 1, true)?;
        let a = band_transform(&before, k)?;
        let b = band_transform(&after, k)?;
        rows.push(ResidualRow {
            epsilon: eps,
            k,
            t: t_probe,
            residual_raw: airy_defect(&a.phi_k_plus, &b.phi_k_plus, delta).l2_norm(),
            residual_gauged: airy_defect(&a.psi, &b.psi, delta).l2_norm(),
        });
    }
    let scale: Vec<f64> = amplitudes.iter().map(|e| e * norm).collect();
    let raw: Vec<f64> = rows.iter().map(|r| r.residual_raw).collect();
    let gauged: Vec<f64> = rows.iter().map(|r| r.residual_gauged).collect();
    Ok(CubicScaling {
        k,
        slope_raw: fit(amplitudes, &raw, &scale),
        slope_gauged: fit(amplitudes, &gauged, &scale),
        rows,
    })
}

pub fn residual_csv(rows: &[ResidualRow]) -> String {
    let mut out = String::from("epsilon,k,t,residual_raw,residual_gauged\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:.17e},{},{:.17e},{:.17e},{:.17e}",
            r.epsilon, r.k, r.t, r.residual_raw, r.residual_gauged
        );
    }
    out
}

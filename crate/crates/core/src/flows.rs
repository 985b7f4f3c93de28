//! Right-hand sides and exact linear propagators.
//!
//! Every nonlinear flow is split as `u_t = Λu + N(u)` where `Λ` is a Fourier
//! multiplier. For the third-order flows `Λ = ∂ₓ³` (symbol `-iξ³`); for
//! Benjamin-Ono `Λ = -H∂ₓ²` (symbol `-iξ|ξ|`). The full right-hand sides
//! are `Λu + N(u)`; the stepper only needs `N`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::product::{product, sum_of_products};
use crate::spectral::{derivative, filter, hilbert, Field, RealField, Scalar, SpectralError};
use crate::stepper::Trajectory;

/// Default resolution threshold: relative spectral energy allowed above
/// two thirds of the Nyquist wavenumber.
pub const TAU_TAIL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("background trajectory covers [{start}, {end}], needed t = {t}")]
    BackgroundRange { t: f64, start: f64, end: f64 },
    #[error("background trajectory is empty")]
    EmptyBackground,
}

pub type Result<T> = std::result::Result<T, FlowError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowTag {
    Airy,
    BenjaminOno,
    ThirdOrderBo,
    LinearizedTbo,
    AdjointLinearizedTbo,
}

impl FlowTag {
    pub fn name(self) -> &'static str {
        match self {
            FlowTag::Airy => "airy",
            FlowTag::BenjaminOno => "benjamin_ono",
            FlowTag::ThirdOrderBo => "third_order_bo",
            FlowTag::LinearizedTbo => "linearized_tbo",
            FlowTag::AdjointLinearizedTbo => "adjoint_linearized_tbo",
        }
    }
}

/// An evolution equation; the linearized kinds carry their background.
#[derive(Debug, Clone)]
pub enum FlowKind {
    Airy,
    BenjaminOno,
    ThirdOrderBo,
    LinearizedTbo(Arc<Trajectory>),
    AdjointLinearizedTbo(Arc<Trajectory>),
}

impl FlowKind {
    pub fn tag(&self) -> FlowTag {
        match self {
            FlowKind::Airy => FlowTag::Airy,
            FlowKind::BenjaminOno => FlowTag::BenjaminOno,
            FlowKind::ThirdOrderBo => FlowTag::ThirdOrderBo,
            FlowKind::LinearizedTbo(_) => FlowTag::LinearizedTbo,
            FlowKind::AdjointLinearizedTbo(_) => FlowTag::AdjointLinearizedTbo,
        }
    }

    pub fn background(&self) -> Option<&Arc<Trajectory>> {
        match self {
            FlowKind::LinearizedTbo(b) | FlowKind::AdjointLinearizedTbo(b) => Some(b),
            _ => None,
        }
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self, FlowKind::BenjaminOno | FlowKind::ThirdOrderBo)
    }

    /// Symbol of the linear part `Λ`.
    pub fn linear_symbol(&self, xi: f64) -> Complex64 {
        match self {
            FlowKind::BenjaminOno => Complex64::new(0.0, -xi * xi.abs()),
            _ => Complex64::new(0.0, -xi * xi * xi),
        }
    }

    /// Fails unless the background (if any) covers `[t0, t1]`.
    pub fn check_coverage(&self, t0: f64, t1: f64) -> Result<()> {
        if let Some(bg) = self.background() {
            let (start, end) = bg.time_range().ok_or(FlowError::EmptyBackground)?;
            let slack = 1e-12 * end.abs().max(1.0);
            for t in [t0, t1] {
                if t < start - slack || t > end + slack {
                    return Err(FlowError::BackgroundRange { t, start, end });
                }
            }
        }
        Ok(())
    }

    /// `N(u)` at time `t`.
    pub fn nonlinear(&self, u: &RealField, t: f64, dealias: bool) -> Result<RealField> {
        match self {
            FlowKind::Airy => Ok(RealField::zeros(u.grid())),
            FlowKind::BenjaminOno => bo_nonlinear(u, dealias),
            FlowKind::ThirdOrderBo => tbo_nonlinear(u, dealias),
            FlowKind::LinearizedTbo(bg) => {
                linearized_nonlinear(u, &bg.sample(t)?, dealias)
            }
            FlowKind::AdjointLinearizedTbo(bg) => {
                adjoint_nonlinear(u, &bg.sample(t)?, dealias)
            }
        }
    }

    /// Exact solution of `u_t = Λu` after time `t`.
    pub fn propagate<T: Scalar>(&self, f: &Field<T>, t: f64) -> Field<T> {
        filter(f, |xi| (self.linear_symbol(xi) * t).exp()).expect("unimodular symbol")
    }
}

/// Exact Airy flow `φ_t = φ_xxx`: multiplies the spectrum by `exp(-iξ³t)`.
///
/// For `t != 0` the Nyquist coefficient has no consistent real image and is
/// dropped.
pub fn airy_propagate<T: Scalar>(f: &Field<T>, t: f64) -> Field<T> {
    FlowKind::Airy.propagate(f, t)
}

/// Relative spectral energy in modes `|m| > n/3`.
pub fn tail_fraction<T: Scalar>(f: &Field<T>) -> f64 {
    let grid = f.grid();
    let n = grid.n() as i64;
    let (mut tail, mut total) = (0.0, 0.0);
    for (m, c) in f.spectrum().iter().enumerate() {
        let e = c.norm_sqr();
        total += e;
        if 3 * grid.mode(m).abs() > n {
            tail += e;
        }
    }
    if total > 0.0 {
        tail / total
    } else {
        0.0
    }
}

/// Whether `f` trips the resolution guard at threshold `tau`.
pub fn is_underresolved<T: Scalar>(f: &Field<T>, tau: f64) -> bool {
    tail_fraction(f) > tau
}

fn d(f: &RealField, order: u32) -> RealField {
    derivative(f, order).expect("order in range")
}

fn mul(factors: &[&RealField], dealias: bool) -> Result<RealField> {
    if dealias {
        return Ok(product(factors)?);
    }
    let mut acc = factors[0].clone();
    for f in &factors[1..] {
        acc = acc.zip_with(f, |a, b| a * b)?;
    }
    Ok(acc)
}

fn combine(terms: &[(f64, &[&RealField])], dealias: bool) -> Result<RealField> {
    if dealias {
        return Ok(sum_of_products(terms)?);
    }
    let mut acc = RealField::zeros(terms[0].1[0].grid());
    for (c, fs) in terms {
        acc = &acc + &(&mul(fs, false)? * *c);
    }
    Ok(acc)
}

/// Nonlinear part of Benjamin-Ono: `φφ_x`.
pub fn bo_nonlinear(phi: &RealField, dealias: bool) -> Result<RealField> {
    let px = d(phi, 1);
    mul(&[phi, &px], dealias)
}

/// `φ_t = -Hφ_xx + φφ_x`.
pub fn bo_rhs(phi: &RealField) -> Result<RealField> {
    phi.require_zero_mean()?;
    let lin = -&hilbert(&d(phi, 2));
    Ok(&lin + &bo_nonlinear(phi, true)?)
}

/// Nonlinear part of the third-order flow:
/// `-¾φ²φ_x - ¾φ_xHφ_x - ¾φHφ_xx - ¾H(φ_xxφ + φ_x²)`.
pub fn tbo_nonlinear(phi: &RealField, dealias: bool) -> Result<RealField> {
    let px = d(phi, 1);
    let pxx = d(phi, 2);
    let hpx = hilbert(&px);
    let hpxx = hilbert(&pxx);
    let local = combine(
        &[
            (-0.75, &[phi, phi, &px][..]),
            (-0.75, &[&px, &hpx][..]),
            (-0.75, &[phi, &hpxx][..]),
        ],
        dealias,
    )?;
    let inner = combine(&[(1.0, &[&pxx, phi][..]), (1.0, &[&px, &px][..])], dealias)?;
    Ok(&local - &(&hilbert(&inner) * 0.75))
}

/// Third-order Benjamin-Ono right-hand side in expanded form.
pub fn tbo_rhs(phi: &RealField) -> Result<RealField> {
    tbo_rhs_with(phi, true)
}

pub fn tbo_rhs_with(phi: &RealField, dealias: bool) -> Result<RealField> {
    phi.require_zero_mean()?;
    Ok(&d(phi, 3) + &tbo_nonlinear(phi, dealias)?)
}

/// Conservative form `φ_xxx - ¾φ²φ_x - ¾[φHφ_x + H(φφ_x)]_x`, kept as an
/// independent cross-check of [`tbo_rhs`].
pub fn tbo_rhs_conservative(phi: &RealField) -> Result<RealField> {
    phi.require_zero_mean()?;
    let px = d(phi, 1);
    let hpx = hilbert(&px);
    let cube = mul(&[phi, phi, phi], true)?;
    let flux = &mul(&[phi, &hpx], true)? + &hilbert(&mul(&[phi, &px], true)?);
    let nonlinear = &(&d(&cube, 1) * (-0.25)) - &(&d(&flux, 1) * 0.75);
    Ok(&d(phi, 3) + &nonlinear)
}

pub(crate) fn linearized_nonlinear(v: &RealField, phi: &RealField, dealias: bool) -> Result<RealField> {
    v.check_grid(phi)?;
    let px = d(phi, 1);
    let pxx = d(phi, 2);
    let vx = d(v, 1);
    let vxx = d(v, 2);
    let hpx = hilbert(&px);
    let hpxx = hilbert(&pxx);
    let hvx = hilbert(&vx);
    let hvxx = hilbert(&vxx);
    let local = combine(
        &[
            (-1.5, &[phi, &px, v][..]),
            (-0.75, &[phi, phi, &vx][..]),
            (-0.75, &[&vx, &hpx][..]),
            (-0.75, &[&px, &hvx][..]),
            (-0.75, &[v, &hpxx][..]),
            (-0.75, &[phi, &hvxx][..]),
        ],
        dealias,
    )?;
    let inner = combine(
        &[
            (1.0, &[&vxx, phi][..]),
            (1.0, &[&pxx, v][..]),
            (2.0, &[&vx, &px][..]),
        ],
        dealias,
    )?;
    Ok(&local - &(&hilbert(&inner) * 0.75))
}

/// Linearization of the third-order flow around `φ`, applied to `v`.
pub fn linearized_tbo_rhs(v: &RealField, phi: &RealField) -> Result<RealField> {
    v.require_zero_mean()?;
    Ok(&d(v, 3) + &linearized_nonlinear(v, phi, true)?)
}

fn adjoint_nonlinear(w: &RealField, phi: &RealField, dealias: bool) -> Result<RealField> {
    w.check_grid(phi)?;
    let px = d(phi, 1);
    let wx = d(w, 1);
    let hpx = hilbert(&px);
    let hwxx = hilbert(&d(w, 2));
    let local = combine(
        &[
            (1.5, &[phi, &px, w][..]),
            (-0.75, &[&wx, &hpx][..]),
            (-0.75, &[phi, &hwxx][..]),
        ],
        dealias,
    )?;
    let phi2w = mul(&[phi, phi, w], dealias)?;
    let wxphi = mul(&[&wx, phi], dealias)?;
    let div = &d(&phi2w, 1) + &d(&hilbert(&wxphi), 1);
    Ok(&local - &(&div * 0.75))
}

/// Right-hand side of the adjoint linearized flow; equals `-L*` where `L`
/// is [`linearized_tbo_rhs`], so `∫ Lv·w + ∫ v·adj(w) = 0`.
pub fn adjoint_linearized_rhs(w: &RealField, phi: &RealField) -> Result<RealField> {
    w.require_zero_mean()?;
    Ok(&d(w, 3) + &adjoint_nonlinear(w, phi, true)?)
}

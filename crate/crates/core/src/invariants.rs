//! Conserved and almost-conserved functionals.
//!
//! `e1` and `e2` evaluate the densities exactly as displayed:
//!
//! ```text
//! E1 = ∫ φHφ_x - φ³/3        E2 = ∫ φ_x² - ¾φ²Hφ_x + φ⁴/8
//! ```
//!
//! These are conserved by `φ_t + Hφ_xx = φφ_x`. The third-order flow in this
//! crate (`φ_t = φ_xxx - ¾φ²φ_x - …`) conserves them at `-φ`, i.e. with the
//! odd-degree terms flipped; [`e1_flow`] and [`e2_flow`] are those versions
//! and are what the `E1`/`E2` tracking channels report.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::spectral::lp::bump;
use crate::spectral::product::{integral_real, product, sum_of_products};
use crate::spectral::{
    abs_d_power, antiderivative_dropping_mean, derivative, filter, hilbert, sobolev_norm,
    RealField, SpectralError,
};
use crate::stepper::Trajectory;

/// Edge-leakage threshold: fraction of `‖φ‖²` allowed in `|x| > 0.4 L`.
pub const TAU_EDGE: f64 = 1e-6;
/// Constant in the `t^{-1/3}` frequency cutoff of the modified energy.
pub const C_CUT: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InvariantError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("unknown channel {0:?}")]
    UnknownChannel(String),
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("trajectories do not share frame times")]
    FrameMismatch,
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, InvariantError>;

fn d(f: &RealField, order: u32) -> RealField {
    derivative(f, order).expect("order in range")
}

pub fn e0(phi: &RealField) -> f64 {
    integral_real(&[phi, phi]).expect("two factors")
}

fn e1_parts(phi: &RealField) -> (f64, f64) {
    let hpx = hilbert(&d(phi, 1));
    let quad = integral_real(&[phi, &hpx]).expect("two factors");
    let cubic = integral_real(&[phi, phi, phi]).expect("three factors") / 3.0;
    (quad, cubic)
}

fn e2_parts(phi: &RealField) -> (f64, f64, f64) {
    let px = d(phi, 1);
    let hpx = hilbert(&px);
    let quad = integral_real(&[&px, &px]).expect("two factors");
    let cubic = 0.75 * integral_real(&[phi, phi, &hpx]).expect("three factors");
    let quartic = integral_real(&[phi, phi, phi, phi]).expect("four factors") / 8.0;
    (quad, cubic, quartic)
}

/// `∫ φHφ_x - φ³/3` as displayed.
pub fn e1(phi: &RealField) -> f64 {
    let (q, c) = e1_parts(phi);
    q - c
}

/// `∫ φHφ_x + φ³/3`, conserved by the third-order flow.
pub fn e1_flow(phi: &RealField) -> f64 {
    let (q, c) = e1_parts(phi);
    q + c
}

/// `∫ φ_x² - ¾φ²Hφ_x + φ⁴/8` as displayed.
pub fn e2(phi: &RealField) -> f64 {
    let (q, c, f) = e2_parts(phi);
    q - c + f
}

/// `∫ φ_x² + ¾φ²Hφ_x + φ⁴/8`, conserved by the third-order flow.
pub fn e2_flow(phi: &RealField) -> f64 {
    let (q, c, f) = e2_parts(phi);
    q + c + f
}

/// Fraction of `‖φ‖²` near the domain edges, `|x| > 0.4 L`.
pub fn edge_fraction(phi: &RealField) -> f64 {
    let g = phi.grid();
    let cut = 0.4 * g.length();
    let (mut edge, mut total) = (0.0, 0.0);
    for (j, v) in phi.values().iter().enumerate() {
        total += v * v;
        if g.x(j).abs() > cut {
            edge += v * v;
        }
    }
    if total > 0.0 {
        edge / total
    } else {
        0.0
    }
}

/// An x-weighted field together with the leakage diagnostic of its input.
#[derive(Debug, Clone)]
pub struct Weighted {
    pub value: RealField,
    pub edge_fraction: f64,
}

impl Weighted {
    pub fn leaked(&self) -> bool {
        self.edge_fraction > TAU_EDGE
    }
}

fn x_times(phi: &RealField) -> RealField {
    let g = phi.grid();
    let values = phi.values().iter().enumerate().map(|(j, v)| g.x(j) * v).collect();
    RealField::new(std::sync::Arc::clone(g), values).expect("same length")
}

/// `Lφ = xφ + 3tφ_xx` with the centered coordinate.
pub fn l_vector_field(phi: &RealField, t: f64) -> Weighted {
    let value = &x_times(phi) + &(&d(phi, 2) * (3.0 * t));
    Weighted {
        value,
        edge_fraction: edge_fraction(phi),
    }
}

/// `xφ + 3tφ_xx - (3t/4)φ³ - c·t[φHφ_x + H(φφ_x)]`.
pub fn l_nonlinear_weighted(phi: &RealField, t: f64, c: f64) -> Weighted {
    let px = d(phi, 1);
    let hpx = hilbert(&px);
    let local = sum_of_products(&[(-0.75 * t, &[phi, phi, phi][..]), (-c * t, &[phi, &hpx][..])])
        .expect("same grid");
    let flux = hilbert(&product(&[phi, &px]).expect("same grid"));
    let lin = l_vector_field(phi, t);
    Weighted {
        value: &(&lin.value + &local) - &(&flux * (c * t)),
        edge_fraction: lin.edge_fraction,
    }
}

/// The displayed nonlinear vector field, quadratic coefficient `3t/4`.
pub fn l_nonlinear(phi: &RealField, t: f64) -> Weighted {
    l_nonlinear_weighted(phi, t, 0.75)
}

/// Quadratic and cubic parts of the modified energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModifiedEnergy {
    pub e2: f64,
    pub e3: f64,
}

impl ModifiedEnergy {
    pub fn total(&self) -> f64 {
        self.e2 + self.e3
    }
}

/// Smooth projection onto `|ξ| > c_cut t^{-1/3}`: the multiplier
/// `1 - ψ(ξ/λ)`, vanishing for `|ξ| ≤ λ` and equal to 1 for `|ξ| ≥ 2λ`.
pub fn high_part(f: &RealField, t: f64, c_cut: f64) -> RealField {
    let lambda = c_cut * t.powf(-1.0 / 3.0);
    filter(f, |xi| num_complex::Complex64::new(1.0 - bump(xi / lambda), 0.0))
        .expect("bounded symbol")
}

/// `E = ‖y‖² + E^[3]` with the cubic correction over `y^hi`, `φ^hi`.
pub fn modified_energy(y: &RealField, phi: &RealField, t: f64) -> Result<ModifiedEnergy> {
    modified_energy_with_cut(y, phi, t, C_CUT)
}

pub fn modified_energy_with_cut(
    y: &RealField,
    phi: &RealField,
    t: f64,
    c_cut: f64,
) -> Result<ModifiedEnergy> {
    if !(t > 0.0) {
        return Err(InvariantError::NonPositiveTime(t));
    }
    y.check_grid(phi)?;
    y.require_zero_mean()?;
    phi.require_zero_mean()?;
    let e2 = integral_real(&[y, y])?;
    let yh = high_part(y, t, c_cut);
    let ph = high_part(phi, t, c_cut);
    let a = abs_d_power(&yh, -0.5);
    let b = hilbert(&abs_d_power(&yh, 0.5));
    let c = antiderivative_dropping_mean(&ph);
    let dd = hilbert(&a);
    let e = hilbert(&ph);
    let f = abs_d_power(&yh, 0.5);
    let e3 = (integral_real(&[&a, &b, &c])? - integral_real(&[&a, &dd, &e])?
        + integral_real(&[&f, &dd, &c])?)
        / 8.0;
    Ok(ModifiedEnergy { e2, e3 })
}

/// Named time series evaluated along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySeries {
    pub times: Vec<f64>,
    pub channels: Vec<(String, Vec<f64>)>,
    pub warnings: Vec<String>,
}

impl EnergySeries {
    pub fn new(times: Vec<f64>) -> Self {
        EnergySeries {
            times,
            channels: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, values: Vec<f64>) {
        assert_eq!(values.len(), self.times.len(), "channel length");
        self.channels.push((name.to_string(), values));
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn reference(&self, name: &str) -> Option<f64> {
        self.channel(name).and_then(|v| v.first().copied())
    }

    /// `max |v - v₀| / |v₀|`; absolute when `v₀ = 0`.
    pub fn drift(&self, name: &str) -> Option<f64> {
        let v = self.channel(name)?;
        let v0 = *v.first()?;
        let dev = v.iter().map(|x| (x - v0).abs()).fold(0.0, f64::max);
        Some(if v0 != 0.0 { dev / v0.abs() } else { dev })
    }

    pub fn max(&self, name: &str) -> Option<f64> {
        self.channel(name)
            .map(|v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for (name, _) in &self.channels {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            let _ = write!(out, "{t:.17e}");
            for (_, v) in &self.channels {
                let _ = write!(out, ",{:.17e}", v[i]);
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| InvariantError::Io(e.to_string()))
    }
}

/// Channel names understood by [`track`]: `E0`, `E1`, `E2` (flow-matched
/// signs), `E1_displayed`, `E2_displayed`, `L_norm`, `lnl_half_norm`,
/// `Hs:<s>` (inhomogeneous) and `Hdot:<s>` (homogeneous).
pub fn channel_value(name: &str, phi: &RealField, t: f64) -> Result<f64> {
    Ok(match name {
        "E0" => e0(phi),
        "E1" => e1_flow(phi),
        "E2" => e2_flow(phi),
        "E1_displayed" => e1(phi),
        "E2_displayed" => e2(phi),
        "L_norm" => l_vector_field(phi, t).value.l2_norm(),
        "lnl_half_norm" => sobolev_norm(&l_nonlinear(phi, t).value, 0.5, true)?,
        other => {
            let (kind, s) = other
                .split_once(':')
                .ok_or_else(|| InvariantError::UnknownChannel(other.into()))?;
            let s: f64 = s
                .parse()
                .map_err(|_| InvariantError::UnknownChannel(other.into()))?;
            match kind {
                "Hs" => sobolev_norm(phi, s, false)?,
                "Hdot" => sobolev_norm(phi, s, true)?,
                _ => return Err(InvariantError::UnknownChannel(other.into())),
            }
        }
    })
}

fn uses_x_weight(name: &str) -> bool {
    matches!(name, "L_norm" | "lnl_half_norm")
}

/// Evaluates the named channels at every frame.
pub fn track(traj: &Trajectory, channels: &[&str]) -> Result<EnergySeries> {
    let mut series = EnergySeries::new(traj.times());
    let (_, first) = &traj.frames[0];
    for name in channels {
        channel_value(name, first, 0.0)?;
    }
    let weighted = channels.iter().any(|c| uses_x_weight(c));
    for name in channels {
        let values = traj
            .frames
            .iter()
            .map(|(t, f)| channel_value(name, f, *t))
            .collect::<Result<Vec<_>>>()?;
        series.push(name, values);
    }
    if weighted {
        for (t, f) in &traj.frames {
            let frac = edge_fraction(f);
            if frac > TAU_EDGE {
                series
                    .warnings
                    .push(format!("edge leakage {frac:.3e} at t = {t}"));
            }
        }
    }
    Ok(series)
}

/// Modified-energy channels along a coupled `(φ, v)` run with
/// `y = |D|^{-1/2} v`: `y_l2_sq`, `E3`, `modified_energy`, and
/// `E3_scaled = |E3| / (t^{1/12} ‖y‖²)`. Frames at `t = 0` use the first
/// positive frame time for the cutoff.
pub fn track_modified_energy(phi: &Trajectory, v: &Trajectory) -> Result<EnergySeries> {
    if phi.times() != v.times() {
        return Err(InvariantError::FrameMismatch);
    }
    let times = phi.times();
    let t_floor = times
        .iter()
        .copied()
        .find(|t| *t > 0.0)
        .unwrap_or(1.0);
    let mut y2 = Vec::new();
    let mut e3 = Vec::new();
    let mut total = Vec::new();
    let mut scaled = Vec::new();
    for ((t, p), (_, vf)) in phi.frames.iter().zip(&v.frames) {
        let y = abs_d_power(vf, -0.5);
        let m = modified_energy(&y, p, t.max(t_floor))?;
        y2.push(m.e2);
        e3.push(m.e3);
        total.push(m.total());
        let denom = t.max(t_floor).powf(1.0 / 12.0) * m.e2;
        scaled.push(if denom > 0.0 { m.e3.abs() / denom } else { 0.0 });
    }
    let mut series = EnergySeries::new(times);
    series.push("y_l2_sq", y2);
    series.push("E3", e3);
    series.push("modified_energy", total);
    series.push("E3_scaled", scaled);
    Ok(series)
}

//! Region decomposition, weighted decay measurements, linear decay fits and
//! the bilinear space-time estimate.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flows::airy_propagate;
use crate::invariants::{edge_fraction, TAU_EDGE};
use crate::spectral::product::integral_of_product;
use crate::spectral::{derivative, project, RealField, SpectralError, SpectralGrid};
use crate::stepper::{least_squares_slope, Trajectory};

pub const DEFAULT_DELTA: f64 = 0.05;
pub const C_REGION: f64 = 1.0;
/// Below this value of `t^{-1/3}⟨x⟩_t` the elliptic log channel is not evaluated.
pub const LOG_FLOOR: f64 = 2.0;
/// Fewest time samples of a space-time quadrature.
pub const MIN_TIME_SAMPLES: usize = 64;
/// Default sample count; the truncated window makes the trapezoid rule second
/// order, and 512 intervals keep refinement changes near 1e-7.
pub const TIME_SAMPLES: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispersionError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("need at least {need} times, got {got}")]
    TooFewTimes { need: usize, got: usize },
    #[error("wrap-around contamination at t = {time}: edge fraction {fraction:.3e}")]
    WrapAround { time: f64, fraction: f64 },
    #[error("bands {j} and {k} are not separated")]
    Separation { j: u32, k: u32 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

pub type Result<T> = std::result::Result<T, DispersionError>;

/// `⟨x⟩_t = (x² + t^{2/3})^{1/2}`.
pub fn jbracket(x: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(DispersionError::NonPositiveTime(t));
    }
    Ok((x * x + t.powf(2.0 / 3.0)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Hyperbolic,
    SelfSimilar,
    Elliptic,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Hyperbolic, Region::SelfSimilar, Region::Elliptic];

    pub fn name(self) -> &'static str {
        match self {
            Region::Hyperbolic => "hyperbolic",
            Region::SelfSimilar => "self_similar",
            Region::Elliptic => "elliptic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegionMask {
    pub grid: Arc<SpectralGrid>,
    pub t: f64,
    pub c_region: f64,
    pub labels: Vec<Region>,
}

impl RegionMask {
    pub fn threshold(&self) -> f64 {
        self.c_region * self.t.cbrt()
    }

    pub fn count(&self, region: Region) -> usize {
        self.labels.iter().filter(|r| **r == region).count()
    }
}

/// Labels `x ≥ c t^{1/3}` hyperbolic, `x ≤ -c t^{1/3}` elliptic, the rest
/// self-similar.
pub fn classify(grid: &Arc<SpectralGrid>, t: f64, c_region: f64) -> Result<RegionMask> {
    if !(t > 0.0) {
        return Err(DispersionError::NonPositiveTime(t));
    }
    if !(c_region > 0.0) {
        return Err(DispersionError::Parameter(format!("c_region must be positive, got {c_region}")));
    }
    let b = c_region * t.cbrt();
    let labels = grid
        .coordinates()
        .into_iter()
        .map(|x| {
            if x >= b {
                Region::Hyperbolic
            } else if x <= -b {
                Region::Elliptic
            } else {
                Region::SelfSimilar
            }
        })
        .collect();
    Ok(RegionMask {
        grid: Arc::clone(grid),
        t,
        c_region,
        labels,
    })
}

/// Placement of `δ` in the `⟨x⟩_t` exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaVariant {
    /// `t^{1/4}⟨x⟩_t^{1/4-δ}|φ|` and `t^{3/4}⟨x⟩_t^{-1/4-δ}|φ_x|`
    Minus,
    /// `t^{1/4}⟨x⟩_t^{1/4+δ}|φ|` and `t^{3/4}⟨x⟩_t^{-1/4+δ}|φ_x|`
    Plus,
}

impl DeltaVariant {
    pub fn name(self) -> &'static str {
        match self {
            DeltaVariant::Minus => "minus",
            DeltaVariant::Plus => "plus",
        }
    }

    fn sign(self) -> f64 {
        match self {
            DeltaVariant::Minus => -1.0,
            DeltaVariant::Plus => 1.0,
        }
    }
}

/// One frame restricted to one region (or the whole grid when `region` is
/// `None`). The elliptic channels are 0 outside the elliptic region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub t: f64,
    pub region: Option<Region>,
    pub weighted_phi_sup: f64,
    pub weighted_phix_sup: f64,
    pub elliptic_phi_over_log: f64,
    pub elliptic_phix_over_log: f64,
}

impl DecayRow {
    pub fn region_name(&self) -> &'static str {
        self.region.map_or("global", Region::name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub delta: f64,
    pub c_region: f64,
    pub times: Vec<f64>,
    pub minus: Vec<DecayRow>,
    pub plus: Vec<DecayRow>,
    /// Unweighted `sup|φ|` and `sup|φ_x|` over the hyperbolic region.
    pub hyperbolic_phi_sup: Vec<f64>,
    pub hyperbolic_phix_sup: Vec<f64>,
    /// Fitted time exponents of the two hyperbolic sups; `None` with fewer
    /// than two usable frames.
    pub exponent_phi: Option<f64>,
    pub exponent_phix: Option<f64>,
    pub warnings: Vec<String>,
    pub notices: Vec<String>,
}

impl DecayReport {
    pub fn rows(&self, variant: DeltaVariant) -> &[DecayRow] {
        match variant {
            DeltaVariant::Minus => &self.minus,
            DeltaVariant::Plus => &self.plus,
        }
    }

    /// Largest value of a channel over all frames of one region scope.
    pub fn max(&self, variant: DeltaVariant, region: Option<Region>, channel: fn(&DecayRow) -> f64) -> f64 {
        self.rows(variant)
            .iter()
            .filter(|r| r.region == region)
            .map(channel)
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self, variant: DeltaVariant) -> String {
        let mut out = String::from(
            "t,region,weighted_phi_sup,weighted_phix_sup,elliptic_phi_over_log,elliptic_phix_over_log\n",
        );
        for r in self.rows(variant) {
            let _ = writeln!(
                out,
                "{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.t,
                r.region_name(),
                r.weighted_phi_sup,
                r.weighted_phix_sup,
                r.elliptic_phi_over_log,
                r.elliptic_phix_over_log
            );
        }
        out
    }

    pub fn fit_summary(&self) -> serde_json::Value {
        serde_json::json!({
            "delta": self.delta,
            "c_region": self.c_region,
            "log_floor": LOG_FLOOR,
            "tau_edge": TAU_EDGE,
            "exponent_phi_hyperbolic": self.exponent_phi,
            "exponent_phix_hyperbolic": self.exponent_phix,
            "frames": self.times.len(),
            "warnings": self.warnings,
            "notices": self.notices,
        })
    }
}

#[derive(Default, Clone, Copy)]
struct Sups {
    phi: f64,
    phix: f64,
    ell_phi: f64,
    ell_phix: f64,
    raw_phi: f64,
    raw_phix: f64,
}

fn row(t: f64, region: Option<Region>, s: Sups) -> DecayRow {
    DecayRow {
        t,
        region,
        weighted_phi_sup: s.phi,
        weighted_phix_sup: s.phix,
        elliptic_phi_over_log: s.ell_phi,
        elliptic_phix_over_log: s.ell_phix,
    }
}

fn frame_rows(phi: &RealField, t: f64, delta: f64, mask: &RegionMask, variant: DeltaVariant) -> (Vec<DecayRow>, Sups) {
    let phix = derivative(phi, 1).expect("first derivative");
    let g = phi.grid();
    let s = variant.sign();
    let mut per = [Sups::default(); 3];
    let t13 = t.cbrt();
    for (j, (&p, &px)) in phi.values().iter().zip(phix.values()).enumerate() {
        let x = g.x(j);
        let jb = (x * x + t13 * t13).sqrt();
        let idx = mask.labels[j] as usize;
        let e = &mut per[idx];
        e.phi = e.phi.max(t.powf(0.25) * jb.powf(0.25 + s * delta) * p.abs());
        e.phix = e.phix.max(t.powf(0.75) * jb.powf(-0.25 + s * delta) * px.abs());
        e.raw_phi = e.raw_phi.max(p.abs());
        e.raw_phix = e.raw_phix.max(px.abs());
        if mask.labels[j] == Region::Elliptic && jb / t13 >= LOG_FLOOR {
            let log = (jb / t13).ln();
            e.ell_phi = e.ell_phi.max(jb * p.abs() / log);
            e.ell_phix = e.ell_phix.max(t.sqrt() * jb.sqrt() * px.abs() / log);
        }
    }
    let global = per.iter().fold(Sups::default(), |a, b| Sups {
        phi: a.phi.max(b.phi),
        phix: a.phix.max(b.phix),
        ell_phi: a.ell_phi.max(b.ell_phi),
        ell_phix: a.ell_phix.max(b.ell_phix),
        raw_phi: a.raw_phi.max(b.raw_phi),
        raw_phix: a.raw_phix.max(b.raw_phix),
    });
    let mut rows = vec![row(t, None, global)];
    rows.extend(Region::ALL.iter().map(|r| row(t, Some(*r), per[*r as usize])));
    (rows, per[Region::Hyperbolic as usize])
}

fn log_fit(times: &[f64], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0)
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    (pts.len() >= 2).then(|| least_squares_slope(&pts))
}

/// Weighted sup-norms of every frame with `t > 0`, globally and per region,
/// for both placements of `δ`.
pub fn decay_weights(traj: &Trajectory, delta: f64, c_region: f64) -> Result<DecayReport> {
    if !(delta > 0.0 && delta < 0.25) {
        return Err(DispersionError::Parameter(format!("delta must lie in (0, 1/4), got {delta}")));
    }
    let mut report = DecayReport {
        delta,
        c_region,
        times: Vec::new(),
        minus: Vec::new(),
        plus: Vec::new(),
        hyperbolic_phi_sup: Vec::new(),
        hyperbolic_phix_sup: Vec::new(),
        exponent_phi: None,
        exponent_phix: None,
        warnings: Vec::new(),
        notices: Vec::new(),
    };
    for (t, phi) in &traj.frames {
        if *t <= 0.0 {
            report.notices.push(format!("skipped frame at t = {t}"));
            continue;
        }
        let mask = classify(phi.grid(), *t, c_region)?;
        let leak = edge_fraction(phi);
        if leak > TAU_EDGE {
            report
                .warnings
                .push(format!("edge leakage at t = {t}: fraction {leak:.3e}"));
        }
        let (minus, hyp) = frame_rows(phi, *t, delta, &mask, DeltaVariant::Minus);
        let (plus, _) = frame_rows(phi, *t, delta, &mask, DeltaVariant::Plus);
        report.times.push(*t);
        report.minus.extend(minus);
        report.plus.extend(plus);
        report.hyperbolic_phi_sup.push(hyp.raw_phi);
        report.hyperbolic_phix_sup.push(hyp.raw_phix);
    }
    report.exponent_phi = log_fit(&report.times, &report.hyperbolic_phi_sup);
    report.exponent_phix = log_fit(&report.times, &report.hyperbolic_phix_sup);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    /// `(t, sup|φ(t)|)`
    pub samples: Vec<(f64, f64)>,
}

/// Least-squares slope of `log sup|e^{t∂ₓ³}f0|` against `log t`.
///
/// For localized data (initial edge fraction at most `τ_edge`), a time whose
/// edge fraction exceeds `τ_edge` aborts the fit. Data already touching the
/// edges is treated as periodic and not checked.
pub fn airy_decay_fit(f0: &RealField, times: &[f64]) -> Result<DecayFit> {
    if times.len() < 2 {
        return Err(DispersionError::TooFewTimes { need: 2, got: times.len() });
    }
    if let Some(t) = times.iter().find(|t| !(**t > 0.0)) {
        return Err(DispersionError::NonPositiveTime(*t));
    }
    let localized = edge_fraction(f0) <= TAU_EDGE;
    let mut samples = Vec::with_capacity(times.len());
    for &t in times {
        let phi = airy_propagate(f0, t);
        let fraction = edge_fraction(&phi);
        if localized && fraction > TAU_EDGE {
            return Err(DispersionError::WrapAround { time: t, fraction });
        }
        samples.push((t, phi.sup_norm()));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|(t, s)| (t.ln(), s.ln())).collect();
    Ok(DecayFit {
        exponent: least_squares_slope(&pts),
        samples,
    })
}

/// Smallest period that keeps data of the given width and bandlimit away
/// from wrap-around up to `t_end`: `4(width + 3Ξ² t_end)`.
pub fn required_length(width: f64, bandlimit: f64, t_end: f64) -> f64 {
    4.0 * (width + 3.0 * bandlimit * bandlimit * t_end)
}

/// `log₂` of the smallest FFT size resolving `bandlimit` on period `length`,
/// with a safety factor of 2.
pub fn required_log2_n(length: f64, bandlimit: f64) -> u32 {
    let n = 2.0 * bandlimit * length / std::f64::consts::PI;
    n.max(2.0).log2().ceil() as u32
}

fn trapezoid_norm_sq(u: &RealField, v: &RealField, t_end: f64, samples: usize) -> Result<f64> {
    let h = 2.0 * t_end / samples as f64;
    let mut acc = 0.0;
    for i in 0..=samples {
        let t = -t_end + i as f64 * h;
        let a = airy_propagate(u, t);
        let b = airy_propagate(v, t);
        let w = if i == 0 || i == samples { 0.5 } else { 1.0 };
        acc += w * integral_of_product(&[&a, &b, &a, &b])?.re;
    }
    Ok(acc * h)
}

fn separated(j: u32, k: u32, u: &RealField, v: &RealField) -> bool {
    if j.abs_diff(k) > 2 {
        return true;
    }
    if j != k {
        return false;
    }
    // equal bands: the caller must have arranged a gap of order 2^k between
    // the two frequency supports
    let support = |f: &RealField| -> Option<(f64, f64)> {
        let spec = f.spectrum();
        let peak = spec.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let xi = f.grid().wavenumbers();
        let live: Vec<f64> = spec
            .iter()
            .zip(xi)
            .filter(|(c, _)| c.norm() > 1e-8 * peak)
            .map(|(_, x)| x.abs())
            .collect();
        let lo = live.iter().cloned().fold(f64::MAX, f64::min);
        let hi = live.iter().cloned().fold(0.0, f64::max);
        (!live.is_empty()).then_some((lo, hi))
    };
    match (support(u), support(v)) {
        (Some((a0, a1)), Some((b0, b1))) => {
            let gap = (b0 - a1).max(a0 - b1);
            gap >= 2f64.powi(k as i32 - 2)
        }
        _ => true,
    }
}

/// `‖e^{t∂ₓ³}P_j f · e^{t∂ₓ³}P_k g‖_{L²_{t,x}} 2^{max(j,k)} / (‖P_j f‖ ‖P_k g‖)`
/// over `t ∈ [-t_end, t_end]`, by the composite trapezoid rule on
/// [`TIME_SAMPLES`] intervals.
pub fn bilinear_strichartz_ratio(j: u32, k: u32, f: &RealField, g: &RealField, t_end: f64) -> Result<f64> {
    bilinear_strichartz_ratio_with(j, k, f, g, t_end, TIME_SAMPLES)
}

pub fn bilinear_strichartz_ratio_with(
    j: u32,
    k: u32,
    f: &RealField,
    g: &RealField,
    t_end: f64,
    samples: usize,
) -> Result<f64> {
    if samples < MIN_TIME_SAMPLES {
        return Err(DispersionError::Parameter(format!(
            "need at least {MIN_TIME_SAMPLES} time samples, got {samples}"
        )));
    }
    if !(t_end > 0.0) {
        return Err(DispersionError::NonPositiveTime(t_end));
    }
    let u = project(f, j)?;
    let v = project(g, k)?;
    if !separated(j, k, &u, &v) {
        return Err(DispersionError::Separation { j, k });
    }
    let (nu, nv) = (u.l2_norm(), v.l2_norm());
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    let norm = trapezoid_norm_sq(&u, &v, t_end, samples)?.max(0.0).sqrt();
    Ok(norm * 2f64.powi(j.max(k) as i32) / (nu * nv))
}

/// Window `t_end = c 4^{-max(j,k)}`: the fast packet's transport
/// `3·4^{k+1}t_end = 12c` is then the same for every pair, and each
/// collision lasts a fixed number of samples.
pub fn strichartz_window(j: u32, k: u32, c: f64) -> f64 {
    c * 4f64.powi(-(j.max(k) as i32))
}

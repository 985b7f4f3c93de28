//! Fixed-step integrating-factor RK4.
//!
//! With `u_t = Λu + N(u, t)`, `E = e^{Λdt}` and `E_h = e^{Λdt/2}`, one step is
//! the Lawson scheme
//!
//! ```text
//! a = N(u)           u2 = E_h(u + dt/2 a)
//! b = N(u2)          u3 = E_h u + dt/2 b
//! c = N(u3)          u4 = E u + dt E_h c
//! d = N(u4)          u' = E u + dt/6 (E a + 2 E_h (b + c) + d)
//! ```
//!
//! which is classical RK4 applied to `e^{-tΛ}u`. The Airy flow is exact.

use std::fs;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::flows::{
    self, adjoint_linearized_rhs, bo_nonlinear, is_underresolved, linearized_tbo_rhs,
    tbo_nonlinear, FlowError, FlowKind, FlowTag, TAU_TAIL,
};
use crate::spectral::{snapshot, RealField, SpectralError, SpectralGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepperError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("invalid solver config: {0}")]
    Config(String),
    #[error("non-finite values at t = {time}")]
    BlowUp { time: f64 },
    #[error("{0}")]
    Precondition(String),
    #[error("archive: {0}")]
    Archive(String),
}

impl From<SpectralError> for StepperError {
    fn from(e: SpectralError) -> Self {
        StepperError::Flow(e.into())
    }
}

pub type Result<T> = std::result::Result<T, StepperError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    IfRk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub snapshot_stride: usize,
    pub dealias: bool,
    pub tau_tail: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-3,
            t_end: 1.0,
            scheme: Scheme::IfRk4,
            snapshot_stride: 1,
            dealias: true,
            tau_tail: TAU_TAIL,
        }
    }
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64, snapshot_stride: usize) -> Self {
        SolverConfig {
            dt,
            t_end,
            snapshot_stride,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(StepperError::Config(format!("dt = {} must be > 0", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(StepperError::Config(format!("t_end = {} must be >= 0", self.t_end)));
        }
        if self.snapshot_stride < 1 {
            return Err(StepperError::Config("snapshot_stride must be >= 1".into()));
        }
        if !(self.tau_tail > 0.0) {
            return Err(StepperError::Config("tau_tail must be > 0".into()));
        }
        Ok(())
    }

    /// Number of steps; `dt` is shrunk slightly when it does not divide `t_end`.
    pub fn steps(&self) -> usize {
        if self.t_end == 0.0 {
            0
        } else {
            (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
        }
    }

    pub fn effective_dt(&self) -> f64 {
        match self.steps() {
            0 => self.dt,
            s => self.t_end / s as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionWarning {
    pub time: f64,
    pub kind: String,
    pub tail_fraction: f64,
}

/// Stored solution frames plus everything needed to reproduce them.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub tag: FlowTag,
    pub config: SolverConfig,
    pub frames: Vec<(f64, RealField)>,
    pub warnings: Vec<ResolutionWarning>,
    rates: Vec<OnceLock<RealField>>,
}

impl Trajectory {
    pub fn new(tag: FlowTag, config: SolverConfig, frames: Vec<(f64, RealField)>) -> Result<Self> {
        if frames.is_empty() {
            return Err(StepperError::Precondition("trajectory needs a frame".into()));
        }
        for w in frames.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(StepperError::Precondition("frame times must increase".into()));
            }
            w[0].1.check_grid(&w[1].1)?;
        }
        let rates = frames.iter().map(|_| OnceLock::new()).collect();
        Ok(Trajectory {
            tag,
            config,
            frames,
            warnings: Vec::new(),
            rates,
        })
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        self.frames[0].1.grid()
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|(t, _)| *t).collect()
    }

    pub fn time_range(&self) -> Option<(f64, f64)> {
        Some((self.frames.first()?.0, self.frames.last()?.0))
    }

    pub fn last(&self) -> &RealField {
        &self.frames.last().expect("nonempty").1
    }

    pub fn field_at(&self, t: f64) -> Option<&RealField> {
        self.frames.iter().find(|(s, _)| *s == t).map(|(_, f)| f)
    }

    fn kind(&self) -> FlowKind {
        match self.tag {
            FlowTag::Airy => FlowKind::Airy,
            FlowTag::BenjaminOno => FlowKind::BenjaminOno,
            _ => FlowKind::ThirdOrderBo,
        }
    }

    /// `N(φ_j)` at frame `j`, for Hermite sampling.
    fn rate(&self, j: usize) -> flows::Result<&RealField> {
        if let Some(r) = self.rates[j].get() {
            return Ok(r);
        }
        let phi = &self.frames[j].1;
        let r = match self.tag {
            FlowTag::Airy => RealField::zeros(phi.grid()),
            FlowTag::BenjaminOno => bo_nonlinear(phi, self.config.dealias)?,
            FlowTag::ThirdOrderBo => tbo_nonlinear(phi, self.config.dealias)?,
            // linear flows in their own right: the full RHS minus Λ
            FlowTag::LinearizedTbo | FlowTag::AdjointLinearizedTbo => {
                return Err(FlowError::EmptyBackground)
            }
        };
        Ok(self.rates[j].get_or_init(|| r))
    }

    /// Field at time `t` by cubic Hermite interpolation of `e^{-tΛ}φ`
    /// between neighbouring frames, with slopes from the flow itself.
    ///
    /// Nonresonant interactions still oscillate at `~3ξξ₁ξ₂` in this frame,
    /// so backgrounds should be stored at every step.
    pub fn sample(&self, t: f64) -> flows::Result<RealField> {
        let (start, end) = self.time_range().ok_or(FlowError::EmptyBackground)?;
        let slack = 1e-12 * end.abs().max(1.0);
        if t < start - slack || t > end + slack {
            return Err(FlowError::BackgroundRange { t, start, end });
        }
        let t = t.clamp(start, end);
        let j = match self
            .frames
            .binary_search_by(|(s, _)| s.partial_cmp(&t).expect("finite times"))
        {
            Ok(j) => return Ok(self.frames[j].1.clone()),
            Err(j) => j - 1,
        };
        let (t0, f0) = &self.frames[j];
        let (t1, f1) = &self.frames[j + 1];
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let kind = self.kind();
        let left = &(f0 * h00) + &(self.rate(j)? * (h10 * h));
        let right = &(f1 * h01) + &(self.rate(j + 1)? * (h11 * h));
        Ok(&kind.propagate(&left, t - t0) + &kind.propagate(&right, t - t1))
    }

    /// Writes one snapshot file per frame plus `manifest.json`.
    pub fn write_archive(&self, dir: &Path) -> Result<()> {
        let io = |e: std::io::Error| StepperError::Archive(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        let mut files = Vec::with_capacity(self.frames.len());
        for (i, (t, f)) in self.frames.iter().enumerate() {
            let name = format!("frame_{i:05}.txt");
            snapshot::write(&dir.join(&name), f, *t)?;
            files.push(name);
        }
        let manifest = json!({
            "flow": self.tag,
            "n": self.grid().n(),
            "length": self.grid().length(),
            "times": self.times(),
            "files": files,
            "config": self.config,
            "warnings": self.warnings,
        });
        let text = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
        fs::write(dir.join("manifest.json"), text).map_err(io)
    }

    pub fn read_archive(dir: &Path) -> Result<Trajectory> {
        let bad = |m: String| StepperError::Archive(format!("{}: {m}", dir.display()));
        let text = fs::read_to_string(dir.join("manifest.json")).map_err(|e| bad(e.to_string()))?;
        let m: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let tag: FlowTag =
            serde_json::from_value(m["flow"].clone()).map_err(|e| bad(e.to_string()))?;
        let config: SolverConfig =
            serde_json::from_value(m["config"].clone()).map_err(|e| bad(e.to_string()))?;
        let warnings: Vec<ResolutionWarning> =
            serde_json::from_value(m["warnings"].clone()).map_err(|e| bad(e.to_string()))?;
        let files = m["files"].as_array().ok_or_else(|| bad("missing files".into()))?;
        let mut frames = Vec::with_capacity(files.len());
        let mut grid: Option<Arc<SpectralGrid>> = None;
        for name in files {
            let name = name.as_str().ok_or_else(|| bad("bad file name".into()))?;
            let text = fs::read_to_string(dir.join(name)).map_err(|e| bad(e.to_string()))?;
            let (f, t) = match &grid {
                Some(g) => snapshot::from_str_on(g, &text)?,
                None => snapshot::from_str(&text)?,
            };
            grid.get_or_insert_with(|| Arc::clone(f.grid()));
            frames.push((t, f));
        }
        let mut traj = Trajectory::new(tag, config, frames)?;
        traj.warnings = warnings;
        Ok(traj)
    }
}

type Nonlinear<'a> = dyn Fn(&[RealField], f64) -> flows::Result<Vec<RealField>> + 'a;

fn axpy(y: &RealField, a: f64, x: &RealField) -> RealField {
    y.zip_with(x, |p, q| p + a * q).expect("same grid")
}

/// One IF-RK4 step of `u_t = Λu + N(u, t)` for a vector state sharing `Λ`.
/// Negative `dt` steps backwards.
fn if_rk4_step(
    kind: &FlowKind,
    u: &[RealField],
    t: f64,
    dt: f64,
    n: &Nonlinear<'_>,
) -> flows::Result<Vec<RealField>> {
    let half = 0.5 * dt;
    let prop = |f: &RealField| kind.propagate(f, half);
    let a = n(u, t)?;
    let uh: Vec<RealField> = u.iter().map(prop).collect();
    let ah: Vec<RealField> = a.iter().map(prop).collect();
    let u2: Vec<RealField> = uh.iter().zip(&ah).map(|(x, y)| axpy(x, half, y)).collect();
    let b = n(&u2, t + half)?;
    let u3: Vec<RealField> = uh.iter().zip(&b).map(|(x, y)| axpy(x, half, y)).collect();
    let c = n(&u3, t + half)?;
    let u4: Vec<RealField> = uh
        .iter()
        .zip(&c)
        .map(|(x, y)| prop(&axpy(x, dt, y)))
        .collect();
    let d = n(&u4, t + dt)?;
    let sixth = dt / 6.0;
    Ok((0..u.len())
        .map(|i| {
            let bc = &b[i] + &c[i];
            let inner = axpy(&axpy(&uh[i], sixth, &ah[i]), 2.0 * sixth, &bc);
            axpy(&prop(&inner), sixth, &d[i])
        })
        .collect())
}

fn all_finite(fields: &[RealField]) -> bool {
    fields.iter().all(|f| f.values().iter().all(|v| v.is_finite()))
}

fn single_nonlinear<'a>(kind: &'a FlowKind, dealias: bool) -> Box<Nonlinear<'a>> {
    Box::new(move |u: &[RealField], t: f64| Ok(vec![kind.nonlinear(&u[0], t, dealias)?]))
}

fn check_initial(kind: &FlowKind, f0: &RealField) -> Result<()> {
    if let Some(bg) = kind.background() {
        bg.grid();
        f0.check_grid(&bg.frames[0].1)?;
    }
    if !matches!(kind, FlowKind::Airy) {
        f0.require_zero_mean()?;
    }
    Ok(())
}

/// Integrates `kind` from `f0` over `[0, config.t_end]`.
pub fn integrate(kind: &FlowKind, f0: &RealField, config: &SolverConfig) -> Result<Trajectory> {
    config.validate()?;
    check_initial(kind, f0)?;
    kind.check_coverage(0.0, config.t_end)?;
    let steps = config.steps();
    let dt = config.effective_dt();
    let stored = |i: usize| i.is_multiple_of(config.snapshot_stride) || i == steps;
    if matches!(kind, FlowKind::Airy) {
        let frames = (0..=steps)
            .filter(|&i| stored(i))
            .map(|i| {
                let t = i as f64 * dt;
                (t, kind.propagate(f0, t))
            })
            .collect();
        return Trajectory::new(kind.tag(), config.clone(), frames);
    }
    let n = single_nonlinear(kind, config.dealias);
    let (frames, warnings) = march(kind, vec![f0.clone()], config, n.as_ref())?;
    let mut traj = Trajectory::new(kind.tag(), config.clone(), frames.into_iter().map(one).collect())?;
    traj.warnings = warnings;
    Ok(traj)
}

fn one((t, mut v): (f64, Vec<RealField>)) -> (f64, RealField) {
    (t, v.swap_remove(0))
}

type Frames = Vec<(f64, Vec<RealField>)>;

fn march(
    kind: &FlowKind,
    mut u: Vec<RealField>,
    config: &SolverConfig,
    n: &Nonlinear<'_>,
) -> Result<(Frames, Vec<ResolutionWarning>)> {
    let steps = config.steps();
    let dt = config.effective_dt();
    let mut frames = vec![(0.0, u.clone())];
    let mut warnings = Vec::new();
    let mut flagged_since_frame = false;
    for i in 1..=steps {
        let t = (i - 1) as f64 * dt;
        u = if_rk4_step(kind, &u, t, dt, n)?;
        let now = i as f64 * dt;
        if !all_finite(&u) {
            return Err(StepperError::BlowUp { time: now });
        }
        if !flagged_since_frame {
            if let Some(f) = u.iter().find(|f| is_underresolved(f, config.tau_tail)) {
                warnings.push(ResolutionWarning {
                    time: now,
                    kind: "resolution".into(),
                    tail_fraction: flows::tail_fraction(f),
                });
                flagged_since_frame = true;
            }
        }
        if i % config.snapshot_stride == 0 || i == steps {
            frames.push((now, u.clone()));
            flagged_since_frame = false;
        }
    }
    Ok((frames, warnings))
}

/// Final state after `steps` fixed steps from `t0` to `t1` (either
/// direction), without storing frames.
pub fn evolve(
    kind: &FlowKind,
    f0: &RealField,
    t0: f64,
    t1: f64,
    steps: usize,
    dealias: bool,
) -> Result<RealField> {
    check_initial(kind, f0)?;
    kind.check_coverage(t0.min(t1), t0.max(t1))?;
    if steps == 0 {
        return Ok(f0.clone());
    }
    if matches!(kind, FlowKind::Airy) {
        return Ok(kind.propagate(f0, t1 - t0));
    }
    let dt = (t1 - t0) / steps as f64;
    let n = single_nonlinear(kind, dealias);
    let mut u = vec![f0.clone()];
    for i in 0..steps {
        u = if_rk4_step(kind, &u, t0 + i as f64 * dt, dt, n.as_ref())?;
        if !all_finite(&u) {
            return Err(StepperError::BlowUp {
                time: t0 + (i + 1) as f64 * dt,
            });
        }
    }
    Ok(u.swap_remove(0))
}

/// Co-evolves `φ` under the third-order flow and `v` under its
/// linearization around that same `φ`, sharing every RK stage.
pub fn integrate_linearized_pair(
    phi0: &RealField,
    v0: &RealField,
    config: &SolverConfig,
) -> Result<(Trajectory, Trajectory)> {
    config.validate()?;
    phi0.check_grid(v0)?;
    phi0.require_zero_mean()?;
    v0.require_zero_mean()?;
    let dealias = config.dealias;
    let n = move |u: &[RealField], _t: f64| -> flows::Result<Vec<RealField>> {
        let np = tbo_nonlinear(&u[0], dealias)?;
        let lin = flows::linearized_nonlinear(&u[1], &u[0], dealias)?;
        Ok(vec![np, lin])
    };
    let (frames, warnings) = march(&FlowKind::ThirdOrderBo, vec![phi0.clone(), v0.clone()], config, &n)?;
    let mut phis = Vec::with_capacity(frames.len());
    let mut vs = Vec::with_capacity(frames.len());
    for (t, mut pair) in frames {
        vs.push((t, pair.pop().expect("pair")));
        phis.push((t, pair.pop().expect("pair")));
    }
    let mut phi = Trajectory::new(FlowTag::ThirdOrderBo, config.clone(), phis)?;
    phi.warnings = warnings.clone();
    let mut v = Trajectory::new(FlowTag::LinearizedTbo, config.clone(), vs)?;
    v.warnings = warnings;
    Ok((phi, v))
}

/// Right-hand side of a flow at a given state, including the linear part.
pub fn full_rhs(kind: &FlowKind, u: &RealField, t: f64) -> Result<RealField> {
    Ok(match kind {
        FlowKind::LinearizedTbo(bg) => linearized_tbo_rhs(u, &bg.sample(t)?)?,
        FlowKind::AdjointLinearizedTbo(bg) => adjoint_linearized_rhs(u, &bg.sample(t)?)?,
        _ => {
            let lin = crate::spectral::filter(u, |xi| kind.linear_symbol(xi))?;
            &lin + &kind.nonlinear(u, t, true)?
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Order {
    /// Errors at round-off: the scheme is exact for this flow.
    Exact,
    Fitted(f64),
    /// Errors not monotone in `dt`; the fit is meaningless.
    Indeterminate,
}

impl Order {
    pub fn value(self) -> f64 {
        match self {
            Order::Exact => f64::INFINITY,
            Order::Fitted(p) => p,
            Order::Indeterminate => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub order: Order,
    /// `(dt, relative L² error at t_end)` against the reference run.
    pub table: Vec<(f64, f64)>,
    pub reference_dt: f64,
}

/// Relative error level treated as round-off by [`convergence_order`].
pub const ROUNDOFF: f64 = 1e-12;

/// Self-convergence order against a reference run at `min(dt)/8`.
pub fn convergence_order(
    kind: &FlowKind,
    f0: &RealField,
    t_end: f64,
    dt_list: &[f64],
) -> Result<Convergence> {
    if dt_list.len() < 3 {
        return Err(StepperError::Precondition(format!(
            "need at least 3 step sizes, got {}",
            dt_list.len()
        )));
    }
    let mut dts = dt_list.to_vec();
    dts.sort_by(|a, b| b.partial_cmp(a).expect("finite dt"));
    let ratio = dts[0] / dts[1];
    if dts.iter().any(|d| !(*d > 0.0))
        || dts.windows(2).any(|w| ((w[0] / w[1]) / ratio - 1.0).abs() > 1e-6)
        || ratio <= 1.0
    {
        return Err(StepperError::Precondition("step sizes must form a geometric ladder".into()));
    }
    let reference_dt = dts.last().expect("nonempty") / 8.0;
    let run = |dt: f64| -> Result<RealField> {
        let cfg = SolverConfig::new(dt, t_end, usize::MAX);
        evolve(kind, f0, 0.0, t_end, cfg.steps(), true)
    };
    let reference = run(reference_dt)?;
    let table: Vec<(f64, f64)> = dts
        .iter()
        .map(|&dt| Ok((dt, run(dt)?.rel_l2_diff(&reference))))
        .collect::<Result<_>>()?;
    let order = if table.iter().all(|(_, e)| *e <= ROUNDOFF) {
        Order::Exact
    } else if table.windows(2).any(|w| !(w[1].1 < w[0].1)) || table.iter().any(|(_, e)| *e <= 0.0)
    {
        Order::Indeterminate
    } else {
        let pts: Vec<(f64, f64)> = table.iter().map(|(d, e)| (d.ln(), e.ln())).collect();
        Order::Fitted(least_squares_slope(&pts))
    };
    Ok(Convergence {
        order,
        table,
        reference_dt,
    })
}

/// Slope of the least-squares line through `(x, y)` points.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use bo3::expcli::profiles::random_bandlimited;
use bo3::flows::FlowKind;
use bo3::normalform::{
    airy_residual, b0, band_transform, bk, bk_bilinear, bk_lin, cubic_scaling_test, gauge_phase,
    NormalFormError, SweepOptions,
};
use bo3::spectral::lp::{band_weight, below_weight, range_weight};
use bo3::spectral::{derivative, ComplexField, RealField, SpectralGrid};
use bo3::stepper::{integrate, Order, SolverConfig};

/// Trigonometric polynomial on a period-`L` domain, stored as `m -> c_m` with
/// `f(x) = Σ c_m e^{i m (2π/L) x}`.
#[derive(Clone, Default)]
struct Trig {
    dk: f64,
    c: BTreeMap<i64, Complex64>,
}

impl Trig {
    fn cos(dk: f64, m: i64) -> Self {
        let mut c = BTreeMap::new();
        c.insert(m, Complex64::new(0.5, 0.0));
        c.insert(-m, Complex64::new(0.5, 0.0));
        Trig { dk, c }
    }
    fn sum(&self, o: &Trig) -> Trig {
        let mut c = self.c.clone();
        for (m, v) in &o.c {
            *c.entry(*m).or_default() += v;
        }
        Trig { dk: self.dk, c }
    }
    fn scale(&self, a: Complex64) -> Trig {
        self.map(|_| a)
    }
    fn map(&self, w: impl Fn(f64) -> Complex64) -> Trig {
        let c = self.c.iter().map(|(m, v)| (*m, v * w(*m as f64 * self.dk))).collect();
        Trig { dk: self.dk, c }
    }
    fn conv(&self, o: &Trig) -> Trig {
        let mut c: BTreeMap<i64, Complex64> = BTreeMap::new();
        for (a, x) in &self.c {
            for (b, y) in &o.c {
                *c.entry(a + b).or_default() += x * y;
            }
        }
        Trig { dk: self.dk, c }
    }
    fn hilbert(&self) -> Trig {
        self.map(|xi| Complex64::new(0.0, if xi == 0.0 { 0.0 } else { -xi.signum() }))
    }
    fn dinv(&self) -> Trig {
        self.map(|xi| if xi == 0.0 { Complex64::new(0.0, 0.0) } else { Complex64::new(0.0, -1.0 / xi) })
    }
    fn weight(&self, w: impl Fn(f64) -> f64) -> Trig {
        self.map(|xi| Complex64::new(w(xi), 0.0))
    }
    fn eval(&self, grid: &Arc<SpectralGrid>) -> ComplexField {
        ComplexField::from_fn(grid, |x| {
            self.c
                .iter()
                .map(|(m, v)| v * Complex64::from_polar(1.0, *m as f64 * self.dk * x))
                .sum()
        })
    }
}

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(a: f64) -> Complex64 {
    Complex64::new(a, 0.0)
}

fn plus(k: u32) -> impl Fn(f64) -> f64 {
    move |xi| band_weight(k, xi) * (xi >= 0.0) as u8 as f64
}

fn oracle_bk(p: &Trig, k: u32) -> Trig {
    let ip = p.dinv();
    let t1 = p.conv(&ip).weight(plus(k)).scale(I);
    let t2 = p.hilbert().conv(&ip).weight(plus(k)).scale(c(-1.0));
    let low = p.weight(|xi| below_weight(k, xi)).dinv();
    let t3 = low.conv(&p.weight(plus(k))).scale(I * -2.0);
    t1.sum(&t2).sum(&t3).scale(c(0.25))
}

fn two_mode_grid() -> (Arc<SpectralGrid>, Trig, RealField) {
    let g = SpectralGrid::new(64, 2.0 * PI).unwrap();
    let t = Trig::cos(1.0, 3).sum(&Trig::cos(1.0, 5));
    let phi = RealField::from_fn(&g, |x| (3.0 * x).cos() + (5.0 * x).cos());
    (g, t, phi)
}

#[test]
fn bk_matches_convolution_oracle() {
    let (g, t, phi) = two_mode_grid();
    for k in 1..=4 {
        let got = bk(&phi, k).unwrap();
        let want = oracle_bk(&t, k).eval(&g);
        assert!(got.max_abs_diff(&want) < 1e-13, "k={k}: {:e}", got.max_abs_diff(&want));
    }
    // band 3 holds ξ = 8 and the result is nonzero there
    assert!(bk(&phi, 3).unwrap().sup_norm() > 0.1);
}

#[test]
fn b0_matches_convolution_oracle() {
    let g = SpectralGrid::new(64, 8.0 * PI).unwrap();
    let dk = 0.25;
    // ξ = 0.75 and ξ = 1.5
    let t = Trig::cos(dk, 3).sum(&Trig::cos(dk, 6));
    let phi = RealField::from_fn(&g, |x| (0.75 * x).cos() + (1.5 * x).cos());
    let high = t.weight(|xi| 1.0 - below_weight(1, xi)).dinv();
    let prod = high.conv(&t.hilbert()).weight(|xi| band_weight(0, xi));
    let want = prod.sum(&prod.hilbert()).scale(c(-0.25)).eval(&g);
    let got = b0(&phi).unwrap().to_complex();
    assert!(want.sup_norm() > 1e-3);
    assert!(got.max_abs_diff(&want) < 1e-13, "{:e}", got.max_abs_diff(&want));
}

#[test]
fn band_transform_single_band_oracle() {
    let g = SpectralGrid::new(64, 2.0 * PI).unwrap();
    // ξ = 5, 6 sit inside band 3 only partially; ξ = 6 is in bands 2 and 3
    let t = Trig::cos(1.0, 5).sum(&Trig::cos(1.0, 6));
    let phi = RealField::from_fn(&g, |x| (5.0 * x).cos() + (6.0 * x).cos());
    let tr = band_transform(&phi, 3).unwrap();
    let want = t.weight(plus(3)).sum(&oracle_bk(&t, 3)).eval(&g);
    assert!(tr.tilde_phi.max_abs_diff(&want) < 1e-13);
    let diff = &tr.tilde_phi - &(&tr.phi_k_plus + &tr.b_k);
    assert!(diff.sup_norm() == 0.0);
}

#[test]
fn gauge_round_trip_and_unitarity() {
    let g = SpectralGrid::new(256, 16.0 * PI).unwrap();
    for seed in 0..10 {
        let phi = random_bandlimited(&g, seed, 6.0, 0.5);
        let big_phi = gauge_phase(&phi).unwrap();
        let back = &derivative(&big_phi, 1).unwrap() * -2.0;
        assert!(back.max_abs_diff(&phi) < 1e-12);
        for k in 1..=3 {
            let tr = band_transform(&phi, k).unwrap();
            let (a, b) = (tr.psi.l2_norm(), tr.tilde_phi.l2_norm());
            assert!((a - b).abs() <= 1e-12 * b.max(1.0), "{a} {b}");
            // ψ = φ̃ e^{-iΦ_{<k}} pointwise
            for ((p, t), ph) in tr.psi.values().iter().zip(tr.tilde_phi.values()).zip(tr.phase.values()) {
                assert!((p - t * Complex64::from_polar(1.0, -ph)).norm() < 1e-15);
            }
        }
    }
}

#[test]
fn polarization_is_bilinear() {
    let g = SpectralGrid::new(128, 8.0 * PI).unwrap();
    let f = random_bandlimited(&g, 1, 6.0, 1.0);
    let h = random_bandlimited(&g, 2, 6.0, 1.0);
    let w = random_bandlimited(&g, 3, 6.0, 1.0);
    let (a, b) = (0.7, -1.3);
    for k in 1..=3 {
        let lhs = bk_bilinear(&(&(&f * a) + &(&h * b)), &w, k).unwrap();
        let rhs = &(&bk_bilinear(&f, &w, k).unwrap() * a) + &(&bk_bilinear(&h, &w, k).unwrap() * b);
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        let sym = bk_bilinear(&w, &f, k).unwrap();
        assert!(sym.max_abs_diff(&bk_bilinear(&f, &w, k).unwrap()) < 1e-14);
        let diag = bk_bilinear(&f, &f, k).unwrap();
        assert!(diag.max_abs_diff(&bk(&f, k).unwrap()) < 1e-14);
    }
}

#[test]
fn bk_lin_polarization_identity() {
    let (g, t, phi) = two_mode_grid();
    for k in 1..=4 {
        let corr = t
            .weight(|xi| range_weight(0, k, xi))
            .dinv()
            .conv(&t.weight(plus(k)))
            .scale(I * 0.5)
            .eval(&g);
        let want = &(&bk(&phi, k).unwrap() * 2.0) - &corr;
        let got = bk_lin(&phi, &phi, k).unwrap();
        assert!(got.max_abs_diff(&want) < 1e-13, "k={k}");
    }
}

#[test]
fn bk_scaling_constant_is_uniform_across_bands() {
    let g = SpectralGrid::new(2048, 32.0 * PI).unwrap();
    // C_k for ‖B_k‖ ≤ C 2^{-k/2}‖φ‖², and D_k for ‖B_k‖ ≤ D 2^{-k}‖φ‖_∞‖φ‖
    let mut c = Vec::new();
    let mut d = Vec::new();
    for k in 1..=5u32 {
        let (mut ck, mut dk): (f64, f64) = (0.0, 0.0);
        for seed in 0..8 {
            let raw = random_bandlimited(&g, 100 * k as u64 + seed, 2f64.powi(k as i32 + 1), 1.0);
            let phi = bo3::spectral::project(&raw, k).unwrap();
            let b = bk(&phi, k).unwrap().l2_norm();
            let l2 = phi.l2_norm();
            ck = ck.max(b / (2f64.powf(-(k as f64) / 2.0) * l2 * l2));
            dk = dk.max(b / (2f64.powi(-(k as i32)) * phi.sup_norm() * l2));
        }
        c.push(ck);
        d.push(dk);
    }
    // one constant serves every band
    assert!(c.iter().all(|v| *v <= 1.5 * c[0]), "{c:?}");
    let (lo, hi) = d.iter().fold((f64::MAX, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    assert!(hi / lo <= 2.0, "{d:?}");
}

fn sweep_profile() -> RealField {
    let g = SpectralGrid::new(512, 32.0 * PI).unwrap();
    let p = random_bandlimited(&g, 3, 6.0, 1.0);
    let rms = p.l2_norm() / g.length().sqrt();
    &p * (1.0 / rms)
}

const LADDER: [f64; 4] = [0.01, 0.02, 0.04, 0.08];

#[test]
fn gauged_residual_is_cubic() {
    let p = sweep_profile();
    let opts = SweepOptions::default();
    for k in 1..=3 {
        let r = cubic_scaling_test(&FlowKind::ThirdOrderBo, &p, &LADDER, k, &opts).unwrap();
        let (Order::Fitted(raw), Order::Fitted(gauged)) = (r.slope_raw, r.slope_gauged) else {
            panic!("{r:?}")
        };
        assert!((raw - 2.0).abs() <= 0.2, "k={k} raw {raw}");
        assert!((gauged - 3.0).abs() <= 0.3, "k={k} gauged {gauged}");
        assert!(gauged - raw >= 0.7);
    }
}

#[test]
fn linear_flow_has_exact_raw_residual() {
    let p = sweep_profile();
    let r = cubic_scaling_test(&FlowKind::Airy, &p, &LADDER, 2, &SweepOptions::default()).unwrap();
    assert_eq!(r.slope_raw, Order::Exact);
    // the transformation's own quadratic content remains
    assert!(matches!(r.slope_gauged, Order::Fitted(s) if (s - 2.0).abs() < 0.1));
}

#[test]
fn sweep_rejects_degenerate_ladders() {
    let p = sweep_profile();
    let o = SweepOptions::default();
    for bad in [&[0.01, 0.02, 0.04][..], &[0.01, 0.02, 0.05, 0.08], &[0.08, 0.04, 0.02, 0.01]] {
        assert!(matches!(
            cubic_scaling_test(&FlowKind::ThirdOrderBo, &p, bad, 1, &o),
            Err(NormalFormError::DegenerateFit(_))
        ));
    }
}

#[test]
fn residual_series_zero_and_refinement() {
    let g = SpectralGrid::new(128, 16.0 * PI).unwrap();
    let zero = RealField::zeros(&g);
    let traj = integrate(&FlowKind::ThirdOrderBo, &zero, &SolverConfig::new(0.01, 0.05, 1)).unwrap();
    let s = airy_residual(&traj, 1).unwrap();
    assert!(s.channel("residual_gauged").unwrap().iter().all(|v| *v == 0.0));

    let f0 = &random_bandlimited(&g, 4, 4.0, 1.0) * 0.05;
    let mut at_end = Vec::new();
    for dt in [2e-3f64, 1e-3] {
        let stride = (2e-3 / dt).round() as usize;
        let traj = integrate(&FlowKind::ThirdOrderBo, &f0, &SolverConfig::new(dt, 0.1, stride)).unwrap();
        let s = airy_residual(&traj, 2).unwrap();
        let r = s.channel("residual_gauged").unwrap();
        assert!(r.iter().all(|v| v.is_finite()));
        at_end.push(*r.last().unwrap());
    }
    assert!((at_end[0] / at_end[1] - 1.0).abs() < 1e-3, "{at_end:?}");
}

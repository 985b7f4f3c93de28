use std::f64::consts::PI;
use std::sync::Arc;

use bo3::expcli::profiles::random_bandlimited;
use bo3::spectral::lp::resolved_bands;
use bo3::spectral::product::{integral_real, product};
use bo3::spectral::{
    antiderivative, antiderivative_dropping_mean, derivative, hilbert, project, sobolev_norm,
    RealField, SpectralGrid,
};
use proptest::prelude::*;

/// Bernstein constant bound: `‖P_k f‖_∞ ≤ C 2^{k/2} ‖P_k f‖₂`. By
/// Cauchy-Schwarz over the band's frequency support, of measure `3·2^k`,
/// `C = (3/2π)^{1/2}`.
const BERNSTEIN_C: f64 = 0.690_988_298_942_670_9;
/// Commutator constant bound: `‖[P_k, f]g‖₂ ≤ C 2^{-k} ‖f_x‖_∞ ‖g‖₂`.
const COMMUTATOR_C: f64 = 1.25;

fn grid() -> Arc<SpectralGrid> {
    SpectralGrid::new(1024, 32.0 * PI).unwrap()
}

fn field(seed: u64, bandlimit: f64) -> RealField {
    random_bandlimited(&grid(), seed, bandlimit, 1.0)
}

/// Random field with a nonzero mean.
fn with_mean(seed: u64, bandlimit: f64, mean: f64) -> RealField {
    field(seed, bandlimit).map(|v| v + mean)
}

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(100)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn hilbert_is_skew_adjoint(a in 0u64..1 << 40, b in 0u64..1 << 40, bl in 1.0f64..12.0) {
        let (u, v) = (with_mean(a, bl, 0.3), with_mean(b, bl, -0.7));
        let s = integral_real(&[&u, &hilbert(&v)]).unwrap() + integral_real(&[&v, &hilbert(&u)]).unwrap();
        prop_assert!(s.abs() <= 1e-10, "{s:e}");
    }

    #[test]
    fn hilbert_preserves_pairing_on_mean_zero(a in 0u64..1 << 40, b in 0u64..1 << 40, bl in 1.0f64..12.0) {
        let (u, v) = (field(a, bl), field(b, bl));
        let lhs = integral_real(&[&hilbert(&u), &hilbert(&v)]).unwrap();
        let rhs = integral_real(&[&u, &v]).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn hilbert_convolution_identity(a in 0u64..1 << 40, b in 0u64..1 << 40, bl in 1.0f64..12.0) {
        let (u, v) = (field(a, bl), field(b, bl));
        let (hu, hv) = (hilbert(&u), hilbert(&v));
        let lhs = hilbert(&(&product(&[&u, &hv]).unwrap() + &product(&[&v, &hu]).unwrap()));
        let rhs = &product(&[&hu, &hv]).unwrap() - &product(&[&u, &v]).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10, "{:e}", lhs.max_abs_diff(&rhs));
    }

    #[test]
    fn hilbert_squared_is_minus_identity_off_the_mean(a in 0u64..1 << 40, mean in -2.0f64..2.0) {
        let f = with_mean(a, 20.0, mean);
        let hh = hilbert(&hilbert(&f));
        let expected = -&f.without_mean();
        prop_assert!(hh.max_abs_diff(&expected) <= 1e-12, "{:e}", hh.max_abs_diff(&expected));
    }

    #[test]
    fn derivative_antiderivative_round_trip(a in 0u64..1 << 40, mean in -2.0f64..2.0) {
        let f = with_mean(a, 20.0, mean);
        let back = derivative(&antiderivative_dropping_mean(&f), 1).unwrap();
        prop_assert!(back.max_abs_diff(&f.without_mean()) <= 1e-12);
        let g = field(a, 20.0);
        let again = antiderivative(&derivative(&g, 1).unwrap()).unwrap();
        prop_assert!(again.max_abs_diff(&g) <= 1e-12);
    }

    #[test]
    fn parseval(a in 0u64..1 << 40, mean in -2.0f64..2.0) {
        let f = with_mean(a, 30.0, mean);
        let quadrature = (f.values().iter().map(|v| v * v).sum::<f64>() * grid().spacing()).sqrt();
        let spectral = sobolev_norm(&f, 0.0, false).unwrap();
        prop_assert!((spectral - quadrature).abs() <= 1e-12 * quadrature);
    }

    #[test]
    fn partition_of_unity(a in 0u64..1 << 40, mean in -2.0f64..2.0) {
        let g = grid();
        let top = *resolved_bands(&g).end();
        let f = with_mean(a, 2f64.powi(top as i32), mean);
        let mut sum = RealField::zeros(&g);
        for k in resolved_bands(&g) {
            sum = &sum + &project(&f, k).unwrap();
        }
        prop_assert!(sum.max_abs_diff(&f) <= 1e-12, "{:e}", sum.max_abs_diff(&f));
    }
}

#[test]
fn bernstein_constant_value() {
    assert!((BERNSTEIN_C - (3.0 / (2.0 * PI)).sqrt()).abs() < 1e-15);
}

#[test]
fn bernstein_single_constant() {
    let g = grid();
    let mut worst: f64 = 0.0;
    for trial in 0..100u64 {
        for k in resolved_bands(&g) {
            let f = project(&field(1000 * trial + k as u64, 2f64.powi(k as i32 + 1)), k).unwrap();
            let c = f.sup_norm() / (2f64.powf(k as f64 / 2.0) * f.l2_norm());
            worst = worst.max(c);
        }
    }
    assert!(worst <= BERNSTEIN_C, "Bernstein constant {worst}");
}

#[test]
fn commutator_single_constant() {
    let g = grid();
    let top = *resolved_bands(&g).end();
    let mut worst: f64 = 0.0;
    for trial in 0..100u64 {
        for k in 3..=top {
            // low-frequency multiplier, band-k argument
            let f = field(7 * trial + 1, 2f64.powi(k as i32 - 3));
            let gk = project(&field(7 * trial + 2, 2f64.powi(k as i32 + 1)), k).unwrap();
            let pk_fg = project(&product(&[&f, &gk]).unwrap(), k).unwrap();
            let f_pkg = product(&[&f, &project(&gk, k).unwrap()]).unwrap();
            let comm = (&pk_fg - &f_pkg).l2_norm();
            let fx = derivative(&f, 1).unwrap().sup_norm();
            worst = worst.max(comm / (2f64.powi(-(k as i32)) * fx * gk.l2_norm()));
        }
    }
    assert!(worst <= COMMUTATOR_C, "commutator constant {worst}");
}

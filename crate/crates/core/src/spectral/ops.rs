use num_complex::Complex64;

use super::{ComplexField, Field, Result, Scalar, SpectralError};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Whether a symbol keeps the Nyquist coefficient. The coefficient at `-πn/L`
/// also stands for `+πn/L`, so it survives only when the symbol takes the
/// same real value at both.
fn keeps_nyquist(at_minus: Complex64, at_plus: Complex64) -> bool {
    let scale = at_minus.norm().max(at_plus.norm()).max(1.0);
    at_minus.im.abs() <= 1e-14 * scale
        && at_plus.im.abs() <= 1e-14 * scale
        && (at_minus - at_plus).norm() <= 1e-14 * scale
}

fn multiplied_spectrum<T: Scalar>(
    f: &Field<T>,
    symbol: impl Fn(f64) -> Complex64,
) -> Result<Vec<Complex64>> {
    let grid = f.grid();
    let xi = grid.wavenumbers();
    let nyq = grid.nyquist_index();
    let mut out = f.spectrum().to_vec();
    for (m, c) in out.iter_mut().enumerate() {
        let s = symbol(xi[m]);
        if !(s.re.is_finite() && s.im.is_finite()) {
            return Err(SpectralError::NonFiniteSymbol { xi: xi[m] });
        }
        if m == nyq {
            let plus = symbol(-xi[m]);
            if !(plus.re.is_finite() && plus.im.is_finite()) {
                return Err(SpectralError::NonFiniteSymbol { xi: -xi[m] });
            }
            if !keeps_nyquist(s, plus) {
                *c = Complex64::new(0.0, 0.0);
                continue;
            }
        }
        *c *= s;
    }
    Ok(out)
}

/// Fourier multiplier `m(ξ)` applied to any field, producing a complex field.
pub fn apply_symbol<T: Scalar>(
    f: &Field<T>,
    symbol: impl Fn(f64) -> Complex64,
) -> Result<ComplexField> {
    let spec = multiplied_spectrum(f, symbol)?;
    Ok(ComplexField::from_spectrum(f.grid(), spec))
}

/// Fourier multiplier that keeps the sample type. On real fields the symbol
/// must satisfy `m(-ξ) = conj m(ξ)`; any anti-Hermitian part is discarded.
pub fn filter<T: Scalar>(f: &Field<T>, symbol: impl Fn(f64) -> Complex64) -> Result<Field<T>> {
    let spec = multiplied_spectrum(f, symbol)?;
    Ok(Field::from_spectrum(f.grid(), spec))
}

fn sgn(xi: f64) -> f64 {
    if xi > 0.0 {
        1.0
    } else if xi < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Hilbert transform, symbol `-i sgn ξ`.
pub fn hilbert<T: Scalar>(f: &Field<T>) -> Field<T> {
    filter(f, |xi| -I * sgn(xi)).expect("Hilbert symbol is finite")
}

/// `∂ₓ^order` for `order` in `1..=4`.
pub fn derivative<T: Scalar>(f: &Field<T>, order: u32) -> Result<Field<T>> {
    if !(1..=4).contains(&order) {
        return Err(SpectralError::BadOrder(order));
    }
    filter(f, |xi| (I * xi).powu(order))
}

/// `∂ₓ^{-1}` on mean-zero fields; the zero mode of the result is 0.
pub fn antiderivative<T: Scalar>(f: &Field<T>) -> Result<Field<T>> {
    f.require_zero_mean()?;
    Ok(antiderivative_dropping_mean(f))
}

/// `∂ₓ^{-1}` after discarding the zero mode, for inputs whose zero mode has
/// already been projected away or is irrelevant.
pub fn antiderivative_dropping_mean<T: Scalar>(f: &Field<T>) -> Field<T> {
    filter(f, |xi| {
        if xi == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            1.0 / (I * xi)
        }
    })
    .expect("antiderivative symbol is finite off the zero mode")
}

/// `|D|^s` with the zero mode annihilated.
pub fn abs_d_power<T: Scalar>(f: &Field<T>, s: f64) -> Field<T> {
    filter(f, |xi| {
        if xi == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(xi.abs().powf(s), 0.0)
        }
    })
    .expect("|D|^s symbol is finite off the zero mode")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{RealField, SpectralGrid};
    use std::f64::consts::PI;

    fn grid() -> std::sync::Arc<SpectralGrid> {
        SpectralGrid::new(32, 2.0 * PI).unwrap()
    }

    #[test]
    fn identity_symbol() {
        let g = grid();
        let f = RealField::from_fn(&g, |x| (x.sin()).exp());
        let out = apply_symbol(&f, |_| Complex64::new(1.0, 0.0)).unwrap();
        assert!(out.re().max_abs_diff(&f) < 1e-14);
        assert!(out.im().sup_norm() < 1e-14);
    }

    #[test]
    fn derivative_symbol_on_sine() {
        let g = grid();
        let f = RealField::from_fn(&g, f64::sin);
        let out = apply_symbol(&f, |xi| I * xi).unwrap();
        assert!(out.re().max_abs_diff(&RealField::from_fn(&g, f64::cos)) < 1e-13);
    }

    #[test]
    fn half_derivative_on_cos2x_matches_direct_dft() {
        // oracle: naive DFT of the samples, multiply, naive inverse
        let g = grid();
        let n = g.n();
        let f = RealField::from_fn(&g, |x| (2.0 * x).cos());
        let out = apply_symbol(&f, |xi| Complex64::new(xi.abs().sqrt(), 0.0)).unwrap();
        let xs = g.coordinates();
        let mut oracle = vec![Complex64::new(0.0, 0.0); n];
        for m in 0..n {
            let mode = g.mode(m) as f64;
            let c: Complex64 = (0..n)
                .map(|j| f.values()[j] * Complex64::from_polar(1.0, -mode * xs[j]))
                .sum::<Complex64>()
                / n as f64;
            for (j, o) in oracle.iter_mut().enumerate() {
                *o += c * mode.abs().sqrt() * Complex64::from_polar(1.0, mode * xs[j]);
            }
        }
        for j in 0..n {
            assert!((out.values()[j] - oracle[j]).norm() < 1e-12);
            let closed = 2f64.sqrt() * (2.0 * xs[j]).cos();
            assert!((out.values()[j].re - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_symbol_is_rejected() {
        let f = RealField::from_fn(&grid(), f64::sin);
        let err = apply_symbol(&f, |xi| Complex64::new(1.0 / xi, 0.0)).unwrap_err();
        assert_eq!(err, SpectralError::NonFiniteSymbol { xi: 0.0 });
    }

    #[test]
    fn hilbert_single_modes() {
        let g = grid();
        for k in 1..6 {
            let k = k as f64;
            let c = RealField::from_fn(&g, |x| (k * x).cos());
            let s = RealField::from_fn(&g, |x| (k * x).sin());
            assert!(hilbert(&c).max_abs_diff(&s) < 1e-13);
            assert!(hilbert(&s).max_abs_diff(&(&c * -1.0)) < 1e-13);
        }
        let constant = RealField::from_fn(&g, |_| 3.5);
        assert!(hilbert(&constant).sup_norm() < 1e-15);
    }

    #[test]
    fn derivative_examples() {
        let g = grid();
        let s = RealField::from_fn(&g, f64::sin);
        let d3 = derivative(&s, 3).unwrap();
        assert!(d3.max_abs_diff(&RealField::from_fn(&g, |x| -x.cos())) < 1e-12);
        let c2 = RealField::from_fn(&g, |x| (2.0 * x).cos());
        let d2 = derivative(&c2, 2).unwrap();
        assert!(d2.max_abs_diff(&RealField::from_fn(&g, |x| -4.0 * (2.0 * x).cos())) < 1e-12);
        let k = RealField::from_fn(&g, |_| 2.0);
        for order in 1..=4 {
            assert!(derivative(&k, order).unwrap().sup_norm() < 1e-14);
        }
        assert_eq!(derivative(&s, 0).unwrap_err(), SpectralError::BadOrder(0));
        assert_eq!(derivative(&s, 5).unwrap_err(), SpectralError::BadOrder(5));
    }

    #[test]
    fn odd_symbols_zero_nyquist() {
        let g = SpectralGrid::new(8, 2.0 * PI).unwrap();
        let f = RealField::from_fn(&g, |x| (4.0 * x).cos());
        assert!(f.sup_norm() > 0.9);
        assert!(derivative(&f, 1).unwrap().sup_norm() < 1e-14);
        assert!(hilbert(&f).sup_norm() < 1e-14);
        // even real symbols keep it
        let d2 = derivative(&f, 2).unwrap();
        assert!(d2.max_abs_diff(&(&f * -16.0)) < 1e-12);
    }

    #[test]
    fn antiderivative_examples() {
        let g = grid();
        let s = RealField::from_fn(&g, f64::sin);
        let a = antiderivative(&s).unwrap();
        assert!(a.max_abs_diff(&RealField::from_fn(&g, |x| -x.cos())) < 1e-13);
        let c3 = RealField::from_fn(&g, |x| (3.0 * x).cos());
        let a3 = antiderivative(&c3).unwrap();
        assert!(a3.max_abs_diff(&RealField::from_fn(&g, |x| (3.0 * x).sin() / 3.0)) < 1e-13);
        let shifted = RealField::from_fn(&g, |x| 1.0 + x.sin());
        assert!(matches!(
            antiderivative(&shifted),
            Err(SpectralError::NonzeroMean { .. })
        ));
    }
}

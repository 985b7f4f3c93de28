//! Alias-free products of fields.
//!
//! Factors are zero-padded to `2n` points, multiplied pointwise and
//! truncated back to the resolved modes `|m| < n/2`. With factors limited
//! to `|m| < n/2`, any product of up to three factors is computed exactly on
//! the kept modes, and the integral of any product of up to four factors
//! is exact. Nyquist coefficients of the factors are dropped.

use num_complex::Complex64;

use super::{ComplexField, Field, RealField, Result, Scalar, SpectralError};

pub const MAX_PRODUCT_FACTORS: usize = 3;
pub const MAX_INTEGRAL_FACTORS: usize = 4;

fn check_factors<T: Scalar>(factors: &[&Field<T>], max: usize) -> Result<()> {
    if factors.is_empty() || factors.len() > max {
        return Err(SpectralError::FactorCount {
            max,
            got: factors.len(),
        });
    }
    for f in &factors[1..] {
        factors[0].check_grid(*f)?;
    }
    Ok(())
}

/// Samples of a field on the `2n` padded grid.
fn padded_values<T: Scalar>(f: &Field<T>) -> Vec<Complex64> {
    let grid = f.grid();
    let n = grid.n();
    let spec = f.spectrum();
    let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
    let scale = 1.0 / n as f64;
    for m in 0..n / 2 {
        buf[m] = spec[m] * scale;
    }
    for m in n / 2 + 1..n {
        buf[m + n] = spec[m] * scale;
    }
    grid.ifft_padded(&mut buf);
    buf
}

fn padded_pointwise<T: Scalar>(factors: &[&Field<T>]) -> Vec<Complex64> {
    let mut acc = padded_values(factors[0]);
    for f in &factors[1..] {
        let other = padded_values(*f);
        for (a, b) in acc.iter_mut().zip(other) {
            *a *= b;
        }
    }
    acc
}

fn truncated_spectrum(grid: &super::SpectralGrid, mut padded: Vec<Complex64>) -> Vec<Complex64> {
    let n = grid.n();
    grid.fft_padded(&mut padded);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for m in 0..n / 2 {
        out[m] = padded[m] * 0.5;
    }
    for m in n / 2 + 1..n {
        out[m] = padded[m + n] * 0.5;
    }
    out
}

/// Exact product of one to three fields, truncated to the grid's modes.
pub fn product<T: Scalar>(factors: &[&Field<T>]) -> Result<Field<T>> {
    check_factors(factors, MAX_PRODUCT_FACTORS)?;
    let grid = factors[0].grid();
    let spec = truncated_spectrum(grid, padded_pointwise(factors));
    Ok(Field::from_spectrum(grid, spec))
}

/// Exact product of real and complex factors.
pub fn product_mixed(real: &[&RealField], complex: &[&ComplexField]) -> Result<ComplexField> {
    let promoted: Vec<ComplexField> = real.iter().map(|f| f.to_complex()).collect();
    let mut all: Vec<&ComplexField> = promoted.iter().collect();
    all.extend_from_slice(complex);
    product(&all)
}

pub fn square(f: &RealField) -> RealField {
    product(&[f, f]).expect("single-grid square")
}

/// Sum of exact products, padded once: `Σ coeff · Π factors`.
pub fn sum_of_products(terms: &[(f64, &[&RealField])]) -> Result<RealField> {
    let first = terms
        .first()
        .and_then(|(_, fs)| fs.first())
        .ok_or(SpectralError::FactorCount {
            max: MAX_PRODUCT_FACTORS,
            got: 0,
        })?;
    let grid = first.grid();
    let mut acc = vec![Complex64::new(0.0, 0.0); 2 * grid.n()];
    for (coeff, factors) in terms {
        check_factors(factors, MAX_PRODUCT_FACTORS)?;
        first.check_grid(factors[0])?;
        for (a, b) in acc.iter_mut().zip(padded_pointwise(factors)) {
            *a += b * *coeff;
        }
    }
    let spec = truncated_spectrum(grid, acc);
    Ok(RealField::from_spectrum(grid, spec))
}

/// `∫ Π factors dx` over one period, exact for up to four factors.
pub fn integral_of_product<T: Scalar>(factors: &[&Field<T>]) -> Result<Complex64> {
    check_factors(factors, MAX_INTEGRAL_FACTORS)?;
    let grid = factors[0].grid();
    let vals = padded_pointwise(factors);
    Ok(vals.iter().sum::<Complex64>() * (grid.length() / (2 * grid.n()) as f64))
}

/// Real-valued `∫ Π factors dx` for real factors.
pub fn integral_real(factors: &[&RealField]) -> Result<f64> {
    integral_of_product(factors).map(|c| c.re)
}

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use super::{Result, SpectralError, SpectralGrid};

/// Sample type of a [`Field`]: `f64` or `Complex64`.
pub trait Scalar: Copy + Debug + Send + Sync + Default + 'static {
    const IS_REAL: bool;
    fn to_complex(self) -> Complex64;
    fn from_complex(c: Complex64) -> Self;
    fn modulus_sq(self) -> f64;
}

impl Scalar for f64 {
    const IS_REAL: bool = true;
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn from_complex(c: Complex64) -> Self {
        c.re
    }
    fn modulus_sq(self) -> f64 {
        self * self
    }
}

impl Scalar for Complex64 {
    const IS_REAL: bool = false;
    fn to_complex(self) -> Complex64 {
        self
    }
    fn from_complex(c: Complex64) -> Self {
        c
    }
    fn modulus_sq(self) -> f64 {
        self.norm_sqr()
    }
}

/// Grid function with a lazily computed, thread-safe spectrum cache.
///
/// Fields are immutable; every operation builds a new one.
#[derive(Clone)]
pub struct Field<T: Scalar> {
    grid: Arc<SpectralGrid>,
    values: Vec<T>,
    spectrum: OnceLock<Vec<Complex64>>,
}

pub type RealField = Field<f64>;
pub type ComplexField = Field<Complex64>;

impl<T: Scalar> Debug for Field<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("values", &self.values)
            .finish()
    }
}

impl<T: Scalar> Field<T> {
    pub fn new(grid: Arc<SpectralGrid>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.n(),
                got: values.len(),
            });
        }
        Ok(Field {
            grid,
            values,
            spectrum: OnceLock::new(),
        })
    }

    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        Field {
            values: vec![T::default(); grid.n()],
            grid: Arc::clone(grid),
            spectrum: OnceLock::new(),
        }
    }

    /// Samples `f` at the centered grid coordinates.
    pub fn from_fn(grid: &Arc<SpectralGrid>, f: impl Fn(f64) -> T) -> Self {
        Field {
            values: (0..grid.n()).map(|j| f(grid.x(j))).collect(),
            grid: Arc::clone(grid),
            spectrum: OnceLock::new(),
        }
    }

    /// Builds a field from unnormalized DFT coefficients. For real fields
    /// the coefficients are first projected onto the Hermitian subspace,
    /// which is exactly the spectrum of the real part of the inverse.
    pub fn from_spectrum(grid: &Arc<SpectralGrid>, mut spectrum: Vec<Complex64>) -> Self {
        let n = grid.n();
        assert_eq!(spectrum.len(), n, "spectrum length must match grid");
        if T::IS_REAL {
            hermitian_part(&mut spectrum);
        }
        let mut buf = spectrum.clone();
        grid.ifft(&mut buf);
        let scale = 1.0 / n as f64;
        let values = buf.into_iter().map(|c| T::from_complex(c * scale)).collect();
        let cache = OnceLock::new();
        let _ = cache.set(spectrum);
        Field {
            grid: Arc::clone(grid),
            values,
            spectrum: cache,
        }
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Unnormalized DFT of the samples (computed once).
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| {
            let mut buf: Vec<Complex64> = self.values.iter().map(|v| v.to_complex()).collect();
            self.grid.fft(&mut buf);
            buf
        })
    }

    pub fn same_grid<U: Scalar>(&self, other: &Field<U>) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_as(&other.grid)
    }

    pub fn check_grid<U: Scalar>(&self, other: &Field<U>) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(SpectralError::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
            spectrum: OnceLock::new(),
        }
    }

    /// Pointwise combination of two fields on the same grid. The product of
    /// two fields computed this way is aliased; use
    /// [`product`](super::product) for spectrally exact products.
    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Field {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            spectrum: OnceLock::new(),
        })
    }

    pub fn to_complex(&self) -> ComplexField {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| v.to_complex()).collect(),
            spectrum: self.spectrum.clone(),
        }
    }

    /// Continuum L² norm over one period, by quadrature with weight L/n.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.spacing() * self.values.iter().map(|v| v.modulus_sq()).sum::<f64>()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.modulus_sq().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn mean(&self) -> Complex64 {
        self.values
            .iter()
            .map(|v| v.to_complex())
            .sum::<Complex64>()
            / self.len() as f64
    }

    /// Zero-mode tolerance for this field.
    pub fn mean_tolerance(&self) -> f64 {
        super::TAU_MEAN * self.l2_norm()
    }

    pub fn has_zero_mean(&self) -> bool {
        self.mean().norm() <= self.mean_tolerance()
    }

    pub fn require_zero_mean(&self) -> Result<()> {
        let mean = self.mean().norm();
        let tolerance = self.mean_tolerance();
        if mean <= tolerance {
            Ok(())
        } else {
            Err(SpectralError::NonzeroMean { mean, tolerance })
        }
    }

    /// The field minus its mean.
    pub fn without_mean(&self) -> Self {
        let mut spec = self.spectrum().to_vec();
        spec[0] = Complex64::new(0.0, 0.0);
        Field::from_spectrum(&self.grid, spec)
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| T::from_complex(v.to_complex() * a))
    }

    /// Largest absolute sample difference against another field.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a.to_complex() - b.to_complex()).norm())
            .fold(0.0, f64::max)
    }

    /// Relative L² distance `‖self - other‖ / ‖other‖` (absolute when
    /// `other` vanishes).
    pub fn rel_l2_diff(&self, other: &Self) -> f64 {
        let diff: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a.to_complex() - b.to_complex()).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let base: f64 = other
            .values
            .iter()
            .map(|b| b.modulus_sq())
            .sum::<f64>()
            .sqrt();
        if base > 0.0 {
            diff / base
        } else {
            diff
        }
    }
}

impl RealField {
    /// Integral over one period.
    pub fn integral(&self) -> f64 {
        self.grid.spacing() * self.values.iter().sum::<f64>()
    }

    /// `∫ self · other` by quadrature. Exact for bandlimited fields whose
    /// product has no content at the Nyquist alias.
    pub fn inner(&self, other: &RealField) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self.grid.spacing()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>())
    }
}

impl ComplexField {
    pub fn re(&self) -> RealField {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|c| c.re).collect(),
            spectrum: OnceLock::new(),
        }
    }

    pub fn im(&self) -> RealField {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|c| c.im).collect(),
            spectrum: OnceLock::new(),
        }
    }
}

fn hermitian_part(spec: &mut [Complex64]) {
    let n = spec.len();
    spec[0] = Complex64::new(spec[0].re, 0.0);
    spec[n / 2] = Complex64::new(spec[n / 2].re, 0.0);
    for m in 1..n / 2 {
        let a = spec[m];
        let b = spec[n - m];
        let sym = (a + b.conj()) * 0.5;
        spec[m] = sym;
        spec[n - m] = sym.conj();
    }
}

impl<T: Scalar> Add for &Field<T> {
    type Output = Field<T>;
    fn add(self, rhs: Self) -> Field<T> {
        self.zip_with(rhs, |a, b| T::from_complex(a.to_complex() + b.to_complex()))
            .expect("grid mismatch in field addition")
    }
}

impl<T: Scalar> Sub for &Field<T> {
    type Output = Field<T>;
    fn sub(self, rhs: Self) -> Field<T> {
        self.zip_with(rhs, |a, b| T::from_complex(a.to_complex() - b.to_complex()))
            .expect("grid mismatch in field subtraction")
    }
}

impl<T: Scalar> Neg for &Field<T> {
    type Output = Field<T>;
    fn neg(self) -> Field<T> {
        self.scale(-1.0)
    }
}

impl<T: Scalar> Mul<f64> for &Field<T> {
    type Output = Field<T>;
    fn mul(self, rhs: f64) -> Field<T> {
        self.scale(rhs)
    }
}

impl Mul<Complex64> for &ComplexField {
    type Output = ComplexField;
    fn mul(self, rhs: Complex64) -> ComplexField {
        self.map(|v| v * rhs)
    }
}

use super::{Field, Result, Scalar, SpectralError};

/// `H^s` (or `Ḣ^s` when `homogeneous`) norm by Plancherel, normalized so that
/// `s = 0` gives the continuum L² norm over one period.
///
/// The homogeneous weight `|ξ|^s` does not see the zero mode; for `s <= 0`
/// a nonzero mean is an error rather than silently dropped.
pub fn sobolev_norm<T: Scalar>(f: &Field<T>, s: f64, homogeneous: bool) -> Result<f64> {
    if homogeneous && s <= 0.0 {
        let mean = f.mean().norm();
        let tolerance = f.mean_tolerance();
        if mean > tolerance {
            return Err(SpectralError::NonzeroMean { mean, tolerance });
        }
    }
    let grid = f.grid();
    let n = grid.n() as f64;
    let total: f64 = f
        .spectrum()
        .iter()
        .zip(grid.wavenumbers())
        .map(|(c, &xi)| {
            let w = if homogeneous {
                if xi == 0.0 {
                    return 0.0;
                }
                xi.abs().powf(2.0 * s)
            } else {
                (1.0 + xi * xi).powf(s)
            };
            w * c.norm_sqr()
        })
        .sum();
    Ok((grid.length() / (n * n) * total).sqrt())
}

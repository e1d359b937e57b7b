//! Proximal operators and SVD helpers shared by the solvers.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Elementwise shrinkage `sgn(x) * max(|x| - a, 0)`, the proximal operator of
/// `a * ||X||_1`.
pub fn soft_threshold(x: &DMatrix<f64>, a: f64) -> Result<DMatrix<f64>> {
    if !(a >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be >= 0, got {a}")));
    }
    Ok(x.map(|v| shrink(v, a)))
}

#[inline]
pub(crate) fn shrink(v: f64, a: f64) -> f64 {
    if v > a {
        v - a
    } else if v < -a {
        v + a
    } else {
        0.0
    }
}

/// Shrinks every singular value of `x` by `a`, truncating at zero: the
/// proximal operator of `a * ||X||_*`.
pub fn singular_value_threshold(x: &DMatrix<f64>, a: f64) -> Result<DMatrix<f64>> {
    Ok(svt_with_spectrum(x, a)?.0)
}

/// Like [`singular_value_threshold`], also returning the thresholded
/// singular values in non-increasing order.
pub(crate) fn svt_with_spectrum(x: &DMatrix<f64>, a: f64) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if !(a >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be >= 0, got {a}")));
    }
    let svd = Svd::full(x)?;
    let kept: Vec<f64> = svd.values.iter().map(|&s| (s - a).max(0.0)).collect();
    let r = kept.iter().take_while(|&&s| s > 0.0).count();
    let (m, n) = x.shape();
    if r == 0 {
        return Ok((DMatrix::zeros(m, n), kept));
    }
    let mut us = svd.u.columns(0, r).into_owned();
    for (j, mut col) in us.column_iter_mut().enumerate() {
        col *= kept[j];
    }
    let out = &us * svd.v_t.rows(0, r);
    Ok((out, kept))
}

/// Thin SVD with singular values sorted in non-increasing order.
pub(crate) struct Svd {
    pub u: DMatrix<f64>,
    pub values: Vec<f64>,
    /// Empty (0 x 0) when right vectors were not requested.
    pub v_t: DMatrix<f64>,
}

impl Svd {
    pub fn full(x: &DMatrix<f64>) -> Result<Self> {
        Self::compute(x, true)
    }

    pub fn left(x: &DMatrix<f64>) -> Result<Self> {
        Self::compute(x, false)
    }

    fn compute(x: &DMatrix<f64>, want_v: bool) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let (m, n) = x.shape();
        let k = m.min(n);
        if k == 0 {
            return Ok(Svd {
                u: DMatrix::identity(m, k),
                values: Vec::new(),
                v_t: DMatrix::zeros(k, n),
            });
        }
        let svd = x
            .clone()
            .try_svd(true, want_v, f64::EPSILON, 0)
            .ok_or_else(|| Error::InvalidArgument("SVD did not converge".into()))?;
        let u = svd.u.expect("u requested");
        let mut order: Vec<usize> = (0..k).collect();
        // stable sort keeps the solver's order among equal values
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let values = order.iter().map(|&i| svd.singular_values[i]).collect();
        let u = DMatrix::from_fn(m, k, |r, c| u[(r, order[c])]);
        let v_t = match svd.v_t {
            Some(v_t) if want_v => DMatrix::from_fn(k, n, |r, c| v_t[(order[r], c)]),
            _ => DMatrix::zeros(0, 0),
        };
        Ok(Svd { u, values, v_t })
    }
}

/// Largest singular value (spectral norm).
pub(crate) fn spectral_norm(x: &DMatrix<f64>) -> Result<f64> {
    if x.is_empty() {
        return Ok(0.0);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let svd = x
        .clone()
        .try_svd_unordered(false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::InvalidArgument("SVD did not converge".into()))?;
    Ok(svd.singular_values.max())
}

/// Flips each column so that its largest-magnitude entry is positive.
/// Ties go to the lowest row index.
pub(crate) fn fix_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

/// Re-orthonormalises the columns of `m` with a thin QR factorisation,
/// preserving each column's orientation.
pub(crate) fn reorthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return m.clone();
    }
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn shrink_example() {
        let x = DMatrix::from_row_slice(1, 3, &[2.5, -0.3, 0.0]);
        let y = soft_threshold(&x, 1.0).unwrap();
        assert_eq!(y.as_slice(), &[1.5, 0.0, 0.0]);
        assert_eq!(soft_threshold(&x, 0.0).unwrap(), x);
        assert!(soft_threshold(&x, -1.0).is_err());
    }

    #[test]
    fn svt_on_diagonal() {
        let x = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0]));
        let y = singular_value_threshold(&x, 2.0).unwrap();
        assert_abs_diff_eq!(y, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]), epsilon = 1e-12);
    }

    #[test]
    fn svt_zero_threshold_is_identity() {
        let x = DMatrix::from_fn(4, 7, |i, j| ((i * 7 + j) as f64).sin());
        let y = singular_value_threshold(&x, 0.0).unwrap();
        assert_abs_diff_eq!(y, x, epsilon = 1e-10);
    }

    #[test]
    fn svt_rejects_non_finite() {
        let mut x = DMatrix::zeros(2, 2);
        x[(0, 1)] = f64::NAN;
        assert!(matches!(singular_value_threshold(&x, 1.0), Err(Error::NonFinite)));
    }

    #[test]
    fn svd_values_are_sorted() {
        let x = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 5.0, 3.0]));
        let svd = Svd::full(&x).unwrap();
        assert_eq!(svd.values, vec![5.0, 3.0, 1.0]);
        assert_abs_diff_eq!(svd.u[(1, 0)].abs(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sign_convention() {
        let mut m = DMatrix::from_column_slice(3, 2, &[0.1, -0.9, 0.2, 0.5, 0.5, -0.1]);
        fix_signs(&mut m);
        assert_eq!(m.column(0).as_slice(), &[-0.1, 0.9, -0.2]);
        assert_eq!(m.column(1).as_slice(), &[0.5, 0.5, -0.1]);
    }
}

//! Real embedding of complex relay-domain quantities.
//!
//! `w = a + ib` becomes `x = [a; b]`, a Hermitian `Q = A + iB` becomes
//! `[[A, -B], [B, A]]` so that `x^T Q~ x = w^H Q w`, and a linear functional
//! `f^T w` becomes the pair of rows giving its real and imaginary parts.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;

pub fn lift_vector(w: &DVector<Complex64>) -> DVector<f64> {
    let r = w.len();
    DVector::from_fn(2 * r, |i, _| if i < r { w[i].re } else { w[i - r].im })
}

pub fn unlift_vector(x: &[f64]) -> DVector<Complex64> {
    let r = x.len() / 2;
    DVector::from_fn(r, |i, _| Complex64::new(x[i], x[i + r]))
}

pub fn lift_hermitian(q: &DMatrix<Complex64>) -> Result<DMatrix<f64>> {
    let r = q.nrows();
    if q.ncols() != r {
        return Err(Error::dims("Hermitian form", format!("{r}x{r}"), format!("{}x{}", r, q.ncols())));
    }
    let scale = q.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut asym = 0.0f64;
    for i in 0..r {
        for j in 0..r {
            asym = asym.max((q[(i, j)] - q[(j, i)].conj()).norm());
        }
    }
    if asym > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    Ok(DMatrix::from_fn(2 * r, 2 * r, |i, j| {
        let (bi, bj) = (i / r, j / r);
        let (a, b) = (i % r, j % r);
        // symmetrized parts
        let re = 0.5 * (q[(a, b)].re + q[(b, a)].re);
        let im = 0.5 * (q[(a, b)].im - q[(b, a)].im);
        match (bi, bj) {
            (0, 0) | (1, 1) => re,
            (0, 1) => -im,
            _ => im,
        }
    }))
}

/// Rows `(p, q)` with `p x = Re(f^T w)` and `q x = Im(f^T w)`.
pub fn lift_functional(f: &DVector<Complex64>) -> (RowDVector<f64>, RowDVector<f64>) {
    let r = f.len();
    let re = RowDVector::from_fn(2 * r, |_, i| if i < r { f[i].re } else { -f[i - r].im });
    let im = RowDVector::from_fn(2 * r, |_, i| if i < r { f[i].im } else { f[i - r].re });
    (re, im)
}

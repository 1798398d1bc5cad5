//! Internal SVD-based least-squares helpers shared by the regression and
//! decomposition modules.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{c64, JobSvd, SVDDC};

use crate::error::{Error, Result};

/// Relative singular-value cutoff for pseudo-inversion: singular values
/// below `RCOND * sigma_max` are treated as zero.
pub const RCOND: f64 = 1e-12;

/// Owned copy with guaranteed row-major strides. Slices of unit extent can
/// carry zero strides through `to_owned`, which the LAPACK bindings reject.
pub fn dense_copy(a: ArrayView2<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn(a.dim(), |(i, j)| a[(i, j)])
}

fn dense_transpose(a: ArrayView2<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.ncols(), a.nrows()), |(i, j)| a[(j, i)])
}

fn svddc_checked(a: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    let (u, s, vt) = a.svddc(JobSvd::Some)?;
    let u = u.ok_or_else(|| Error::Linalg("svd did not return U".into()))?;
    let vt = vt.ok_or_else(|| Error::Linalg("svd did not return V^T".into()))?;
    Ok((u, s, vt))
}

/// Economy SVD of a real matrix: `a = u * diag(s) * vt` with
/// `u: (r, k)`, `s: (k,)`, `vt: (k, c)` and `k = min(r, c)`.
///
/// Wide inputs are factored through their tall transpose: the backend's
/// divide-and-conquer routine returns non-orthogonal right vectors for some
/// wide row-major matrices, while the tall path is reliable.
pub fn economy_svd(a: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    let (rows, cols) = a.dim();
    if cols > rows {
        let at = dense_transpose(a);
        let (u_t, s, vt_t) = svddc_checked(at.view())?;
        // a^T = U_t S V_t^T  =>  a = V_t^T^T ... a = (V_t) S (U_t)^T
        let u = dense_transpose(vt_t.view());
        let vt = dense_transpose(u_t.view());
        Ok((u, s, vt))
    } else {
        let standard = a.strides() == [cols as isize, 1];
        let owned;
        let source = if standard {
            a
        } else {
            owned = dense_copy(a);
            owned.view()
        };
        svddc_checked(source)
    }
}

/// Number of singular values above the relative cutoff.
pub fn numeric_rank(s: &Array1<f64>) -> usize {
    let smax = s.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > RCOND * smax).count()
}

/// Minimum-norm least-squares solution of `targets ~= coeffs * a`, row by row,
/// via the SVD pseudo-inverse of `a` (p x m). `targets` is (n, m); the result
/// is (n, p).
pub fn lstsq_rows(a: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if a.ncols() != targets.ncols() {
        return Err(Error::Shape(format!(
            "column mismatch: matrix has {} columns, targets have {}",
            a.ncols(),
            targets.ncols()
        )));
    }
    let (u, s, vt) = economy_svd(a)?;
    let rank = numeric_rank(&s);
    if rank == 0 {
        return Ok(Array2::zeros((targets.nrows(), a.nrows())));
    }
    // coeffs = targets * pinv(a) = targets * vt^T[:, :rank] * diag(1/s) * u^T[:, :rank]
    let vt_r = vt.slice(ndarray::s![..rank, ..]);
    let u_r = u.slice(ndarray::s![.., ..rank]);
    let mut proj = targets.dot(&vt_r.t()); // (n, rank)
    for (j, mut col) in proj.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|v| v / s[j]);
    }
    Ok(proj.dot(&u_r.t()))
}

/// Minimum-norm least squares for a complex system `a * x = b` (tall or wide),
/// used to project initial conditions onto decomposition modes.
pub fn lstsq_complex(a: ArrayView2<'_, c64>, b: &Array1<c64>) -> Result<Array1<c64>> {
    if a.nrows() != b.len() {
        return Err(Error::Shape(format!(
            "row mismatch: matrix has {} rows, vector has {}",
            a.nrows(),
            b.len()
        )));
    }
    let (u, s, vt) = a.svddc(JobSvd::Some)?;
    let u = u.ok_or_else(|| Error::Linalg("svd did not return U".into()))?;
    let vt = vt.ok_or_else(|| Error::Linalg("svd did not return V^T".into()))?;
    let smax = s.iter().cloned().fold(0.0_f64, f64::max);
    let rank = s.iter().filter(|&&v| v > RCOND * smax).count();
    let mut proj = Array1::<c64>::zeros(rank);
    for j in 0..rank {
        let mut acc = c64::new(0.0, 0.0);
        for i in 0..a.nrows() {
            acc += u[(i, j)].conj() * b[i];
        }
        proj[j] = acc / s[j];
    }
    let mut x = Array1::<c64>::zeros(a.ncols());
    for j in 0..rank {
        for k in 0..a.ncols() {
            x[k] += vt[(j, k)].conj() * proj[j];
        }
    }
    Ok(x)
}

pub fn all_finite(values: impl IntoIterator<Item = f64>) -> bool {
    values.into_iter().all(f64::is_finite)
}

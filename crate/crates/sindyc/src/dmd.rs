//! Dynamic mode decomposition of snapshot pairs, with and without inputs.
//!
//! The plain decomposition follows the standard economy-SVD algorithm:
//! factor the current snapshots, project the one-step regression operator
//! onto the singular basis, eigendecompose the reduced operator, and lift
//! the eigenvectors back through the shifted snapshots. The controlled
//! variant solves the augmented one-step regression
//! `shifted ~= [A B] * [states; inputs]` directly by least squares and
//! returns both operators in full.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use ndarray_linalg::{c64, Eig};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{economy_svd, lstsq_complex, lstsq_rows, numeric_rank, RCOND};
use crate::timeseries::SnapshotPair;

/// Spectral decomposition of the best-fit one-step linear operator.
#[derive(Debug, Clone)]
pub struct DmdResult {
    /// Eigenvalues of the (reduced) operator; one per retained mode.
    pub eigenvalues: Array1<c64>,
    /// Modes, one column per eigenvalue, lifted to the full state space.
    pub modes: Array2<c64>,
    /// Reduced operator acting on singular-basis coefficients.
    pub reduced_operator: Array2<f64>,
    /// Left singular vectors of the current-snapshot matrix (n x r).
    pub svd_basis: Array2<f64>,
    /// Retained singular values.
    pub singular_values: Array1<f64>,
    /// Right singular vectors (m x r).
    pub right_vectors: Array2<f64>,
    /// Eigenvectors of the reduced operator.
    pub eigvec_reduced: Array2<c64>,
    /// Retained rank.
    pub rank: usize,
}

impl DmdResult {
    /// Reconstruct the full one-step operator `svd_basis * reduced * svd_basis^T`.
    /// Exact when no truncation occurred; otherwise the rank-r approximation.
    pub fn operator(&self) -> Array2<f64> {
        self.svd_basis
            .dot(&self.reduced_operator)
            .dot(&self.svd_basis.t())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(DmdJson::from(self)).expect("dmd result serializes")
    }
}

/// JSON form: eigenvalues as (re, im) pairs, modes as column-major real and
/// imaginary arrays.
#[derive(Serialize)]
struct DmdJson {
    rank: usize,
    eigenvalues: Vec<(f64, f64)>,
    singular_values: Vec<f64>,
    mode_rows: usize,
    mode_cols: usize,
    modes_re: Vec<f64>,
    modes_im: Vec<f64>,
}

impl From<&DmdResult> for DmdJson {
    fn from(r: &DmdResult) -> Self {
        let (n, cols) = r.modes.dim();
        let mut re = Vec::with_capacity(n * cols);
        let mut im = Vec::with_capacity(n * cols);
        for j in 0..cols {
            for i in 0..n {
                re.push(r.modes[(i, j)].re);
                im.push(r.modes[(i, j)].im);
            }
        }
        DmdJson {
            rank: r.rank,
            eigenvalues: r.eigenvalues.iter().map(|l| (l.re, l.im)).collect(),
            singular_values: r.singular_values.to_vec(),
            mode_rows: n,
            mode_cols: cols,
            modes_re: re,
            modes_im: im,
        }
    }
}

/// Decompose a snapshot pair, optionally truncating to `rank` modes.
pub fn dmd(pair: &SnapshotPair, rank: Option<usize>) -> Result<DmdResult> {
    let x = &pair.current;
    let x_shift = &pair.shifted;
    let (n, m) = x.dim();
    if let Some(r) = rank {
        if r == 0 || r > n.min(m) {
            return Err(Error::Param(format!("rank {r} outside 1..={}", n.min(m))));
        }
    }

    let (u, sigma, vt) = economy_svd(x.view())?;
    let kept = numeric_rank(&sigma);
    if kept == 0 {
        return Err(Error::Rank("current snapshot matrix is zero".into()));
    }
    let r = rank.map_or(kept, |want| want.min(kept));

    let u_r = u.slice(s![.., ..r]).to_owned();
    let sigma_r = sigma.slice(s![..r]).to_owned();
    let v_r = vt.slice(s![..r, ..]).t().to_owned(); // m x r

    // reduced operator: U^T X' V Sigma^-1
    let mut xv = x_shift.dot(&v_r); // n x r
    for (j, mut col) in xv.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|v| v / sigma_r[j]);
    }
    let reduced = u_r.t().dot(&xv); // r x r

    let (eigenvalues, eigvec_reduced) = reduced.eig()?;

    // modes: X' V Sigma^-1 W
    let mut modes = Array2::<c64>::zeros((n, r));
    for i in 0..n {
        for j in 0..r {
            let mut acc = c64::new(0.0, 0.0);
            for k in 0..r {
                acc += c64::new(xv[(i, k)], 0.0) * eigvec_reduced[(k, j)];
            }
            modes[(i, j)] = acc;
        }
    }

    debug_assert!({
        let aw = complex_matmul_real_left(&reduced, &eigvec_reduced);
        let mut max_err = 0.0_f64;
        let mut max_mag = 0.0_f64;
        for j in 0..r {
            for i in 0..r {
                let wl = eigvec_reduced[(i, j)] * eigenvalues[j];
                max_err = max_err.max((aw[(i, j)] - wl).norm());
                max_mag = max_mag.max(aw[(i, j)].norm());
            }
        }
        max_err <= 1e-8 * max_mag.max(1.0)
    });

    Ok(DmdResult {
        eigenvalues,
        modes,
        reduced_operator: reduced,
        svd_basis: u_r,
        singular_values: sigma_r,
        right_vectors: v_r,
        eigvec_reduced,
        rank: r,
    })
}

fn complex_matmul_real_left(a: &Array2<f64>, b: &Array2<c64>) -> Array2<c64> {
    let (n, k) = a.dim();
    let cols = b.ncols();
    let mut out = Array2::<c64>::zeros((n, cols));
    for i in 0..n {
        for j in 0..cols {
            let mut acc = c64::new(0.0, 0.0);
            for l in 0..k {
                acc += b[(l, j)] * a[(i, l)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Decomposition of input-driven linear dynamics
/// `x_{k+1} ~= A x_k + B u_k`.
#[derive(Debug, Clone)]
pub struct DmdcResult {
    /// Identified internal dynamics (n x n).
    pub state_operator: Array2<f64>,
    /// Identified input map (n x q).
    pub input_operator: Array2<f64>,
    /// Eigenvalues of the state operator.
    pub eigenvalues: Array1<c64>,
    /// Eigenvectors of the state operator.
    pub modes: Array2<c64>,
    /// Set when the stacked data matrix is rank deficient or has fewer
    /// columns than rows, so the split between A and B is not unique.
    pub ill_conditioned: bool,
}

impl DmdcResult {
    pub fn to_json(&self) -> serde_json::Value {
        let a: Vec<Vec<f64>> = self
            .state_operator
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect();
        let b: Vec<Vec<f64>> = self
            .input_operator
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect();
        serde_json::json!({
            "state_operator": a,
            "input_operator": b,
            "eigenvalues": self.eigenvalues.iter().map(|l| (l.re, l.im)).collect::<Vec<_>>(),
            "ill_conditioned": self.ill_conditioned,
        })
    }
}

/// Identify `(A, B)` from a snapshot pair with recorded inputs by least
/// squares on the stacked matrix `[states; inputs]`. `rank`, when given,
/// truncates the pseudo-inverse of the stacked matrix.
pub fn dmdc(pair: &SnapshotPair, rank: Option<usize>) -> Result<DmdcResult> {
    let inputs = pair
        .inputs_current
        .as_ref()
        .ok_or_else(|| Error::Param("dmdc needs recorded inputs".into()))?;
    let x = &pair.current;
    let (n, m) = x.dim();
    let q = inputs.nrows();
    if inputs.ncols() != m {
        return Err(Error::Shape(format!(
            "inputs have {} columns, states have {m}",
            inputs.ncols()
        )));
    }

    let mut stacked = Array2::zeros((n + q, m));
    stacked.slice_mut(s![..n, ..]).assign(x);
    stacked.slice_mut(s![n.., ..]).assign(inputs);

    let (_, sigma, _) = economy_svd(stacked.view())?;
    let smax = sigma.iter().cloned().fold(0.0_f64, f64::max);
    let deficient = sigma.iter().filter(|&&v| v > RCOND * smax).count() < n + q;
    let ill_conditioned = deficient || m < n + q;

    let g = if let Some(r) = rank {
        if r == 0 || r > (n + q).min(m) {
            return Err(Error::Param(format!(
                "rank {r} outside 1..={}",
                (n + q).min(m)
            )));
        }
        truncated_lstsq(stacked.view(), pair.shifted.view(), r)?
    } else {
        lstsq_rows(stacked.view(), pair.shifted.view())?
    };
    let state_operator = crate::linalg::dense_copy(g.slice(s![.., ..n]));
    let input_operator = crate::linalg::dense_copy(g.slice(s![.., n..]));

    let (eigenvalues, modes) = state_operator.eig()?;

    Ok(DmdcResult {
        state_operator,
        input_operator,
        eigenvalues,
        modes,
        ill_conditioned,
    })
}

fn truncated_lstsq(
    a: ndarray::ArrayView2<'_, f64>,
    targets: ndarray::ArrayView2<'_, f64>,
    rank: usize,
) -> Result<Array2<f64>> {
    let (u, sigma, vt) = economy_svd(a)?;
    let kept = numeric_rank(&sigma).min(rank);
    if kept == 0 {
        return Err(Error::Rank("stacked data matrix is zero".into()));
    }
    let vt_r = vt.slice(s![..kept, ..]);
    let u_r = u.slice(s![.., ..kept]);
    let mut proj = targets.dot(&vt_r.t());
    for (j, mut col) in proj.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|v| v / sigma[j]);
    }
    Ok(proj.dot(&u_r.t()))
}

/// Iterate the identified dynamics forward: project the initial state onto
/// the modes, advance eigenvalue powers, and recombine. Returns an
/// `n x (steps + 1)` matrix whose first column is the mode-space projection
/// of `x0`.
pub fn dmd_predict(
    result: &DmdResult,
    x0: ArrayView1<'_, f64>,
    steps: usize,
) -> Result<Array2<f64>> {
    let n = result.modes.nrows();
    if x0.len() != n {
        return Err(Error::Shape(format!(
            "initial state has {} entries, modes have {n}",
            x0.len()
        )));
    }
    let x0c = Array1::from_iter(x0.iter().map(|&v| c64::new(v, 0.0)));
    let amplitudes = lstsq_complex(result.modes.view(), &x0c)?;

    let r = result.eigenvalues.len();
    let mut out = Array2::zeros((n, steps + 1));
    let mut weights = amplitudes.clone();
    for step in 0..=steps {
        for i in 0..n {
            let mut acc = c64::new(0.0, 0.0);
            for j in 0..r {
                acc += result.modes[(i, j)] * weights[j];
            }
            out[(i, step)] = acc.re;
        }
        for j in 0..r {
            weights[j] *= result.eigenvalues[j];
        }
    }
    Ok(out)
}

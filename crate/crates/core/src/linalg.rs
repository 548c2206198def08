//! Small dense kernels: a cyclic Jacobi symmetric eigensolver and Householder
//! least squares. Sizes here are a few hundred at most.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

const MAX_JACOBI_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
/// Column `i` of `vectors` belongs to `values[i]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
}

/// Cyclic Jacobi eigendecomposition. Only the symmetric part of `a` is used.
/// Ties keep the order in which they appear on the diagonal.
pub fn symmetric_eigen(a: ArrayView2<'_, f64>) -> SymmetricEigen {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric_eigen needs a square matrix");
    let mut m = Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (a[[i, j]] + a[[j, i]]));
    let mut v = Array2::<f64>::eye(n);

    for sweep in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    m[[p, q]] = 0.0;
                    m[[q, p]] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                m[[p, q]] = 0.0;
                m[[q, p]] = 0.0;
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].total_cmp(&m[[i, i]]));
    let values = order.iter().map(|&i| m[[i, i]]).collect();
    let vectors = v.select(ndarray::Axis(1), &order);
    SymmetricEigen { values, vectors }
}

/// Sample covariance `XᵀX / (n - 1)` of a column-centered matrix.
pub fn gram_covariance(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let denom = (x.nrows() as f64 - 1.0).max(1.0);
    x.t().dot(&x) / denom
}

/// Flips `v` so that its largest-magnitude entry is positive. Entries within
/// a relative 1e-10 of the largest magnitude count as tied; ties go to the
/// first such entry.
pub fn orient_sign(v: &mut Array1<f64>) {
    let largest = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let cutoff = largest * (1.0 - 1e-10);
    if let Some(&lead) = v.iter().find(|x| x.abs() >= cutoff) {
        if lead < 0.0 {
            v.mapv_inplace(|x| -x);
        }
    }
}

pub fn norm(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// Householder QR of a tall design matrix applied to one right-hand side.
#[derive(Debug, Clone)]
pub struct LeastSquaresQr {
    /// Upper-triangular `q × q` factor.
    pub r: Array2<f64>,
    /// `Qᵀy`, length `n`; entries past `q` carry the residual.
    pub qty: Array1<f64>,
}

pub fn householder_qr(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> LeastSquaresQr {
    let (n, q) = x.dim();
    let mut a = x.to_owned();
    let mut b = y.to_owned();
    for j in 0..q.min(n) {
        let col = a.slice(ndarray::s![j.., j]);
        let alpha = norm(col);
        if alpha == 0.0 {
            continue;
        }
        let alpha = if col[0] > 0.0 { -alpha } else { alpha };
        let mut v = col.to_owned();
        v[0] -= alpha;
        let vtv = v.dot(&v);
        if vtv == 0.0 {
            continue;
        }
        for k in j..q {
            let mut target = a.slice_mut(ndarray::s![j.., k]);
            let f = 2.0 * v.dot(&target) / vtv;
            target.scaled_add(-f, &v);
        }
        let mut target = b.slice_mut(ndarray::s![j..]);
        let f = 2.0 * v.dot(&target) / vtv;
        target.scaled_add(-f, &v);
        for i in (j + 1)..n {
            a[[i, j]] = 0.0;
        }
    }
    let r = a.slice(ndarray::s![..q, ..]).to_owned();
    LeastSquaresQr { r, qty: b }
}

/// Solves `R x = b` for upper-triangular `R`.
pub fn back_substitute(r: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
    let q = r.nrows();
    let mut x = Array1::zeros(q);
    for i in (0..q).rev() {
        let mut s = b[i];
        for k in (i + 1)..q {
            s -= r[[i, k]] * x[k];
        }
        x[i] = s / r[[i, i]];
    }
    x
}

/// Inverse of an upper-triangular matrix.
pub fn upper_triangular_inverse(r: ArrayView2<'_, f64>) -> Array2<f64> {
    let q = r.nrows();
    let mut inv = Array2::zeros((q, q));
    for j in 0..q {
        let mut e = Array1::zeros(q);
        e[j] = 1.0;
        let col = back_substitute(r, e.view());
        inv.column_mut(j).assign(&col);
    }
    inv
}

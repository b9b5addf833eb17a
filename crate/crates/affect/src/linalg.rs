//! Dense symmetric eigendecomposition and positive-semidefiniteness checks.
//!
//! The eigensolver reduces the matrix to tridiagonal form with Householder
//! reflections and then applies the implicitly shifted QL iteration,
//! accumulating the transformations into the eigenvector matrix. Eigenvalues
//! come back in ascending order and each eigenvector is oriented so that its
//! entry of largest magnitude is positive, which makes results reproducible
//! across runs.

use ndarray::Array2;

use crate::error::{Error, Result};

/// QL iterations allowed per eigenvalue before giving up.
const MAX_QL_ITERATIONS: usize = 30;

/// Eigenvalues in ascending order with eigenvectors as matching columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
}

/// Full eigendecomposition of a real symmetric matrix.
///
/// The input is symmetrized by averaging before factorization so that tiny
/// floating-point asymmetries from upstream arithmetic cannot push the
/// iteration off the symmetric path.
pub fn eigh(matrix: &Array2<f64>) -> Result<EigenDecomposition> {
    let (rows, cols) = matrix.dim();
    if rows != cols {
        return Err(Error::DimensionMismatch {
            rows,
            cols,
            expected: rows,
        });
    }
    let n = rows;
    if n == 0 {
        return Ok(EigenDecomposition {
            values: Vec::new(),
            vectors: Array2::zeros((0, 0)),
        });
    }
    let mut v = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            v[[i, j]] = 0.5 * (matrix[[i, j]] + matrix[[j, i]]);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    ql_implicit(&mut v, &mut d, &mut e)?;
    sort_ascending(&mut v, &mut d);
    fix_signs(&mut v);
    Ok(EigenDecomposition {
        values: d,
        vectors: v,
    })
}

impl EigenDecomposition {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Columns for the `k` smallest eigenvalues, as an n x k matrix.
    pub fn bottom_vectors(&self, k: usize) -> Array2<f64> {
        let n = self.n();
        let mut out = Array2::zeros((n, k));
        for j in 0..k {
            for i in 0..n {
                out[[i, j]] = self.vectors[[i, j]];
            }
        }
        out
    }

    /// Columns for the `k` largest eigenvalues, as an n x k matrix.
    pub fn top_vectors(&self, k: usize) -> Array2<f64> {
        let n = self.n();
        let mut out = Array2::zeros((n, k));
        for j in 0..k {
            let src = n - k + j;
            for i in 0..n {
                out[[i, j]] = self.vectors[[i, src]];
            }
        }
        out
    }
}

/// Householder reduction to symmetric tridiagonal form. On return `d` holds
/// the diagonal, `e[1..]` the subdiagonal, and `v` the accumulated orthogonal
/// transformation.
fn tridiagonalize(v: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[[n - 1, j]];
    }

    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        let mut scale = 0.0;
        if l > 0 {
            for item in d.iter().take(l + 1) {
                scale += item.abs();
            }
        }
        if scale == 0.0 {
            e[i] = d[l];
            for j in 0..=l {
                d[j] = v[[l, j]];
                v[[i, j]] = 0.0;
                v[[j, i]] = 0.0;
            }
        } else {
            for item in d.iter_mut().take(l + 1) {
                *item /= scale;
                h += *item * *item;
            }
            let mut f = d[l];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[l] = f - g;
            for item in e.iter_mut().take(l + 1) {
                *item = 0.0;
            }

            for j in 0..=l {
                f = d[j];
                v[[j, i]] = f;
                g = e[j] + v[[j, j]] * f;
                for k in (j + 1)..=l {
                    g += v[[k, j]] * d[k];
                    e[k] += v[[k, j]] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..=l {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..=l {
                e[j] -= hh * d[j];
            }
            for j in 0..=l {
                f = d[j];
                g = e[j];
                for k in j..=l {
                    let delta = f * e[k] + g * d[k];
                    v[[k, j]] -= delta;
                }
                d[j] = v[[l, j]];
                v[[i, j]] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n.saturating_sub(1) {
        v[[n - 1, i]] = v[[i, i]];
        v[[i, i]] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[[k, i + 1]] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[[k, i + 1]] * v[[k, j]];
                }
                for k in 0..=i {
                    let delta = g * d[k];
                    v[[k, j]] -= delta;
                }
            }
        }
        for k in 0..=i {
            v[[k, i + 1]] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[[n - 1, j]];
        v[[n - 1, j]] = 0.0;
    }
    v[[n - 1, n - 1]] = 1.0;
    e[0] = 0.0;
}

/// Implicitly shifted QL iteration on a symmetric tridiagonal matrix,
/// accumulating rotations into `v`.
fn ql_implicit(v: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m >= n {
            m = n - 1;
        }

        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::NoConvergence(MAX_QL_ITERATIONS));
                }

                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    for k in 0..n {
                        h = v[[k, i + 1]];
                        v[[k, i + 1]] = s * v[[k, i]] + c * h;
                        v[[k, i]] = c * v[[k, i]] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

fn sort_ascending(v: &mut Array2<f64>, d: &mut [f64]) {
    let n = d.len();
    for i in 0..n.saturating_sub(1) {
        let mut kmin = i;
        for j in (i + 1)..n {
            if d[j] < d[kmin] {
                kmin = j;
            }
        }
        if kmin != i {
            d.swap(i, kmin);
            for row in 0..n {
                let tmp = v[[row, i]];
                v[[row, i]] = v[[row, kmin]];
                v[[row, kmin]] = tmp;
            }
        }
    }
}

/// Flips each column so its entry of largest magnitude is positive; ties go
/// to the earliest such entry.
fn fix_signs(v: &mut Array2<f64>) {
    let (n, cols) = v.dim();
    for j in 0..cols {
        let mut best = 0;
        for i in 1..n {
            if v[[i, j]].abs() > v[[best, j]].abs() {
                best = i;
            }
        }
        if v[[best, j]] < 0.0 {
            for i in 0..n {
                v[[i, j]] = -v[[i, j]];
            }
        }
    }
}

/// Frobenius norm.
pub fn frobenius(values: &Array2<f64>) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Verifies the matrix has no eigenvalue below `-1e-6 * ||W||_F`, via a
/// Cholesky factorization of `W + tol * I`. This keeps the cost at one
/// triangular factorization instead of a full eigendecomposition.
pub fn check_psd(values: &Array2<f64>) -> Result<()> {
    let n = values.nrows();
    let scale = frobenius(values);
    if scale == 0.0 {
        return Ok(());
    }
    let tol = 1e-6 * scale;
    let mut a = values.clone();
    for i in 0..n {
        a[[i, i]] += tol;
    }
    // In-place lower Cholesky; a nonpositive pivot exposes an eigenvalue
    // below the tolerance.
    for j in 0..n {
        let mut pivot = a[[j, j]];
        for k in 0..j {
            pivot -= a[[j, k]] * a[[j, k]];
        }
        if pivot <= 0.0 {
            return Err(Error::NotPsd {
                index: j,
                pivot: pivot - tol,
            });
        }
        let root = pivot.sqrt();
        a[[j, j]] = root;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= a[[i, k]] * a[[j, k]];
            }
            a[[i, j]] = s / root;
        }
    }
    Ok(())
}

//! Symmetric eigendecomposition and SPD solves.

use super::Matrix;
use crate::error::{ensure, Error, Result};

/// Symmetry tolerance for [`sym_eig`] inputs.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Iteration cap per eigenvalue in the QL sweep.
pub const QL_MAX_ITER: usize = 64;

/// Eigenvalues in ascending order with matching unit eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Eigendecomposition of a symmetric matrix.
///
/// Householder reduction to tridiagonal form followed by the implicit QL
/// algorithm (the EISPACK `tred2`/`tql2` pair). The working copy holds the
/// transformation matrix transposed so every inner loop runs along a
/// contiguous row.
pub fn sym_eig(m: &Matrix) -> Result<SymEigen> {
    ensure!(m.is_square(), "sym_eig needs a square matrix, got {:?}", m.shape());
    ensure!(
        m.is_symmetric(SYMMETRY_TOL),
        "sym_eig input is not symmetric within {SYMMETRY_TOL}"
    );
    ensure!(m.is_finite(), "sym_eig input has non-finite entries");
    let n = m.rows();
    if n == 0 {
        return Ok(SymEigen {
            values: Vec::new(),
            vectors: Matrix::zeros(0, 0),
        });
    }
    // w[j * n + k] holds V[k][j].
    let mut w: Vec<f64> = Matrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)])).into_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut w, &mut d, &mut e);
    tql2(n, &mut w, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let v = &w[src * n..(src + 1) * n];
        for (row, &x) in v.iter().enumerate() {
            vectors[(row, col)] = x;
        }
    }
    Ok(SymEigen { values, vectors })
}

fn tred2(n: usize, w: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    macro_rules! v {
        ($k:expr, $j:expr) => {
            w[($j) * n + ($k)]
        };
    }
    for j in 0..n {
        d[j] = v!(n - 1, j);
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v!(i - 1, j);
                v!(i, j) = 0.0;
                v!(j, i) = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v!(j, i) = f;
                g = e[j] + v!(j, j) * f;
                let col = &w[j * n..j * n + i];
                for k in j + 1..i {
                    g += col[k] * d[k];
                    e[k] += col[k] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                let col = &mut w[j * n..j * n + i];
                for k in j..i {
                    col[k] -= f * e[k] + g * d[k];
                }
                d[j] = v!(i - 1, j);
                v!(i, j) = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v!(n - 1, i) = v!(i, i);
        v!(i, i) = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v!(k, i + 1) / h;
            }
            for j in 0..=i {
                let (lo, hi) = w.split_at_mut((i + 1) * n);
                let src = &hi[..=i];
                let col = &mut lo[j * n..j * n + i + 1];
                let g: f64 = src.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
                for k in 0..=i {
                    col[k] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v!(k, i + 1) = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v!(n - 1, j);
        v!(n - 1, j) = 0.0;
    }
    v!(n - 1, n - 1) = 1.0;
    e[0] = 0.0;
}

fn tql2(n: usize, w: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        // e[n-1] is zero, so m < n always holds here.
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_ITER {
                    return Err(Error::Numeric(format!(
                        "symmetric eigensolver did not converge within {QL_MAX_ITER} QL iterations for eigenvalue {l}"
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
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
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = w.split_at_mut((i + 1) * n);
                    let vi = &mut lo[i * n..(i + 1) * n];
                    let vi1 = &mut hi[..n];
                    for (a, b) in vi.iter_mut().zip(vi1.iter_mut()) {
                        let hk = *b;
                        *b = s * *a + c * hk;
                        *a = c * *a - s * hk;
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

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    ensure!(a.is_square(), "cholesky needs a square matrix");
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut s = a[(j, j)];
        for k in 0..j {
            s -= l[(j, k)] * l[(j, k)];
        }
        if s <= 0.0 || !s.is_finite() {
            return Err(Error::Numeric(format!(
                "matrix is not positive definite (pivot {j} = {s:e})"
            )));
        }
        let ljj = s.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            let (ri, rj) = (l.row(i), l.row(j));
            for k in 0..j {
                s -= ri[k] * rj[k];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ X = B` given the lower Cholesky factor.
pub fn cholesky_solve(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows();
    assert_eq!(b.rows(), n);
    let m = b.cols();
    let mut x = b.clone();
    // Forward: L y = b.
    for i in 0..n {
        for k in 0..i {
            let lik = l[(i, k)];
            if lik != 0.0 {
                for c in 0..m {
                    x[(i, c)] -= lik * x[(k, c)];
                }
            }
        }
        let lii = l[(i, i)];
        for c in 0..m {
            x[(i, c)] /= lii;
        }
    }
    // Backward: Lᵀ x = y.
    for i in (0..n).rev() {
        for k in i + 1..n {
            let lki = l[(k, i)];
            if lki != 0.0 {
                for c in 0..m {
                    x[(i, c)] -= lki * x[(k, c)];
                }
            }
        }
        let lii = l[(i, i)];
        for c in 0..m {
            x[(i, c)] /= lii;
        }
    }
    x
}

/// Unconstrained ridge self-expression: `C = (ZᵀZ + λI)⁻¹ ZᵀX`.
///
/// `z` and `x` are features-by-samples (`d × N`).
pub fn ridge_solve(z: &Matrix, x: &Matrix, lambda: f64) -> Result<Matrix> {
    ensure!(lambda > 0.0, "ridge lambda must be positive, got {lambda}");
    ensure!(
        z.shape() == x.shape(),
        "ridge shapes differ: {:?} vs {:?}",
        z.shape(),
        x.shape()
    );
    let n = z.cols();
    let mut gram = z.t_matmul(z);
    for i in 0..n {
        gram[(i, i)] += lambda;
    }
    let rhs = z.t_matmul(x);
    let l = cholesky(&gram)?;
    Ok(cholesky_solve(&l, &rhs))
}

//! Small dense linear algebra on row-major slices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `a = sigma * sigma^T` for a row-major `n x n` sigma.
pub fn outer_self(sigma: &[f64], n: usize, out: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += sigma[i * n + k] * sigma[j * n + k];
            }
            out[i * n + j] = s;
        }
    }
}

/// Inverse of a small symmetric positive definite matrix. Direct formulas
/// for n <= 2, pivoted Cholesky otherwise.
pub fn spd_inverse(a: &[f64], n: usize, out: &mut [f64]) -> Result<()> {
    match n {
        1 => {
            if a[0] <= 0.0 {
                return Err(Error::Singular(format!("1x1 diffusion {}", a[0])));
            }
            out[0] = 1.0 / a[0];
        }
        2 => {
            let det = a[0] * a[3] - a[1] * a[2];
            let scale = a[0].abs().max(a[3].abs());
            if det <= 1e-14 * scale * scale || a[0] <= 0.0 {
                return Err(Error::Singular(format!("2x2 diffusion with det {det}")));
            }
            out[0] = a[3] / det;
            out[1] = -a[1] / det;
            out[2] = -a[2] / det;
            out[3] = a[0] / det;
        }
        _ => {
            let (perm, l) = pivoted_cholesky(a, n, 1e-14)?;
            if l.len() < n {
                return Err(Error::Singular(format!("rank {} < {n}", l.len())));
            }
            // Solve (P L L^T P^T) x = e_k column by column.
            let mut lm = DMatrix::<f64>::zeros(n, n);
            for (c, col) in l.iter().enumerate() {
                for r in 0..n {
                    lm[(r, c)] = col[r];
                }
            }
            let llt = &lm * lm.transpose();
            let inv = llt
                .try_inverse()
                .ok_or_else(|| Error::Singular("cholesky factor".into()))?;
            for i in 0..n {
                for j in 0..n {
                    out[perm[i] * n + perm[j]] = inv[(i, j)];
                }
            }
        }
    }
    Ok(())
}

/// Outer-product Cholesky with diagonal pivoting. Returns the pivot order
/// and the computed columns (in permuted coordinates); fewer than `n`
/// columns means `a` is only positive semidefinite to tolerance `tol`.
pub fn pivoted_cholesky(a: &[f64], n: usize, tol: f64) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let mut m: Vec<f64> = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(1e-300);
    let mut cols = Vec::new();
    for k in 0..n {
        let (p, &dmax) = (k..n)
            .map(|i| (i, &m[perm[i] * n + perm[i]]))
            .max_by(|x, y| x.1.total_cmp(y.1))
            .unwrap();
        if dmax < -tol * scale * 10.0 {
            return Err(Error::Invalid(format!(
                "matrix not positive semidefinite (pivot {dmax})"
            )));
        }
        if dmax <= tol * scale {
            break;
        }
        perm.swap(k, p);
        let pk = perm[k];
        let root = dmax.sqrt();
        let mut col = vec![0.0; n];
        col[k] = root;
        for i in (k + 1)..n {
            col[i] = m[perm[i] * n + pk] / root;
        }
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                m[perm[i] * n + perm[j]] -= col[i] * col[j];
            }
        }
        cols.push(col);
    }
    Ok((perm, cols))
}

/// Dense LU solve with partial pivoting.
pub fn solve_dense(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    let scale = a.amax().max(1e-300);
    let lu = a.lu();
    let u = lu.u();
    let n = u.nrows();
    let min_pivot = (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if min_pivot <= 1e-13 * scale {
        return Err(Error::Singular(format!(
            "LU pivot {min_pivot:e} relative to scale {scale:e}"
        )));
    }
    lu.solve(&b)
        .ok_or_else(|| Error::Singular("LU solve failed".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_3x3_spd() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let mut inv = [0.0; 9];
        spd_inverse(&a, 3, &mut inv).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn semidefinite_detected() {
        let a = [1.0, 1.0, 1.0, 1.0];
        assert!(spd_inverse(&a, 2, &mut [0.0; 4]).is_err());
        let (_, cols) = pivoted_cholesky(&a, 2, 1e-12).unwrap();
        assert_eq!(cols.len(), 1);
        let bad = [1.0, 0.0, 0.0, -1.0];
        assert!(pivoted_cholesky(&bad, 2, 1e-12).is_err());
    }

    #[test]
    fn dense_solve_and_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let x = solve_dense(a, DVector::from_vec(vec![3.0, 5.0])).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(solve_dense(s, DVector::from_vec(vec![1.0, 1.0])).is_err());
    }
}

//! Small dense direct solvers and covariance estimation.

use crate::error::{ClaError, Result};
use crate::linalg::DenseMatrix;

/// Symmetry tolerance for [`ridge_solve`], relative to `1 + max|g|`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Solves `(g + eps·I) X = rhs` for symmetric `g` with a Cholesky factorization.
///
/// `g + eps·I` must be positive definite; otherwise a singularity error is
/// returned.
pub fn ridge_solve(g: &DenseMatrix, rhs: &DenseMatrix, eps: f64) -> Result<DenseMatrix> {
    if !g.is_square() {
        return Err(ClaError::Dimension(format!(
            "ridge_solve needs a square matrix, got {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    if rhs.rows() != g.rows() {
        return Err(ClaError::Dimension(format!(
            "right-hand side has {} rows, system has {}",
            rhs.rows(),
            g.rows()
        )));
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(ClaError::Validation(format!(
            "ridge eps must be finite and >= 0, got {eps}"
        )));
    }
    let asym = g.asymmetry().unwrap_or(0.0);
    if asym > SYMMETRY_TOLERANCE * (1.0 + g.max_abs()) {
        return Err(ClaError::Shape(format!(
            "ridge_solve needs a symmetric matrix (max asymmetry {asym:e})"
        )));
    }
    let mut a = g.clone();
    a.add_diagonal(eps);
    let l = cholesky(&a)?;
    cholesky_solve(&l, rhs).ensure_finite("ridge_solve")
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag.is_finite() && diag > 0.0) {
            return Err(ClaError::Singular(format!(
                "matrix is not positive definite (pivot {j} = {diag:e})"
            )));
        }
        let d = diag.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &DenseMatrix, rhs: &DenseMatrix) -> DenseMatrix {
    let n = l.rows();
    let mut x = rhs.clone();
    for c in 0..x.cols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// LU factorization with partial pivoting, stored compactly.
pub(crate) struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl Lu {
    /// Factors `a`; fails if a pivot is below `tol · max|a|`.
    pub(crate) fn factor(a: DenseMatrix, tol: f64) -> Result<Lu> {
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        Lu::factor_with_scale(a, tol, scale)
    }

    /// Factors `a`; fails if a pivot is below `tol · scale`.
    pub(crate) fn factor_with_scale(mut a: DenseMatrix, tol: f64, scale: f64) -> Result<Lu> {
        let n = a.rows();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (pivot_row, pivot) =
                (k..n)
                    .map(|i| (i, a[(i, k)].abs()))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if pivot <= tol * scale {
                return Err(ClaError::Singular(format!(
                    "pivot {k} is {pivot:e} (matrix scale {scale:e})"
                )));
            }
            if pivot_row != k {
                perm.swap(k, pivot_row);
                for j in 0..n {
                    let tmp = a[(k, j)];
                    a[(k, j)] = a[(pivot_row, j)];
                    a[(pivot_row, j)] = tmp;
                }
            }
            let d = a[(k, k)];
            for i in (k + 1)..n {
                let f = a[(i, k)] / d;
                a[(i, k)] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        a[(i, j)] -= f * a[(k, j)];
                    }
                }
            }
        }
        Ok(Lu { lu: a, perm })
    }

    pub(crate) fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = self.lu.row(i)[..i]
                .iter()
                .zip(&x[..i])
                .map(|(l, v)| l * v)
                .sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = self.lu.row(i)[i + 1..]
                .iter()
                .zip(&x[i + 1..])
                .map(|(u, v)| u * v)
                .sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }
}

/// Empirical covariance of the columns of `z` (normalized by `n`).
///
/// One observation yields the zero matrix.
pub fn covariance(z: &DenseMatrix) -> Result<DenseMatrix> {
    let (d, n) = z.shape();
    if n == 0 || d == 0 {
        return Err(ClaError::Dimension(format!(
            "covariance needs at least one observation, got {d}x{n}"
        )));
    }
    let means: Vec<f64> = (0..d)
        .map(|i| z.row(i).iter().sum::<f64>() / n as f64)
        .collect();
    let centered = DenseMatrix::from_fn(d, n, |i, j| z[(i, j)] - means[i]);
    let mut cov = DenseMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = crate::linalg::dense::dot(centered.row(i), centered.row(j)) / n as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov.ensure_finite("covariance")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ridge_identity() {
        let x = ridge_solve(
            &DenseMatrix::identity(2),
            &DenseMatrix::from_rows(&[&[1.0], &[2.0]]),
            0.0,
        )
        .unwrap();
        assert_eq!(x, DenseMatrix::from_rows(&[&[1.0], &[2.0]]));
    }

    #[test]
    fn ridge_pure_regularizer() {
        let x = ridge_solve(
            &DenseMatrix::zeros(2, 2),
            &DenseMatrix::from_rows(&[&[3.0], &[3.0]]),
            1.0,
        )
        .unwrap();
        assert_eq!(x, DenseMatrix::from_rows(&[&[3.0], &[3.0]]));
    }

    #[test]
    fn ridge_diagonal_by_hand() {
        // 1.5 x = 3, 3.5 x = 7
        let x = ridge_solve(
            &DenseMatrix::from_diag(&[1.0, 3.0]),
            &DenseMatrix::from_rows(&[&[3.0], &[7.0]]),
            0.5,
        )
        .unwrap();
        assert!((x[(0, 0)] - 2.0).abs() < 1e-15 && (x[(1, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn ridge_rejects_asymmetric_and_singular() {
        let asym = DenseMatrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        let rhs = DenseMatrix::zeros(2, 1);
        assert!(matches!(
            ridge_solve(&asym, &rhs, 0.0),
            Err(ClaError::Shape(_))
        ));
        assert!(matches!(
            ridge_solve(&DenseMatrix::zeros(2, 2), &rhs, 0.0),
            Err(ClaError::Singular(_))
        ));
    }

    #[test]
    fn covariance_small_cases() {
        let single = DenseMatrix::from_rows(&[&[1.0], &[2.0]]);
        assert_eq!(covariance(&single).unwrap(), DenseMatrix::zeros(2, 2));
        let pair = DenseMatrix::from_rows(&[&[1.0, -1.0]]);
        assert_eq!(covariance(&pair).unwrap()[(0, 0)], 1.0);
        assert!(matches!(
            covariance(&DenseMatrix::zeros(2, 0)),
            Err(ClaError::Dimension(_))
        ));
    }

    #[test]
    fn covariance_matches_outer_product_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = DenseMatrix::from_fn(2, 3, |_, _| rng.random_range(-2.0..2.0));
        let mut mean = [0.0; 2];
        for j in 0..3 {
            for i in 0..2 {
                mean[i] += z[(i, j)] / 3.0;
            }
        }
        let mut expected = DenseMatrix::zeros(2, 2);
        for j in 0..3 {
            for a in 0..2 {
                for b in 0..2 {
                    expected[(a, b)] += (z[(a, j)] - mean[a]) * (z[(b, j)] - mean[b]) / 3.0;
                }
            }
        }
        let got = covariance(&z).unwrap();
        assert!(got.sub(&expected).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn lu_solves_permuted_system() {
        let a = DenseMatrix::from_rows(&[&[0.0, 2.0], &[3.0, 1.0]]);
        let lu = Lu::factor(a, 1e-14).unwrap();
        let x = lu.solve_vec(&[4.0, 5.0]);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }
}

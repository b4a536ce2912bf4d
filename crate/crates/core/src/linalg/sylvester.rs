//! Sylvester equation `A W + W B = C`.
//!
//! [`solve_sylvester`] is Bartels–Stewart: with `A = U R Uᵀ` and
//! `Bᵀ = V S Vᵀ` in real Schur form the equation becomes
//! `R Y + Y Sᵀ = Uᵀ C V`, solved by block back-substitution over the 1x1 and
//! 2x2 diagonal blocks, then `W = U Y Vᵀ`.
//!
//! [`solve_sylvester_oracle`] vectorizes the equation into
//! `(I ⊗ A + Bᵀ ⊗ I) vec(W) = vec(C)` and solves it densely. It is quadratic
//! in memory and only meant as a reference.

use crate::error::{ClaError, Result};
use crate::linalg::schur::{diagonal_blocks, real_schur};
use crate::linalg::solve::Lu;
use crate::linalg::DenseMatrix;

/// Largest `k·d` accepted by [`solve_sylvester_oracle`].
pub const ORACLE_MAX_UNKNOWNS: usize = 4096;

/// Pivot tolerance for the small block systems, relative to the spectral
/// scale of `A` and `B`.
const BLOCK_PIVOT_TOLERANCE: f64 = 64.0 * f64::EPSILON;

fn check_dims(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix) -> Result<(usize, usize)> {
    if !a.is_square() || !b.is_square() {
        return Err(ClaError::Dimension(format!(
            "Sylvester coefficients must be square, got {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let (k, d) = (a.rows(), b.rows());
    if c.shape() != (k, d) {
        return Err(ClaError::Dimension(format!(
            "right-hand side must be {k}x{d}, got {}x{}",
            c.rows(),
            c.cols()
        )));
    }
    Ok((k, d))
}

/// Solves `a W + W b = c` by Bartels–Stewart.
pub fn solve_sylvester(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix) -> Result<DenseMatrix> {
    let (k, d) = check_dims(a, b, c)?;
    if k == 0 || d == 0 {
        return Ok(DenseMatrix::zeros(k, d));
    }
    let schur_a = real_schur(a)?;
    let schur_bt = real_schur(&b.transpose())?;
    let (u, r) = (&schur_a.q, &schur_a.t);
    let (v, s) = (&schur_bt.q, &schur_bt.t);

    // F = Uᵀ C V
    let mut y = u.t_matmul(c)?.matmul(v)?;
    let scale = r.max_abs().max(s.max_abs()).max(f64::MIN_POSITIVE);

    let row_blocks = block_starts(r);
    let col_blocks = block_starts(s);

    // Columns are coupled through Sᵀ, which is lower quasi-triangular:
    // (Y Sᵀ)[:, j] = Σ_{l >= j} S[j, l] Y[:, l]. Sweep column blocks from the right.
    for &(j0, jn) in col_blocks.iter().rev() {
        for j in j0..j0 + jn {
            for l in (j0 + jn)..d {
                let sjl = s[(j, l)];
                if sjl != 0.0 {
                    for i in 0..k {
                        let yil = y[(i, l)];
                        y[(i, j)] -= sjl * yil;
                    }
                }
            }
        }
        // R Y_J + Y_J S_JJᵀ = F_J, rows from the bottom block up.
        for &(i0, im) in row_blocks.iter().rev() {
            let mut rhs = [0.0; 4];
            for (bi, i) in (i0..i0 + im).enumerate() {
                for (bj, j) in (j0..j0 + jn).enumerate() {
                    let mut acc = y[(i, j)];
                    for l in (i0 + im)..k {
                        acc -= r[(i, l)] * y[(l, j)];
                    }
                    rhs[bi * jn + bj] = acc;
                }
            }
            let sol = solve_block(r, s, (i0, im), (j0, jn), &rhs[..im * jn], scale)?;
            for (bi, i) in (i0..i0 + im).enumerate() {
                for (bj, j) in (j0..j0 + jn).enumerate() {
                    y[(i, j)] = sol[bi * jn + bj];
                }
            }
        }
    }

    let w = u.matmul(&y)?.matmul_t(v)?;
    w.ensure_finite("solve_sylvester")
}

fn block_starts(t: &DenseMatrix) -> Vec<(usize, usize)> {
    let mut start = 0;
    diagonal_blocks(t)
        .into_iter()
        .map(|size| {
            let b = (start, size);
            start += size;
            b
        })
        .collect()
}

/// Solves `R_II X + X S_JJᵀ = rhs` for an `im x jn` block `X` (row-major).
fn solve_block(
    r: &DenseMatrix,
    s: &DenseMatrix,
    (i0, im): (usize, usize),
    (j0, jn): (usize, usize),
    rhs: &[f64],
    scale: f64,
) -> Result<Vec<f64>> {
    let n = im * jn;
    // Unknown index p = bi * jn + bj.
    let mut sys = DenseMatrix::zeros(n, n);
    for bi in 0..im {
        for bj in 0..jn {
            let p = bi * jn + bj;
            for ci in 0..im {
                sys[(p, ci * jn + bj)] += r[(i0 + bi, i0 + ci)];
            }
            for cj in 0..jn {
                // (X S_JJᵀ)[bi, bj] = Σ_cj X[bi, cj] S[bj, cj]
                sys[(p, bi * jn + cj)] += s[(j0 + bj, j0 + cj)];
            }
        }
    }
    let lu = Lu::factor_with_scale(sys, BLOCK_PIVOT_TOLERANCE, scale).map_err(|_| {
        let ea = block_eigenvalues(r, i0, im);
        let eb = block_eigenvalues(s, j0, jn);
        ClaError::Singular(format!(
            "A has eigenvalue {} and B has eigenvalue {}: the spectra of A and -B intersect",
            fmt_complex(ea[0]),
            fmt_complex(eb[0])
        ))
    })?;
    Ok(lu.solve_vec(rhs))
}

fn block_eigenvalues(t: &DenseMatrix, i0: usize, size: usize) -> Vec<(f64, f64)> {
    if size == 1 {
        return vec![(t[(i0, i0)], 0.0)];
    }
    let (a, b, c, d) = (
        t[(i0, i0)],
        t[(i0, i0 + 1)],
        t[(i0 + 1, i0)],
        t[(i0 + 1, i0 + 1)],
    );
    let half_tr = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc >= 0.0 {
        vec![(half_tr + disc.sqrt(), 0.0), (half_tr - disc.sqrt(), 0.0)]
    } else {
        let im = (-disc).sqrt();
        vec![(half_tr, im), (half_tr, -im)]
    }
}

fn fmt_complex((re, im): (f64, f64)) -> String {
    if im == 0.0 {
        format!("{re:e}")
    } else {
        format!("{re:e}{im:+e}i")
    }
}

/// Solves `a W + W b = c` through the Kronecker-vectorized linear system.
///
/// Reference implementation; rejects systems with more than
/// [`ORACLE_MAX_UNKNOWNS`] unknowns.
pub fn solve_sylvester_oracle(
    a: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
) -> Result<DenseMatrix> {
    let (k, d) = check_dims(a, b, c)?;
    let n = k * d;
    if n > ORACLE_MAX_UNKNOWNS {
        return Err(ClaError::Capacity(format!(
            "Kronecker oracle limited to {ORACLE_MAX_UNKNOWNS} unknowns, got {k}x{d} = {n}"
        )));
    }
    // Column-major vec: unknown (i, j) sits at j*k + i.
    let mut sys = DenseMatrix::zeros(n, n);
    for j in 0..d {
        for i in 0..k {
            let row = j * k + i;
            // (I ⊗ a): couples (i', j) with a[i, i']
            for ip in 0..k {
                sys[(row, j * k + ip)] += a[(i, ip)];
            }
            // (bᵀ ⊗ I): couples (i, j') with b[j', j]
            for jp in 0..d {
                sys[(row, jp * k + i)] += b[(jp, j)];
            }
        }
    }
    let lu = Lu::factor(sys, 1e-13).map_err(|e| match e {
        ClaError::Singular(msg) => ClaError::Singular(format!("Kronecker system: {msg}")),
        other => other,
    })?;
    let mut rhs = vec![0.0; n];
    for j in 0..d {
        for i in 0..k {
            rhs[j * k + i] = c[(i, j)];
        }
    }
    let x = lu.solve_vec(&rhs);
    DenseMatrix::from_fn(k, d, |i, j| x[j * k + i]).ensure_finite("solve_sylvester_oracle")
}

/// `‖a W + W b − c‖_F`.
pub fn sylvester_residual(
    a: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
    w: &DenseMatrix,
) -> Result<f64> {
    let lhs = a.matmul(w)?.add(&w.matmul(b)?)?;
    Ok(lhs.sub(c)?.frobenius_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn spd(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let g = random(n, n, rng);
        let mut m = g.matmul_t(&g).unwrap();
        m.add_diagonal(0.1);
        m
    }

    #[test]
    fn identity_system() {
        let i2 = DenseMatrix::identity(2);
        let w = solve_sylvester(&i2, &i2, &i2.scale(2.0)).unwrap();
        assert!(w.sub(&i2).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn zero_a_returns_c() {
        let c = DenseMatrix::from_rows(&[&[1.5, -2.0], &[0.25, 7.0]]);
        let w = solve_sylvester(&DenseMatrix::zeros(2, 2), &DenseMatrix::identity(2), &c).unwrap();
        assert!(w.sub(&c).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn oracle_scalar_and_diagonal_cases() {
        let one = DenseMatrix::identity(1);
        let w = solve_sylvester_oracle(&one, &one, &DenseMatrix::from_rows(&[&[4.0]])).unwrap();
        assert_eq!(w, DenseMatrix::from_rows(&[&[2.0]]));

        let a = DenseMatrix::from_diag(&[1.0, 2.0]);
        let b = DenseMatrix::from_rows(&[&[3.0]]);
        let c = DenseMatrix::from_rows(&[&[4.0], &[10.0]]);
        let w = solve_sylvester_oracle(&a, &b, &c).unwrap();
        assert_eq!(w, DenseMatrix::from_rows(&[&[1.0], &[2.0]]));
        let w = solve_sylvester(&a, &b, &c).unwrap();
        assert!(
            w.sub(&DenseMatrix::from_rows(&[&[1.0], &[2.0]]))
                .unwrap()
                .max_abs()
                < 1e-14
        );
    }

    #[test]
    fn spd_system_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = spd(4, &mut rng);
        let b = spd(3, &mut rng);
        let c = random(4, 3, &mut rng);
        let w = solve_sylvester(&a, &b, &c).unwrap();
        let o = solve_sylvester_oracle(&a, &b, &c).unwrap();
        assert!(w.sub(&o).unwrap().max_abs() <= 1e-8);
    }

    #[test]
    fn oracle_residual_on_random_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random(5, 5, &mut rng);
        let b = random(5, 5, &mut rng);
        let c = random(5, 5, &mut rng);
        let w = solve_sylvester_oracle(&a, &b, &c).unwrap();
        assert!(sylvester_residual(&a, &b, &c, &w).unwrap() <= 1e-10 * c.frobenius_norm());
    }

    #[test]
    fn nonsymmetric_systems_with_complex_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let k = rng.random_range(1..=7);
            let d = rng.random_range(1..=7);
            let a = random(k, k, &mut rng);
            let mut b = random(d, d, &mut rng);
            // Keep the spectra of a and -b apart.
            b.add_diagonal(4.0);
            let c = random(k, d, &mut rng);
            let w = solve_sylvester(&a, &b, &c).unwrap();
            let res = sylvester_residual(&a, &b, &c, &w).unwrap();
            assert!(res <= 1e-8 * (1.0 + c.frobenius_norm()), "residual {res}");
            let o = solve_sylvester_oracle(&a, &b, &c).unwrap();
            assert!(w.sub(&o).unwrap().max_abs() <= 1e-8);
        }
    }

    #[test]
    fn shared_eigenvalue_is_singular() {
        let a = DenseMatrix::identity(2);
        let b = DenseMatrix::identity(2).scale(-1.0);
        let c = DenseMatrix::identity(2);
        let err = solve_sylvester(&a, &b, &c).unwrap_err();
        match err {
            ClaError::Singular(msg) => {
                assert!(msg.contains("eigenvalue 1e0") && msg.contains("-1e0"))
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            solve_sylvester_oracle(&a, &b, &c),
            Err(ClaError::Singular(_))
        ));
    }

    #[test]
    fn dimension_and_capacity_errors() {
        let a = DenseMatrix::identity(2);
        let b = DenseMatrix::identity(3);
        assert!(matches!(
            solve_sylvester(&a, &b, &DenseMatrix::zeros(3, 2)),
            Err(ClaError::Dimension(_))
        ));
        let big_a = DenseMatrix::identity(65);
        let big_b = DenseMatrix::identity(64);
        assert!(matches!(
            solve_sylvester_oracle(&big_a, &big_b, &DenseMatrix::zeros(65, 64)),
            Err(ClaError::Capacity(_))
        ));
    }
}

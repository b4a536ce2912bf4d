//! Real Schur decomposition `M = Q T Qᵀ`.
//!
//! Householder reduction to upper Hessenberg form followed by the Francis
//! implicit double-shift QR iteration. Real eigenvalue pairs that deflate as a
//! 2x2 block are split by a Givens rotation, so the remaining 2x2 diagonal
//! blocks of `T` always carry a complex-conjugate pair.

use crate::error::{ClaError, Result};
use crate::linalg::DenseMatrix;

/// Orthogonal `q` and quasi-upper-triangular `t` with `m = q t qᵀ`.
#[derive(Clone, Debug)]
pub struct SchurFactorization {
    pub q: DenseMatrix,
    pub t: DenseMatrix,
}

impl SchurFactorization {
    /// Sizes of the diagonal blocks of `t`, top to bottom (each 1 or 2).
    pub fn blocks(&self) -> Vec<usize> {
        diagonal_blocks(&self.t)
    }

    /// Eigenvalues read off the diagonal blocks as `(re, im)` pairs.
    pub fn eigenvalues(&self) -> Vec<(f64, f64)> {
        let t = &self.t;
        let mut out = Vec::with_capacity(t.rows());
        let mut i = 0;
        for size in self.blocks() {
            if size == 1 {
                out.push((t[(i, i)], 0.0));
            } else {
                let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
                let half_tr = 0.5 * (a + d);
                let disc = 0.25 * (a - d) * (a - d) + b * c;
                let im = (-disc).max(0.0).sqrt();
                out.push((half_tr, im));
                out.push((half_tr, -im));
            }
            i += size;
        }
        out
    }
}

/// Iteration budget per unit of matrix order.
pub const SCHUR_ITERATIONS_PER_ROW: usize = 100;

pub(crate) fn diagonal_blocks(t: &DenseMatrix) -> Vec<usize> {
    let n = t.rows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            blocks.push(2);
            i += 2;
        } else {
            blocks.push(1);
            i += 1;
        }
    }
    blocks
}

/// Computes the real Schur form of a square matrix.
///
/// Fails with a convergence error after `100·n` QR sweeps.
pub fn real_schur(m: &DenseMatrix) -> Result<SchurFactorization> {
    if !m.is_square() {
        return Err(ClaError::Dimension(format!(
            "real_schur needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(ClaError::Numeric("real_schur input is not finite".into()));
    }
    let n = m.rows();
    let mut h = m.clone();
    let mut v = hessenberg(&mut h);
    let complex_pairs = francis_qr(&mut h, &mut v)?;

    // Clean everything below the subdiagonal and every subdiagonal entry that
    // is not inside a complex 2x2 block.
    for i in 0..n {
        for j in 0..i {
            if j + 1 == i && complex_pairs[j] {
                continue;
            }
            h[(i, j)] = 0.0;
        }
    }
    let t = h.ensure_finite("real_schur")?;
    Ok(SchurFactorization { q: v, t })
}

/// Reduces `h` to upper Hessenberg form in place, returning the accumulated
/// orthogonal transform.
fn hessenberg(h: &mut DenseMatrix) -> DenseMatrix {
    let n = h.rows();
    let mut ort = vec![0.0; n];
    if n > 2 {
        let high = n - 1;
        for m in 1..high {
            let scale: f64 = (m..=high).map(|i| h[(i, m - 1)].abs()).sum();
            if scale == 0.0 {
                continue;
            }
            let mut hh = 0.0;
            for i in (m..=high).rev() {
                ort[i] = h[(i, m - 1)] / scale;
                hh += ort[i] * ort[i];
            }
            let mut g = hh.sqrt();
            if ort[m] > 0.0 {
                g = -g;
            }
            hh -= ort[m] * g;
            ort[m] -= g;

            for j in m..n {
                let mut f = 0.0;
                for i in (m..=high).rev() {
                    f += ort[i] * h[(i, j)];
                }
                f /= hh;
                for i in m..=high {
                    h[(i, j)] -= f * ort[i];
                }
            }
            for i in 0..=high {
                let mut f = 0.0;
                for j in (m..=high).rev() {
                    f += ort[j] * h[(i, j)];
                }
                f /= hh;
                for j in m..=high {
                    h[(i, j)] -= f * ort[j];
                }
            }
            ort[m] *= scale;
            h[(m, m - 1)] = scale * g;
        }
    }

    let mut v = DenseMatrix::identity(n);
    if n > 2 {
        let high = n - 1;
        for m in (1..high).rev() {
            if h[(m, m - 1)] == 0.0 {
                continue;
            }
            for i in (m + 1)..=high {
                ort[i] = h[(i, m - 1)];
            }
            for j in m..=high {
                let mut g = 0.0;
                for i in m..=high {
                    g += ort[i] * v[(i, j)];
                }
                g = (g / ort[m]) / h[(m, m - 1)];
                for i in m..=high {
                    v[(i, j)] += g * ort[i];
                }
            }
        }
    }
    // The Householder vectors were parked below the subdiagonal.
    for i in 0..n {
        for j in 0..i.saturating_sub(1) {
            h[(i, j)] = 0.0;
        }
    }
    v
}

/// Francis double-shift QR on an upper Hessenberg matrix. Returns a flag per
/// index `j` that is true when rows `j, j+1` form a complex 2x2 block.
fn francis_qr(h: &mut DenseMatrix, v: &mut DenseMatrix) -> Result<Vec<bool>> {
    let nn = h.rows();
    let mut complex_pairs = vec![false; nn];
    if nn == 0 {
        return Ok(complex_pairs);
    }
    let low = 0usize;
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z);
    let (mut w, mut x, mut y);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }

    let budget = SCHUR_ITERATIONS_PER_ROW * nn;
    let mut total_iter = 0usize;
    let mut iter = 0usize;
    let mut n = nn as isize - 1;

    while n >= low as isize {
        let nu = n as usize;
        // Look for a single small subdiagonal element.
        let mut l = nu;
        while l > low {
            s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].abs() <= eps * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            // One root.
            h[(nu, nu)] += exshift;
            if nu > 0 {
                h[(nu, nu - 1)] = 0.0;
            }
            n -= 1;
            iter = 0;
        } else if l == nu - 1 {
            // Two roots.
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            p = (h[(nu - 1, nu - 1)] - h[(nu, nu)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[(nu, nu)] += exshift;
            h[(nu - 1, nu - 1)] += exshift;

            if q >= 0.0 {
                // Real pair: rotate the block to upper triangular.
                z = if p >= 0.0 { p + z } else { p - z };
                x = h[(nu, nu - 1)];
                s = x.abs() + z.abs();
                if s == 0.0 {
                    // Already triangular (e.g. a zero block).
                    h[(nu, nu - 1)] = 0.0;
                    if nu >= 2 {
                        h[(nu - 1, nu - 2)] = 0.0;
                    }
                    n -= 2;
                    iter = 0;
                    continue;
                }
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in (nu - 1)..nn {
                    z = h[(nu - 1, j)];
                    h[(nu - 1, j)] = q * z + p * h[(nu, j)];
                    h[(nu, j)] = q * h[(nu, j)] - p * z;
                }
                for i in 0..=nu {
                    z = h[(i, nu - 1)];
                    h[(i, nu - 1)] = q * z + p * h[(i, nu)];
                    h[(i, nu)] = q * h[(i, nu)] - p * z;
                }
                for i in 0..nn {
                    z = v[(i, nu - 1)];
                    v[(i, nu - 1)] = q * z + p * v[(i, nu)];
                    v[(i, nu)] = q * v[(i, nu)] - p * z;
                }
                h[(nu, nu - 1)] = 0.0;
            } else {
                complex_pairs[nu - 1] = true;
            }
            if nu >= 2 {
                h[(nu - 1, nu - 2)] = 0.0;
            }
            n -= 2;
            iter = 0;
        } else {
            total_iter += 1;
            if total_iter > budget {
                return Err(ClaError::Convergence {
                    iterations: budget,
                    context: format!("real Schur QR sweeps on a {nn}x{nn} matrix"),
                });
            }
            x = h[(nu, nu)];
            y = 0.0;
            w = 0.0;
            if l < nu {
                y = h[(nu - 1, nu - 1)];
                w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            }

            // Exceptional shifts break cycles.
            if iter == 10 {
                exshift += x;
                for i in low..=nu {
                    h[(i, i)] -= x;
                }
                s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=nu {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;

            // Look for two consecutive small subdiagonal elements.
            let mut m = nu - 2;
            loop {
                z = h[(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in (m + 2)..=nu {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            // Double QR step on rows l..=n and columns m..=n.
            let mut k = m;
            while k < nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[(k, j)] + q * h[(k + 1, j)];
                        if notlast {
                            p += r * h[(k + 2, j)];
                            h[(k + 2, j)] -= p * z;
                        }
                        h[(k, j)] -= p * x;
                        h[(k + 1, j)] -= p * y;
                    }
                    for i in 0..=nu.min(k + 3) {
                        p = x * h[(i, k)] + y * h[(i, k + 1)];
                        if notlast {
                            p += z * h[(i, k + 2)];
                            h[(i, k + 2)] -= p * r;
                        }
                        h[(i, k)] -= p;
                        h[(i, k + 1)] -= p * q;
                    }
                    for i in 0..nn {
                        p = x * v[(i, k)] + y * v[(i, k + 1)];
                        if notlast {
                            p += z * v[(i, k + 2)];
                            v[(i, k + 2)] -= p * r;
                        }
                        v[(i, k)] -= p;
                        v[(i, k + 1)] -= p * q;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(complex_pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_factorization(m: &DenseMatrix, f: &SchurFactorization) {
        let n = m.rows();
        let qtq = f.q.t_matmul(&f.q).unwrap();
        let orth = qtq.sub(&DenseMatrix::identity(n)).unwrap().frobenius_norm();
        assert!(orth <= 1e-10 * n as f64, "orthogonality residual {orth}");
        let recon = f.q.matmul(&f.t).unwrap().matmul_t(&f.q).unwrap();
        let res = recon.sub(m).unwrap().frobenius_norm();
        assert!(
            res <= 1e-8 * (1.0 + m.frobenius_norm()),
            "reconstruction residual {res}"
        );
        for i in 0..n {
            for j in 0..i.saturating_sub(1) {
                assert_eq!(f.t[(i, j)], 0.0);
            }
        }
        for i in 1..n.saturating_sub(1) {
            assert!(
                f.t[(i, i - 1)] == 0.0 || f.t[(i + 1, i)] == 0.0,
                "adjacent nonzero subdiagonal entries at {i}"
            );
        }
    }

    fn random(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_is_its_own_schur_form() {
        let f = real_schur(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(f.q, DenseMatrix::identity(3));
        assert_eq!(f.t, DenseMatrix::identity(3));
    }

    #[test]
    fn diagonal_input_keeps_its_eigenvalues() {
        let m = DenseMatrix::from_diag(&[3.0, 1.0, 2.0]);
        let f = real_schur(&m).unwrap();
        let mut diag: Vec<f64> = (0..3).map(|i| f.t[(i, i)]).collect();
        diag.sort_by(f64::total_cmp);
        assert_eq!(diag, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn random_six_by_six_reconstructs() {
        let m = random(6, 6);
        let f = real_schur(&m).unwrap();
        check_factorization(&m, &f);
    }

    #[test]
    fn rotation_has_complex_block() {
        let m = DenseMatrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]);
        let f = real_schur(&m).unwrap();
        check_factorization(&m, &f);
        assert_eq!(f.blocks(), vec![2]);
        let ev = f.eigenvalues();
        assert!((ev[0].0).abs() < 1e-14 && (ev[0].1.abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn many_random_sizes_reconstruct() {
        for n in 1..=12 {
            for seed in 0..5 {
                let m = random(n, 100 * n as u64 + seed);
                let f = real_schur(&m).unwrap();
                check_factorization(&m, &f);
            }
        }
    }

    #[test]
    fn degenerate_and_larger_inputs() {
        let zero = DenseMatrix::zeros(4, 4);
        check_factorization(&zero, &real_schur(&zero).unwrap());

        let jordan =
            DenseMatrix::from_rows(&[&[2.0, 1.0, 0.0], &[0.0, 2.0, 1.0], &[0.0, 0.0, 2.0]]);
        check_factorization(&jordan, &real_schur(&jordan).unwrap());

        let ones = DenseMatrix::from_fn(5, 5, |_, _| 1.0);
        check_factorization(&ones, &real_schur(&ones).unwrap());

        let big = random(60, 9);
        check_factorization(&big, &real_schur(&big).unwrap());

        let g = random(40, 10);
        let sym = g.matmul_t(&g).unwrap();
        let f = real_schur(&sym).unwrap();
        check_factorization(&sym, &f);
        assert!(f.blocks().iter().all(|&b| b == 1));
    }

    #[test]
    fn non_square_is_rejected() {
        let m = DenseMatrix::zeros(2, 3);
        assert!(matches!(real_schur(&m), Err(ClaError::Dimension(_))));
    }

    #[test]
    fn deterministic_for_fixed_input() {
        let m = random(7, 42);
        let a = real_schur(&m).unwrap();
        let b = real_schur(&m).unwrap();
        assert_eq!(a.q.as_slice(), b.q.as_slice());
        assert_eq!(a.t.as_slice(), b.t.as_slice());
    }
}

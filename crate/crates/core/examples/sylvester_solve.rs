//! Solves `A W + W B = C` with the Schur-based solver and checks it against
//! the dense Kronecker reference.

use cla_core::linalg::{real_schur, solve_sylvester, solve_sylvester_oracle, sylvester_residual};
use cla_core::DenseMatrix;

fn main() -> cla_core::Result<()> {
    // A = Y Yᵀ-like (class counts), B = λ X Xᵀ-like: both SPD.
    let a = DenseMatrix::from_diag(&[25.0, 25.0, 25.0]);
    let x = DenseMatrix::from_fn(4, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
    let mut b = x.matmul_t(&x)?;
    b.add_diagonal(0.5);
    let c = DenseMatrix::from_fn(3, 4, |i, j| (i as f64 + 1.0) * (j as f64 - 1.5));

    let schur = real_schur(&b)?;
    println!(
        "eigenvalues of B: {:?}",
        schur.eigenvalues().iter().map(|e| e.0).collect::<Vec<_>>()
    );

    let w = solve_sylvester(&a, &b, &c)?;
    let reference = solve_sylvester_oracle(&a, &b, &c)?;
    println!("W =\n{w}");
    println!(
        "residual ||AW + WB - C|| = {:.3e}",
        sylvester_residual(&a, &b, &c, &w)?
    );
    println!("max |W - W_kron| = {:.3e}", w.sub(&reference)?.max_abs());
    Ok(())
}

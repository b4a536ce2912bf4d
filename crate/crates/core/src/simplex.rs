//! Convex quadratic minimization over the probability simplex.
//!
//! Objective `f(w) = wᵀ G w − 2 hᵀ w + c` with `G` symmetric PSD, minimized over
//! `{w ≥ 0, Σ w = 1}` by projected gradient with Armijo backtracking, started
//! at the uniform point.

use crate::error::{ClaError, Result};
use crate::linalg::solve::Lu;
use crate::linalg::DenseMatrix;

/// Accuracy the returned objective is held to against a fine grid search.
pub const OBJECTIVE_TOLERANCE: f64 = 1e-9;
/// Projected gradient stops once a step lowers the objective by less than
/// this, relative to `1 + |f|`.
const STALL_TOLERANCE: f64 = 1e-15;
pub const MAX_ITERATIONS: usize = 10_000;

/// Quadratic `wᵀ G w − 2 hᵀ w + c`.
#[derive(Clone, Debug)]
pub struct SimplexQuadratic {
    pub gram: DenseMatrix,
    pub linear: Vec<f64>,
    pub constant: f64,
}

#[derive(Clone, Debug)]
pub struct SimplexSolution {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl SimplexQuadratic {
    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        let n = self.dim();
        let mut quad = 0.0;
        for i in 0..n {
            quad += w[i] * crate::linalg::dense::dot(self.gram.row(i), w);
        }
        let lin: f64 = self.linear.iter().zip(w).map(|(h, x)| h * x).sum();
        quad - 2.0 * lin + self.constant
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| 2.0 * crate::linalg::dense::dot(self.gram.row(i), w) - 2.0 * self.linear[i])
            .collect()
    }

    /// Minimizes over the simplex.
    pub fn minimize(&self) -> Result<SimplexSolution> {
        let n = self.dim();
        if n == 0 || self.gram.shape() != (n, n) {
            return Err(ClaError::Dimension(format!(
                "simplex QP with {}x{} gram matrix and {n} linear terms",
                self.gram.rows(),
                self.gram.cols()
            )));
        }
        let mut w = vec![1.0 / n as f64; n];
        let mut f = self.value(&w);
        if !f.is_finite() {
            return Err(ClaError::Numeric(format!("simplex objective is {f}")));
        }
        if n == 1 {
            return Ok(SimplexSolution {
                weights: vec![1.0],
                objective: f,
                iterations: 0,
            });
        }
        // A Lipschitz bound for the gradient seeds the step size.
        let lipschitz = 2.0
            * (0..n)
                .map(|i| self.gram.row(i).iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max);
        if lipschitz == 0.0 && self.linear.iter().all(|&h| h == 0.0) {
            return Ok(SimplexSolution {
                weights: w,
                objective: f,
                iterations: 0,
            });
        }
        let mut step = if lipschitz > 0.0 {
            1.0 / lipschitz
        } else {
            1.0
        };

        let mut iterations = 0;
        while iterations < MAX_ITERATIONS {
            iterations += 1;
            let g = self.gradient(&w);
            let mut t = step * 2.0;
            let (next, f_next) = loop {
                let cand: Vec<f64> = w.iter().zip(&g).map(|(x, gi)| x - t * gi).collect();
                let cand = project_to_simplex(&cand);
                let f_cand = self.value(&cand);
                let diff: Vec<f64> = cand.iter().zip(&w).map(|(a, b)| a - b).collect();
                let lin: f64 = g.iter().zip(&diff).map(|(a, b)| a * b).sum();
                let sq: f64 = diff.iter().map(|d| d * d).sum();
                if f_cand <= f + lin + sq / (2.0 * t) + 1e-15 * (1.0 + f.abs()) || t < 1e-300 {
                    break (cand, f_cand);
                }
                t *= 0.5;
            };
            step = t;
            if !f_next.is_finite() {
                return Err(ClaError::Numeric(format!(
                    "simplex objective became {f_next}"
                )));
            }
            let moved = next.iter().zip(&w).any(|(a, b)| a != b);
            let decrease = f - f_next;
            if f_next <= f {
                w = next;
                f = f_next;
            }
            if !moved || decrease <= STALL_TOLERANCE * (1.0 + f.abs()) {
                break;
            }
        }
        if let Some((polished, f_polished)) = self.polish_on_support(&w) {
            if f_polished <= f {
                w = polished;
                f = f_polished;
            }
        }
        Ok(SimplexSolution {
            weights: w,
            objective: f,
            iterations,
        })
    }
}

impl SimplexQuadratic {
    /// Exact minimizer on the face spanned by the current support, if it is
    /// feasible. Removes the residual error of the first-order iteration.
    fn polish_on_support(&self, w: &[f64]) -> Option<(Vec<f64>, f64)> {
        let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
        let m = support.len();
        // KKT system [2 G_SS 1; 1ᵀ 0] [w; mu] = [2 h_S; 1]
        let mut kkt = DenseMatrix::zeros(m + 1, m + 1);
        let mut rhs = vec![0.0; m + 1];
        for (a, &i) in support.iter().enumerate() {
            for (b, &j) in support.iter().enumerate() {
                kkt[(a, b)] = 2.0 * self.gram[(i, j)];
            }
            kkt[(a, m)] = 1.0;
            kkt[(m, a)] = 1.0;
            rhs[a] = 2.0 * self.linear[i];
        }
        rhs[m] = 1.0;
        let lu = Lu::factor(kkt, 1e-12).ok()?;
        let sol = lu.solve_vec(&rhs);
        if sol[..m].iter().any(|&v| v.is_nan() || v < 0.0) {
            return None;
        }
        let mut out = vec![0.0; w.len()];
        for (a, &i) in support.iter().enumerate() {
            out[i] = sol[a];
        }
        let s: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= s);
        let f = self.value(&out);
        f.is_finite().then_some((out, f))
    }
}

/// Euclidean projection onto `{w ≥ 0, Σ w = 1}` (sort-based).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    // Renormalize so the sum is 1 to machine precision.
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        for x in &mut w {
            *x /= s;
        }
    }
    w
}

/// Objective values on a regular grid over the simplex for 1 to 3 weights;
/// returns the best point and value. Test and diagnostic helper.
pub fn grid_search(q: &SimplexQuadratic, resolution: usize) -> (Vec<f64>, f64) {
    let n = q.dim();
    let step = 1.0 / resolution as f64;
    let mut best = (vec![1.0 / n as f64; n], f64::INFINITY);
    let mut consider = |w: Vec<f64>| {
        let f = q.value(&w);
        if f < best.1 {
            best = (w, f);
        }
    };
    match n {
        1 => consider(vec![1.0]),
        2 => {
            for i in 0..=resolution {
                let a = i as f64 * step;
                consider(vec![a, 1.0 - a]);
            }
        }
        3 => {
            for i in 0..=resolution {
                for j in 0..=(resolution - i) {
                    let a = i as f64 * step;
                    let b = j as f64 * step;
                    consider(vec![a, b, (1.0 - a - b).max(0.0)]);
                }
            }
        }
        _ => panic!("grid search supports at most 3 weights"),
    }
    best
}

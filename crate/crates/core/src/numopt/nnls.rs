use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Solution of `min ‖A x + b − c‖₂` subject to `x ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NnlsResult {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

const KKT_TOLERANCE: f64 = 1e-8;

/// Largest violation of the optimality conditions of `min ½‖A x − d‖²`,
/// `x ≥ 0`: the gradient must vanish on positive coordinates and be
/// non-negative on zero ones.
pub fn nnls_kkt_violation(a: &DMatrix<f64>, d: &DVector<f64>, x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let xv = DVector::from_column_slice(x);
    let g = a.transpose() * (a * &xv - d);
    x.iter()
        .zip(g.iter())
        .map(|(&xi, &gi)| if xi < 0.0 { f64::INFINITY } else if xi > 0.0 { gi.abs() } else { (-gi).max(0.0) })
        .fold(0.0, f64::max)
}

fn solve_passive(a: &DMatrix<f64>, d: &DVector<f64>, passive: &[bool]) -> Vec<f64> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    let mut z = vec![0.0; passive.len()];
    if cols.is_empty() {
        return z;
    }
    let sub = a.select_columns(&cols);
    let sol = sub
        .svd(true, true)
        .solve(d, 1e-13)
        .expect("SVD was computed with both factors");
    for (k, &i) in cols.iter().enumerate() {
        z[i] = sol[k];
    }
    z
}

/// Active-set (Lawson–Hanson) non-negative least squares on the target `c − b`.
///
/// An empty basis (`A` with no columns) is allowed and yields `x = []` with
/// residual `‖b − c‖`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Result<NnlsResult> {
    let m = a.nrows();
    if b.len() != m || c.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "A has {m} rows but b has {} and c has {}",
            b.len(),
            c.len()
        )));
    }
    let k = a.ncols();
    let d = c - b;
    let mut x = vec![0.0; k];
    let mut passive = vec![false; k];
    let mut blocked = vec![false; k];
    let cap = 30 * k + 100;
    let mut iterations = 0;

    let scale = 1.0 + a.amax() * d.amax();
    let tol = 1e-13 * scale;

    loop {
        if iterations >= cap {
            return Err(Error::NoConvergence { iterations });
        }
        let xv = DVector::from_column_slice(&x);
        let w = a.transpose() * (&d - a * &xv);
        let entering = (0..k)
            .filter(|&i| !passive[i] && !blocked[i] && w[i] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]).then(j.cmp(&i)));
        let Some(j) = entering else { break };
        iterations += 1;
        passive[j] = true;
        let mut first = true;
        loop {
            let z = solve_passive(a, &d, &passive);
            if (0..k).all(|i| !passive[i] || z[i] > 0.0) {
                x = z;
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }
            if first && z[j] <= 0.0 {
                // the entering column cannot move: numerically dependent
                passive[j] = false;
                blocked[j] = true;
                break;
            }
            first = false;
            let alpha = (0..k)
                .filter(|&i| passive[i] && z[i] <= 0.0)
                .map(|i| x[i] / (x[i] - z[i]))
                .fold(f64::INFINITY, f64::min);
            for i in 0..k {
                if passive[i] {
                    x[i] += alpha * (z[i] - x[i]);
                    if x[i] <= 1e-300 || z[i] <= 0.0 && x[i] <= 1e-15 * scale {
                        x[i] = 0.0;
                        passive[i] = false;
                    }
                }
            }
            iterations += 1;
            if iterations >= cap {
                return Err(Error::NoConvergence { iterations });
            }
        }
    }
    if nnls_kkt_violation(a, &d, &x) > KKT_TOLERANCE {
        return Err(Error::NoConvergence { iterations });
    }
    let residual_norm = (a * DVector::from_column_slice(&x) - &d).norm();
    Ok(NnlsResult { x, residual_norm, iterations })
}

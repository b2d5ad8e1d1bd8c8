/// Central-difference gradient of `f` at `x` with step `h`.
pub fn finite_diff_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Largest `|a - b| / max(|b|, floor)` over components.
pub fn max_relative_error(analytic: &[f64], reference: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs() / b.abs().max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};

    #[test]
    fn square() {
        let g = finite_diff_gradient(|x| x[0] * x[0], &[3.0], 1e-6);
        assert!((g[0] - 6.0).abs() < 1e-4);
    }

    #[test]
    fn constant() {
        let g = finite_diff_gradient(|_| 2.5, &[1.0, -3.0, 0.2], 1e-6);
        assert!(g.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn quadratic_forms() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let n = 5;
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let a = &a + a.transpose();
            let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let fd = finite_diff_gradient(
                |y| {
                    let y = DVector::from_column_slice(y);
                    (y.transpose() * &a * &y)[(0, 0)]
                },
                x.as_slice(),
                1e-6,
            );
            let exact = 2.0 * &a * &x;
            for i in 0..n {
                assert!((fd[i] - exact[i]).abs() < 1e-5);
            }
        }
    }
}

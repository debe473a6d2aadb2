//! Lawson–Hanson active-set nonnegative least squares.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Largest positive component of the dual vector `A^T (b - A x)` over the
    /// zero set at exit.
    pub kkt_residual: f64,
}

fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[usize]) -> DVector<f64> {
    let sub = a.select_columns(passive);
    let svd = sub.svd(true, true);
    let z = svd
        .solve(b, 1e-14)
        .unwrap_or_else(|_| DVector::zeros(passive.len()));
    let mut full = DVector::zeros(a.ncols());
    for (value, &j) in z.iter().zip(passive) {
        full[j] = *value;
    }
    full
}

/// Minimize `||A x - b||_2` subject to `x >= 0`.
///
/// `tol` bounds the dual residual at termination; columns should be scaled to
/// comparable norms for it to be meaningful.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> NnlsSolution {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let max_outer = 3 * n + 10;
    let mut iterations = 0;

    let dual = |x: &DVector<f64>| a.transpose() * (b - a * x);
    let mut w = dual(&x);

    loop {
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let j = match candidate {
            Some(j) if w[j] > tol => j,
            _ => break,
        };
        if iterations >= max_outer {
            break;
        }
        iterations += 1;
        passive[j] = true;

        loop {
            let set: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let z = solve_passive(a, b, &set);
            if set.iter().all(|&i| z[i] > 0.0) {
                x = z;
                break;
            }
            let alpha = set
                .iter()
                .filter(|&&i| z[i] <= 0.0)
                .map(|&i| x[i] / (x[i] - z[i]))
                .fold(f64::INFINITY, f64::min);
            x += (z - &x) * alpha;
            for &i in &set {
                if x[i] <= tol * 1e-3 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
        w = dual(&x);
    }

    let kkt_residual = (0..n)
        .filter(|&j| !passive[j])
        .map(|j| w[j])
        .fold(0.0, f64::max);
    let residual_norm = (a * &x - b).norm();
    NnlsSolution {
        x,
        residual_norm,
        iterations,
        kkt_residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_optimum_is_kept() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let x_true = DVector::from_vec(vec![2.0, 3.0]);
        let b = &a * &x_true;
        let sol = nnls(&a, &b, 1e-12);
        assert!((sol.x - x_true).norm() < 1e-12);
        assert!(sol.residual_norm < 1e-12);
    }

    #[test]
    fn negative_direction_is_clamped() {
        // Least squares wants x1 < 0; NNLS must pin it at zero.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![-1.0, 2.0]);
        let sol = nnls(&a, &b, 1e-12);
        assert_eq!(sol.x[0], 0.0);
        assert!((sol.x[1] - 2.0).abs() < 1e-12);
        assert!((sol.residual_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_negative_target_gives_zero() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![-1.0, -2.0]);
        let sol = nnls(&a, &b, 1e-12);
        assert_eq!(sol.x[0], 0.0);
    }
}

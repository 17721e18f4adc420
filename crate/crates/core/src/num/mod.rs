//! Numerical building blocks shared by the evaluation modules.

mod quad;
mod search;
mod sums;

pub(crate) use quad::gauss7;
pub use quad::{integrate, integrate_to_infinity, Integral};
pub use search::{golden_section, Minimum};
pub use sums::{lattice_sum, LatticeTerm, PowerTail};

/// Least-squares fit of `y ≈ Σ_k c_k · basis_k(x)` via the normal equations.
///
/// Intended for two or three smooth basis functions; returns the
/// coefficients and the maximal relative residual.
pub fn least_squares(xs: &[f64], ys: &[f64], basis: &[&dyn Fn(f64) -> f64]) -> (Vec<f64>, f64) {
    let m = basis.len();
    let mut a = vec![vec![0.0; m + 1]; m];
    for (&x, &y) in xs.iter().zip(ys) {
        let row: Vec<f64> = basis.iter().map(|b| b(x)).collect();
        for i in 0..m {
            for j in 0..m {
                a[i][j] += row[i] * row[j];
            }
            a[i][m] += row[i] * y;
        }
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let coef: Vec<f64> = (0..m).map(|i| a[i][m] / a[i][i]).collect();
    let resid = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let fit: f64 = basis.iter().zip(&coef).map(|(b, c)| c * b(x)).sum();
            ((fit - y) / y).abs()
        })
        .fold(0.0, f64::max);
    (coef, resid)
}

/// Pearson coefficient of determination of a fitted series.
pub fn r_squared(ys: &[f64], fitted: &[f64]) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = ys.iter().zip(fitted).map(|(y, f)| (y - f).powi(2)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

/// Mean and standard error of the mean of replicate estimates.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let floor = 1e-12 * mean.abs();
    (mean, (var / n).sqrt().max(floor))
}

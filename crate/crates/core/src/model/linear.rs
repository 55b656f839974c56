use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LinearFit {
    pub slopes: Vec<f64>,
    pub intercept: f64,
    pub rank: usize,
}

/// Ordinary least squares with an intercept. Columns are centered first and
/// the minimum-norm solution is taken, so constant columns get zero slope and
/// collinear columns share weight evenly.
pub fn fit_linear(x: &[Vec<f64>], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n == 0 || n != y.len() {
        return Err(Error::InsufficientData(format!("{n} rows for {} targets", y.len())));
    }
    let p = x[0].len();
    let col_mean: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if p == 0 {
        return Ok(LinearFit {
            slopes: Vec::new(),
            intercept: y_mean,
            rank: 0,
        });
    }
    let a = DMatrix::from_fn(n, p, |i, j| x[i][j] - col_mean[j]);
    let b = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let svd = a.svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = (max_sv * (n.max(p) as f64) * f64::EPSILON).max(1e-300);
    let rank = svd.singular_values.iter().filter(|s| **s > eps).count();
    let constant = (0..p).filter(|&j| x.iter().all(|r| r[j] == x[0][j])).count();
    if rank + constant < p {
        log::debug!("linear design is rank deficient (rank {rank} of {p}); using the minimum-norm solution");
    }
    let w = svd
        .solve(&b, eps)
        .map_err(|e| Error::InsufficientData(format!("least squares failed: {e}")))?;
    let slopes: Vec<f64> = w.iter().copied().collect();
    let intercept = y_mean - slopes.iter().zip(&col_mean).map(|(s, m)| s * m).sum::<f64>();
    Ok(LinearFit { slopes, intercept, rank })
}

impl LinearFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.slopes.iter().zip(x).map(|(s, v)| s * v).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_noiseless_plane() {
        let w = [0.5, -1.25, 2.0];
        let b = 3.0;
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i % 5) as f64, ((i * 7) % 11) as f64, ((i * 3) % 4) as f64 * 0.5])
            .collect();
        let y: Vec<f64> = x.iter().map(|r| b + r.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>()).collect();
        let fit = fit_linear(&x, &y).unwrap();
        for (got, want) in fit.slopes.iter().zip(&w) {
            assert!((got - want).abs() < 1e-6);
        }
        assert!((fit.intercept - b).abs() < 1e-6);
    }

    #[test]
    fn constant_target_gives_intercept_only() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![(i % 2) as f64, 1.0, i as f64]).collect();
        let fit = fit_linear(&x, &[4.5; 10]).unwrap();
        assert!((fit.intercept - 4.5).abs() < 1e-9);
        assert!(fit.slopes.iter().all(|s| s.abs() < 1e-9));
    }

    #[test]
    fn duplicated_rows_leave_fit_unchanged() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![(i % 3) as f64, ((i * 5) % 7) as f64]).collect();
        let y: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin() + 2.0).collect();
        let once = fit_linear(&x, &y).unwrap();
        let x2: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
        let y2: Vec<f64> = y.iter().chain(&y).copied().collect();
        let twice = fit_linear(&x2, &y2).unwrap();
        for (a, b) in once.slopes.iter().zip(&twice.slopes) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((once.intercept - twice.intercept).abs() < 1e-9);
    }

    #[test]
    fn collinear_columns_split_weight() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64).collect();
        let fit = fit_linear(&x, &y).unwrap();
        assert_eq!(fit.rank, 1);
        assert!((fit.slopes[0] - 1.0).abs() < 1e-9 && (fit.slopes[1] - 1.0).abs() < 1e-9);
    }
}

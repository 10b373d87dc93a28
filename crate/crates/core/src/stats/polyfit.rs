use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `m` Chebyshev points of the first kind on `[-half, half]`, ascending.
pub fn chebyshev_nodes(m: usize, half: f64) -> Vec<f64> {
    (0..m)
        .rev()
        .map(|j| half * (std::f64::consts::PI * (2 * j + 1) as f64 / (2 * m) as f64).cos())
        .collect()
}

fn chebyshev_values(x: f64, max_degree: usize) -> Vec<f64> {
    let mut t = vec![1.0; max_degree + 1];
    if max_degree >= 1 {
        t[1] = x;
    }
    for k in 2..=max_degree {
        t[k] = 2.0 * x * t[k - 1] - t[k - 2];
    }
    t
}

fn multi_indices(vars: usize, axis_degree: usize, total_degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..vars {
        out = out
            .into_iter()
            .flat_map(|idx: Vec<usize>| {
                let used: usize = idx.iter().sum();
                (0..=axis_degree.min(total_degree - used)).map(move |a| {
                    let mut next = idx.clone();
                    next.push(a);
                    next
                })
            })
            .collect();
    }
    out
}

/// Least-squares fit in the tensor Chebyshev basis `Π T_{a_i}(u_i / half)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChebyshevFit {
    pub half: f64,
    pub indices: Vec<Vec<usize>>,
    pub coefficients: Vec<f64>,
    /// `||A c - y|| / ||y||` on the sample points.
    pub relative_residual: f64,
}

impl ChebyshevFit {
    pub fn eval(&self, u: &[f64]) -> f64 {
        let max = self.indices.iter().flatten().copied().max().unwrap_or(0);
        let tables: Vec<Vec<f64>> = u.iter().map(|&x| chebyshev_values(x / self.half, max)).collect();
        self.indices
            .iter()
            .zip(&self.coefficients)
            .map(|(idx, c)| c * idx.iter().enumerate().map(|(v, &a)| tables[v][a]).product::<f64>())
            .sum()
    }

    /// Largest total degree carrying a coefficient above `rel_tol * max |c|`.
    pub fn degree(&self, rel_tol: f64) -> usize {
        let cmax = self.coefficients.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        self.indices
            .iter()
            .zip(&self.coefficients)
            .filter(|(_, c)| c.abs() > rel_tol * cmax)
            .map(|(idx, _)| idx.iter().sum())
            .max()
            .unwrap_or(0)
    }
}

/// Fit `values` at `points` with per-axis degree `axis_degree` and total
/// degree at most `total_degree`.
pub fn fit_tensor_chebyshev(
    points: &[Vec<f64>],
    values: &[f64],
    half: f64,
    axis_degree: usize,
    total_degree: usize,
) -> Result<ChebyshevFit> {
    let vars = points.first().map_or(0, |p| p.len());
    if points.len() != values.len() || points.iter().any(|p| p.len() != vars) {
        return Err(Error::DimensionMismatch { expected: points.len(), got: values.len() });
    }
    let indices = multi_indices(vars, axis_degree, total_degree);
    if indices.len() > points.len() {
        return Err(Error::InvalidParameter { name: "points", reason: format!("{} points for {} basis functions", points.len(), indices.len()) });
    }
    let a = DMatrix::from_fn(points.len(), indices.len(), |r, c| {
        indices[c].iter().enumerate().map(|(v, &deg)| chebyshev_values(points[r][v] / half, deg)[deg]).product()
    });
    let y = DVector::from_column_slice(values);
    let coeffs = a.clone().svd(true, true).solve(&y, 1e-14).map_err(|e| Error::Precondition(e.to_string()))?;
    let ynorm = y.norm();
    let relative_residual = if ynorm == 0.0 { (&a * &coeffs).norm() } else { (&a * &coeffs - &y).norm() / ynorm };
    Ok(ChebyshevFit { half, indices, coefficients: coeffs.iter().copied().collect(), relative_residual })
}

/// Tensor grid of `nodes` in `vars` dimensions.
pub fn tensor_grid(nodes: &[f64], vars: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for _ in 0..vars {
        out = out
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                nodes.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::polyfit::{chebyshev_nodes, fit_tensor_chebyshev, tensor_grid};
use super::{mean_stderr, run_trials};
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::linalg;
use crate::model::{build_hamiltonian, DisorderField, ModelParams};
use crate::rng::trial_rng;

/// Largest block handled by the probes.
pub const MAX_PROBE_VOLUME: usize = 3;
/// Probe grids cover `[-2, 2]` per axis, which contains the anchor points.
const GRID_HALF: f64 = 2.0;
/// Fits must reproduce the samples to this relative accuracy.
pub const FIT_TOLERANCE: f64 = 1e-8;

/// A block without collar: its matrix is `H` restricted to the block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeBlock {
    pub dims: Vec<usize>,
    pub gamma: f64,
}

impl ProbeBlock {
    pub fn new(dims: Vec<usize>, gamma: f64) -> Result<Self> {
        let lat = Lattice::new(dims.clone())?;
        ModelParams::new(gamma)?;
        if lat.num_positions() > MAX_PROBE_VOLUME {
            return Err(Error::ProbeTooLarge(format!("block volume {} exceeds {MAX_PROBE_VOLUME}", lat.num_positions())));
        }
        Ok(Self { dims, gamma })
    }

    pub fn volume(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn matrix(&self, u: &[f64]) -> DMatrix<f64> {
        let lat = Lattice::new(self.dims.clone()).expect("validated");
        let field = DisorderField::from_values(lat, u.to_vec(), 0).expect("finite u");
        build_hamiltonian(&field, &ModelParams::new(self.gamma).expect("validated")).into_entries()
    }

    /// `det(M(u) - E)`.
    pub fn determinant(&self, u: &[f64], e: f64) -> f64 {
        let m = self.matrix(u);
        (m - DMatrix::identity(2 * u.len(), 2 * u.len()) * e).determinant()
    }

    /// `Π_{i<j} (λ_i - λ_j)^2` of `M(u)`.
    pub fn discriminant(&self, u: &[f64]) -> f64 {
        let l = linalg::sym_eigenvalues(&self.matrix(u));
        let mut prod = 1.0;
        for i in 0..l.len() {
            for j in i + 1..l.len() {
                prod *= (l[i] - l[j]).powi(2);
            }
        }
        prod
    }

    pub fn min_gap(&self, u: &[f64]) -> f64 {
        linalg::min_spacing(&linalg::sym_eigenvalues(&self.matrix(u)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeKind {
    Determinant,
    Discriminant,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorCheck {
    pub point: Vec<f64>,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailPoint {
    pub threshold: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub envelope: f64,
    pub n_samples: u64,
    /// `None` when the envelope is at least 1.
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolynomialProbe {
    pub kind: ProbeKind,
    pub block: ProbeBlock,
    #[serde(rename = "E")]
    pub energy: Option<f64>,
    pub points_per_axis: usize,
    pub grid_points: usize,
    pub degree_bound: usize,
    pub fitted_degree: usize,
    /// Relative residual of the fit restricted to the degree bound.
    pub residual: f64,
    pub anchor: AnchorCheck,
    /// Largest deviation from the single-position closed form, when `n = 1`.
    pub closed_form_error: Option<f64>,
    pub tail: Vec<TailPoint>,
}

struct FitSummary {
    points_per_axis: usize,
    grid_points: usize,
    fitted_degree: usize,
    residual: f64,
    grid: Vec<Vec<f64>>,
    values: Vec<f64>,
}

/// Sample on a tensor grid with one point per axis beyond the interpolation
/// count, read off the degree from a free fit, then refit inside the bound.
fn fit_probe(n: usize, axis_degree: usize, total_bound: usize, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<FitSummary> {
    let points_per_axis = axis_degree + 2;
    let grid = tensor_grid(&chebyshev_nodes(points_per_axis, GRID_HALF), n);
    let values: Vec<f64> = grid.iter().map(|u| f(u)).collect();
    let free = fit_tensor_chebyshev(&grid, &values, GRID_HALF, axis_degree + 1, usize::MAX / 2)?;
    let bounded = fit_tensor_chebyshev(&grid, &values, GRID_HALF, axis_degree, total_bound)?;
    if bounded.relative_residual > FIT_TOLERANCE {
        return Err(Error::FitResidual { residual: bounded.relative_residual, tolerance: FIT_TOLERANCE });
    }
    Ok(FitSummary {
        points_per_axis,
        grid_points: grid.len(),
        fitted_degree: free.degree(1e-9),
        residual: bounded.relative_residual,
        grid,
        values,
    })
}

fn uniform_cube(seed: u64, trial: u64, n: usize) -> Vec<f64> {
    let mut rng = trial_rng(seed, trial);
    (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

fn tail_point(hits: &[f64], threshold: f64, envelope: f64) -> TailPoint {
    let (empirical, stderr) = mean_stderr(hits);
    TailPoint {
        threshold,
        empirical,
        stderr,
        envelope,
        n_samples: hits.len() as u64,
        pass: (envelope < 1.0).then(|| empirical <= envelope + 3.0 * stderr),
    }
}

/// Determinant probe `Δ(u) = det(F~ - E)`: degree at most `2n`, anchor
/// `|Δ(2, ..., 2)| >= 2^n`, and small-value frequency
/// `P(|Δ| <= eps_k 3^(2n))` against `eps_k^(1/(2n)) 9 n 2^n`.
pub fn probe_determinant(block: &ProbeBlock, e: f64, eps_grid: &[f64], n_samples: u64, seed: u64) -> Result<PolynomialProbe> {
    let n = block.volume();
    if n > MAX_PROBE_VOLUME {
        return Err(Error::ProbeTooLarge(format!("block volume {n}")));
    }
    let fit = fit_probe(n, 2, 2 * n, |u| block.determinant(u, e))?;
    let closed_form_error = (n == 1).then(|| {
        fit.grid.iter().zip(&fit.values).map(|(u, v)| (v - (e * e - u[0] * u[0] - 1.0)).abs()).fold(0.0, f64::max)
    });
    let u0 = vec![2.0; n];
    let value = block.determinant(&u0, e);
    let bound = 2f64.powi(n as i32);
    let draws = run_trials(n_samples, |i| block.determinant(&uniform_cube(seed, i, n), e).abs());
    let tail = eps_grid
        .iter()
        .map(|&eps| {
            let cut = eps * 9f64.powi(n as i32);
            let hits: Vec<f64> = draws.iter().map(|&d| if d <= cut { 1.0 } else { 0.0 }).collect();
            tail_point(&hits, eps, eps.powf(1.0 / (2.0 * n as f64)) * 9.0 * n as f64 * 2f64.powi(n as i32))
        })
        .collect();
    Ok(PolynomialProbe {
        kind: ProbeKind::Determinant,
        block: block.clone(),
        energy: Some(e),
        points_per_axis: fit.points_per_axis,
        grid_points: fit.grid_points,
        degree_bound: 2 * n,
        fitted_degree: fit.fitted_degree,
        residual: fit.residual,
        anchor: AnchorCheck { point: u0, value, bound, pass: value.abs() >= bound },
        closed_form_error,
        tail,
    })
}

/// Discriminant probe `Γ(u)`: degree at most `4n^2`, anchor
/// `Γ(1, ..., n) >= (4/5)^(4n^2)`, and `P(min gap < δ)` against
/// `δ^(1/(2n^2)) 4 (4n)^(n+1)`.
pub fn probe_discriminant(block: &ProbeBlock, delta_grid: &[f64], n_samples: u64, seed: u64) -> Result<PolynomialProbe> {
    let n = block.volume();
    if n > 2 {
        return Err(Error::ProbeTooLarge(format!("discriminant fit for block volume {n} needs a {}-point grid", (8 * n - 2).pow(n as u32))));
    }
    // Γ is degree 2(2n - 1) in the characteristic coefficients, each quadratic in one u.
    let axis_degree = 4 * (2 * n - 1);
    let fit = fit_probe(n, axis_degree, 4 * n * n, |u| block.discriminant(u))?;
    let closed_form_error = (n == 1).then(|| {
        fit.grid.iter().zip(&fit.values).map(|(u, v)| (v - 4.0 * (u[0] * u[0] + 1.0)).abs()).fold(0.0, f64::max)
    });
    let u1: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let value = block.discriminant(&u1);
    let bound = 0.8f64.powi((4 * n * n) as i32);
    let gaps = run_trials(n_samples, |i| block.min_gap(&uniform_cube(seed, i, n)));
    let nn = (n * n) as f64;
    let tail = delta_grid
        .iter()
        .map(|&delta| {
            let hits: Vec<f64> = gaps.iter().map(|&g| if g < delta { 1.0 } else { 0.0 }).collect();
            tail_point(&hits, delta, delta.powf(1.0 / (2.0 * nn)) * 4.0 * (4.0 * n as f64).powi(n as i32 + 1))
        })
        .collect();
    Ok(PolynomialProbe {
        kind: ProbeKind::Discriminant,
        block: block.clone(),
        energy: None,
        points_per_axis: fit.points_per_axis,
        grid_points: fit.grid_points,
        degree_bound: 4 * n * n,
        fitted_degree: fit.fitted_degree,
        residual: fit.residual,
        anchor: AnchorCheck { point: u1, value, bound, pass: value >= bound },
        closed_form_error,
        tail,
    })
}

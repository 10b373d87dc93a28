use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{run_trials, Estimate};
use crate::constants::ScaleConstants;
use crate::error::{Error, Result};
use crate::lattice::{components_at_scale, Lattice};
use crate::linalg;
use crate::model::{DisorderField, Instance, LabeledMatrix, ModelParams};
use crate::multiscale::{detect_resonant_positions, resonance_probability_exact, Multiscale};
use crate::rng::trial_rng;

fn sample_instance(lat: &Lattice, p: &ModelParams, seed: u64, trial: u64) -> Instance {
    Instance::new(DisorderField::sample(lat.clone(), seed, trial), *p)
}

/// Frequency with which a single `u ~ U[-1, 1]` is `eps`-resonant with `e`,
/// judged against `3 sqrt(eps)`. The exact probability is the reference.
pub fn estimate_resonance_frequency(e: f64, eps: f64, n_samples: u64, seed: u64) -> Estimate {
    let hits = run_trials(n_samples, |i| {
        let u: f64 = trial_rng(seed, i).random_range(-1.0..=1.0);
        let t = u.hypot(1.0);
        if (t - e.abs()).abs() <= eps {
            1.0
        } else {
            0.0
        }
    });
    Estimate::from_samples("resonance", vec![("E".into(), e), ("eps".into(), eps)], &hits, seed)
        .with_bound(3.0 * eps.sqrt(), true)
        .with_reference(resonance_probability_exact(e, eps))
}

/// Mean number of eigenvalues in `[e - delta/2, e + delta/2]`.
pub fn estimate_dos(lat: &Lattice, p: &ModelParams, e: f64, delta: f64, n_samples: u64, seed: u64) -> Result<Estimate> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter { name: "delta", reason: format!("must be positive, got {delta}") });
    }
    let counts = run_trials(n_samples, |i| {
        let inst = sample_instance(lat, p, seed, i);
        inst.hamiltonian.eigenvalues().iter().filter(|l| (*l - e).abs() <= delta / 2.0).count() as f64
    });
    let size = lat.num_positions() as f64;
    let bound = 4.0 * delta.sqrt() * size;
    let judged = delta > p.epsilon() && bound < 2.0 * size;
    Ok(Estimate::from_samples("dos", vec![("E".into(), e), ("delta".into(), delta)], &counts, seed).with_bound(bound, judged))
}

/// Empirical `P(min spacing < delta)` on every grid point, from one set of samples.
pub fn estimate_min_spacing_cdf(lat: &Lattice, p: &ModelParams, delta_grid: &[f64], n_samples: u64, seed: u64) -> Result<Vec<Estimate>> {
    if delta_grid.iter().any(|d| !(*d >= 0.0)) || delta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter { name: "delta_grid", reason: "must be nonnegative and strictly ascending".into() });
    }
    let spacings = run_trials(n_samples, |i| linalg::min_spacing(&sample_instance(lat, p, seed, i).hamiltonian.eigenvalues()));
    let size = lat.num_positions() as f64;
    let macro_lo = p.gamma().powf(0.25) / 4.0;
    Ok(delta_grid
        .iter()
        .map(|&delta| {
            let hits: Vec<f64> = spacings.iter().map(|&s| if s < delta { 1.0 } else { 0.0 }).collect();
            let est = Estimate::from_samples("spacing", vec![("delta".into(), delta)], &hits, seed);
            if delta > macro_lo && delta <= 1.0 {
                let bound = (2.0 * delta).sqrt() * size * size;
                est.with_bound(bound, bound < 1.0)
            } else if delta > 0.0 && delta <= macro_lo {
                let shape = size * (-(p.gamma().ln().abs().powf(0.75)) * delta.ln().abs().powf(0.25)).exp();
                est.with_reference(shape)
            } else {
                est
            }
        })
        .collect())
}

/// Eigenpairs with eigenvectors recomputed by a Schur lift from the position
/// where each one is concentrated. The lift resolves exponentially small
/// amplitudes far below the absolute accuracy of a dense eigensolver.
pub fn localized_eigenvectors(h: &LabeledMatrix) -> (Vec<f64>, Vec<DVector<f64>>) {
    let (vals, vecs) = linalg::sym_eigen(h.entries());
    let n = h.dim();
    let vectors = (0..vals.len())
        .map(|a| {
            let dense = vecs.column(a).into_owned();
            refine_by_lift(h.entries(), vals[a], &dense).filter(|v| v.dot(&dense).abs() >= 1.0 - 1e-6).unwrap_or(dense)
        })
        .collect::<Vec<_>>();
    debug_assert!(vectors.iter().all(|v| v.len() == n));
    (vals, vectors)
}

fn refine_by_lift(h: &DMatrix<f64>, lambda: f64, dense: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    if n <= 2 {
        return None;
    }
    let positions = n / 2;
    let p = (0..positions)
        .max_by(|&a, &b| {
            let wa = dense[2 * a].powi(2) + dense[2 * a + 1].powi(2);
            let wb = dense[2 * b].powi(2) + dense[2 * b + 1].powi(2);
            wa.total_cmp(&wb)
        })
        .expect("nonempty");
    let keep = [2 * p, 2 * p + 1];
    let rest: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
    let a = h.select_rows(&keep).select_columns(&keep);
    let b = h.select_rows(&keep).select_columns(&rest);
    let c = b.transpose();
    let d = h.select_rows(&rest).select_columns(&rest);
    let x = linalg::shifted_solve(&d, lambda, &c)?;
    let mut f = a - &b * &x;
    linalg::symmetrize(&mut f);
    let (fv, fvec) = linalg::sym_eigen(&f);
    let j = if (fv[1] - lambda).abs() < (fv[0] - lambda).abs() { 1 } else { 0 };
    let phi = fvec.column(j).into_owned();
    let tail = -(&x * &phi);
    let mut v = DVector::zeros(n);
    v[keep[0]] = phi[0];
    v[keep[1]] = phi[1];
    for (k, &i) in rest.iter().enumerate() {
        v[i] = tail[k];
    }
    let norm = v.norm();
    if !norm.is_finite() || norm == 0.0 {
        return None;
    }
    v /= norm;
    if v.dot(dense) < 0.0 {
        v = -v;
    }
    Some(v)
}

fn amplitude(v: &DVector<f64>, position: usize) -> f64 {
    v[2 * position].hypot(v[2 * position + 1])
}

/// `Σ_α |φ_α(y) φ_α(z)|` on one instance for every `z`, optionally restricted
/// to eigenvalues in `window = (E, delta)`.
pub fn correlator_sample(h: &LabeledMatrix, y: usize, zs: &[usize], window: Option<(f64, f64)>) -> Vec<f64> {
    let (vals, vecs) = localized_eigenvectors(h);
    zs.iter()
        .map(|&z| {
            vals.iter()
                .zip(&vecs)
                .filter(|(l, _)| window.map_or(true, |(e, d)| (*l - e).abs() <= d / 2.0))
                .map(|(_, v)| amplitude(v, y) * amplitude(v, z))
                .collect::<super::KahanSum>()
                .value()
        })
        .collect()
}

/// Correlator estimates between `y` and each of `zs`, from one set of samples.
pub fn estimate_correlator_profile(
    lat: &Lattice,
    p: &ModelParams,
    y: usize,
    zs: &[usize],
    n_samples: u64,
    seed: u64,
    window: Option<(f64, f64)>,
) -> Result<Vec<Estimate>> {
    let n = lat.num_positions();
    if y >= n || zs.iter().any(|&z| z >= n) {
        return Err(Error::InvalidParameter { name: "y/z", reason: "positions must lie in the lattice".into() });
    }
    let per_trial = run_trials(n_samples, |i| correlator_sample(&sample_instance(lat, p, seed, i).hamiltonian, y, zs, window));
    Ok(zs
        .iter()
        .enumerate()
        .map(|(j, &z)| {
            let xs: Vec<f64> = per_trial.iter().map(|t| t[j]).collect();
            let params = vec![("y".into(), y as f64), ("z".into(), z as f64), ("r".into(), lat.distance(y, z) as f64)];
            Estimate::from_samples("correlator", params, &xs, seed)
        })
        .collect())
}

pub fn estimate_correlator(
    lat: &Lattice,
    p: &ModelParams,
    y: usize,
    z: usize,
    n_samples: u64,
    seed: u64,
    window: Option<(f64, f64)>,
) -> Result<Estimate> {
    Ok(estimate_correlator_profile(lat, p, y, &[z], n_samples, seed, window)?.remove(0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelatorFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `slope / ln(gamma)`: the empirical decay constant in `gamma^(q r^chi)`.
    pub q_empirical: f64,
    pub strictly_decreasing: bool,
}

/// Least-squares line of `ln(value)` against `r^chi`.
pub fn fit_correlator_decay(points: &[(f64, f64)], chi: f64, gamma: f64) -> Result<CorrelatorFit> {
    if points.len() < 2 || points.iter().any(|(_, v)| !(*v > 0.0)) {
        return Err(Error::InvalidParameter { name: "points", reason: "need two or more positive values".into() });
    }
    let xs: Vec<f64> = points.iter().map(|(r, _)| r.powf(chi)).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(CorrelatorFit {
        slope,
        intercept,
        r_squared,
        q_empirical: slope / gamma.ln(),
        strictly_decreasing: sorted.windows(2).all(|w| w[1].1 < w[0].1),
    })
}

/// `|Σ_α |φ_α(y)|^2 - 2|` on one instance.
pub fn identity_resolution_defect(h: &LabeledMatrix, y: usize) -> f64 {
    (correlator_sample(h, y, &[y], None)[0] - 2.0).abs()
}

/// Frequency with which `x` and `y` lie in one component of `R^(k)` at `L_k`.
pub fn estimate_block_percolation(
    lat: &Lattice,
    p: &ModelParams,
    e: f64,
    k: usize,
    x: usize,
    y: usize,
    n_samples: u64,
    seed: u64,
) -> Result<Estimate> {
    let n = lat.num_positions();
    if x == y || x >= n || y >= n {
        return Err(Error::InvalidParameter { name: "x/y", reason: "need two distinct lattice positions".into() });
    }
    if k == 0 {
        return Err(Error::InvalidParameter { name: "k", reason: "scales start at 1".into() });
    }
    let sc = ScaleConstants::from_params(p);
    let results = run_trials(n_samples, |i| {
        let inst = sample_instance(lat, p, seed, i);
        let set = if k == 1 {
            Ok(detect_resonant_positions(&inst.field, e, sc.eps))
        } else {
            Multiscale::new(&inst).run(e, k).map(|s| s.last().expect("nonempty").resonant.clone())
        };
        match set {
            Ok(r) if r.contains(x) && r.contains(y) => {
                let shared = components_at_scale(&r, sc.length(k) as u64, lat).iter().any(|b| b.contains(x) && b.contains(y));
                (if shared { 1.0 } else { 0.0 }, false)
            }
            Ok(_) => (0.0, false),
            Err(_) => (1.0, true),
        }
    });
    let xs: Vec<f64> = results.iter().map(|r| r.0).collect();
    let dist = lat.distance(x, y) as f64;
    let params = vec![("E".into(), e), ("k".into(), k as f64), ("r".into(), dist)];
    let mut est = Estimate::from_samples("percolation", params, &xs, seed);
    est.failures = results.iter().filter(|r| r.1).count() as u64;
    Ok(if k == 1 {
        let bound = (12.0 * lat.dim() as f64 * sc.eps.sqrt()).powf(dist + 1.0);
        est.with_bound(bound, bound < 1.0)
    } else {
        est.with_reference(sc.eps.powf(sc.q(k) * dist.max(sc.length(k - 2)).powf(sc.chi)))
    })
}

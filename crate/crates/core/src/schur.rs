//! Schur complements of labelled symmetric matrices.
//!
//! For `K = [[A, B], [C, D]]` with `C = B^T`, the Schur complement at spectral
//! parameter `lambda` is `F = A - B (D - lambda)^{-1} C`. An eigenvector `phi`
//! of `F` with eigenvalue `lambda` lifts to the eigenvector
//! `(phi, -(D - lambda)^{-1} C phi)` of `K`; [`LiftChain`] composes these lifts
//! across nested index sets.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::linalg;
use crate::model::{LabeledMatrix, Site};

/// Relative threshold below which `D - lambda` counts as singular.
pub const SINGULAR_REL: f64 = 1e-12;

/// `(keep, complement)` split of a labelled matrix.
#[derive(Debug, Clone)]
pub struct BlockPartition<'a> {
    parent: &'a LabeledMatrix,
    keep: Vec<Site>,
    complement: Vec<Site>,
    keep_idx: Vec<usize>,
    comp_idx: Vec<usize>,
}

impl<'a> BlockPartition<'a> {
    /// `keep` must be an increasing subsequence of the parent's labels.
    pub fn new(parent: &'a LabeledMatrix, keep: &[Site]) -> Result<Self> {
        let keep_idx = parent.indices_of(keep)?;
        if keep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Precondition("keep labels must be strictly increasing".into()));
        }
        let mut comp_idx = Vec::with_capacity(parent.dim() - keep.len());
        let mut complement = Vec::with_capacity(parent.dim() - keep.len());
        for (i, &s) in parent.labels().iter().enumerate() {
            if keep_idx.binary_search(&i).is_err() {
                comp_idx.push(i);
                complement.push(s);
            }
        }
        Ok(Self { parent, keep: keep.to_vec(), complement, keep_idx, comp_idx })
    }

    pub fn parent(&self) -> &LabeledMatrix {
        self.parent
    }

    pub fn keep(&self) -> &[Site] {
        &self.keep
    }

    pub fn complement(&self) -> &[Site] {
        &self.complement
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        let e = self.parent.entries();
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| e[(rows[i], cols[j])])
    }

    pub fn a(&self) -> DMatrix<f64> {
        self.block(&self.keep_idx, &self.keep_idx)
    }

    pub fn b(&self) -> DMatrix<f64> {
        self.block(&self.keep_idx, &self.comp_idx)
    }

    pub fn c(&self) -> DMatrix<f64> {
        self.b().transpose()
    }

    pub fn d(&self) -> DMatrix<f64> {
        self.block(&self.comp_idx, &self.comp_idx)
    }
}

#[derive(Debug, Clone)]
pub struct SchurResult {
    pub f: LabeledMatrix,
    pub lambda: f64,
    /// `min |eig(D) - lambda|`; infinite when the complement is empty.
    pub gap: f64,
    pub b_norm: f64,
}

fn checked_gap(d: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    if d.nrows() == 0 {
        return Ok(f64::INFINITY);
    }
    let eig = linalg::sym_eigenvalues(d);
    let norm = eig.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let gap = eig.iter().fold(f64::INFINITY, |acc, v| acc.min((v - lambda).abs()));
    let threshold = SINGULAR_REL * norm;
    if gap <= threshold {
        return Err(Error::SingularComplement { lambda, gap, threshold });
    }
    Ok(gap)
}

/// `(D - lambda)^{-1} C` by direct solve.
fn kernel(part: &BlockPartition<'_>, lambda: f64) -> Result<(DMatrix<f64>, f64)> {
    let d = part.d();
    let gap = checked_gap(&d, lambda)?;
    let x = linalg::shifted_solve(&d, lambda, &part.c()).ok_or(Error::SingularComplement {
        lambda,
        gap,
        threshold: 0.0,
    })?;
    Ok((x, gap))
}

pub fn schur_complement(part: &BlockPartition<'_>, lambda: f64) -> Result<SchurResult> {
    let a = part.a();
    let b = part.b();
    let (x, gap) = kernel(part, lambda)?;
    let mut f = if part.complement.is_empty() { a } else { a - &b * x };
    linalg::symmetrize(&mut f);
    Ok(SchurResult {
        f: LabeledMatrix::new(part.keep.clone(), f)?,
        lambda,
        gap,
        b_norm: linalg::spectral_norm(&b),
    })
}

#[derive(Debug, Clone)]
pub struct Lifted {
    /// Vector on the parent's labels.
    pub vector: DVector<f64>,
    /// `||(F_lambda - lambda) phi|| / ||phi||` for the input.
    pub input_residual: f64,
    pub warning: Option<String>,
}

/// Extend `phi` (on the keep labels) by `-(D - lambda)^{-1} C phi`.
pub fn lift_eigenvector(
    part: &BlockPartition<'_>,
    lambda: f64,
    phi: &DVector<f64>,
    tol: f64,
) -> Result<Lifted> {
    if phi.len() != part.keep.len() {
        return Err(Error::DimensionMismatch { expected: part.keep.len(), got: phi.len() });
    }
    let norm = phi.norm();
    if norm == 0.0 {
        return Err(Error::Precondition("phi must be nonzero".into()));
    }
    let schur = schur_complement(part, lambda)?;
    let r = schur.f.entries() * phi - phi * lambda;
    let input_residual = r.norm() / norm;
    let warning = (input_residual > tol)
        .then(|| format!("input residual {input_residual:e} exceeds {tol:e}; lift is approximate"));
    let (x, _) = kernel(part, lambda)?;
    let tail = -(x * phi);
    let mut vector = DVector::zeros(part.parent.dim());
    for (k, &i) in part.keep_idx.iter().enumerate() {
        vector[i] = phi[k];
    }
    for (k, &i) in part.comp_idx.iter().enumerate() {
        vector[i] = tail[k];
    }
    Ok(Lifted { vector, input_residual, warning })
}

#[derive(Debug, Clone)]
struct LiftStage {
    parent: LabeledMatrix,
    keep: Vec<Site>,
    gap: f64,
}

/// Nested Schur complements `F^(0) = K, F^(j) = schur(F^(j-1) onto S_j)` at a
/// fixed `lambda`, with the composed eigenvector lift back to `K`'s labels.
#[derive(Debug, Clone)]
pub struct LiftChain {
    lambda: f64,
    stages: Vec<LiftStage>,
    innermost: LabeledMatrix,
}

impl LiftChain {
    /// `nested[j]` must be a subset of `nested[j - 1]` (and of `k`'s labels).
    pub fn build(k: &LabeledMatrix, nested: &[Vec<Site>], lambda: f64) -> Result<Self> {
        let mut stages = Vec::with_capacity(nested.len());
        let mut current = k.clone();
        for keep in nested {
            let part = BlockPartition::new(&current, keep)?;
            let res = schur_complement(&part, lambda)?;
            stages.push(LiftStage { parent: current, keep: keep.clone(), gap: res.gap });
            current = res.f;
        }
        Ok(Self { lambda, stages, innermost: current })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn depth(&self) -> usize {
        self.stages.len()
    }

    /// The innermost Schur complement.
    pub fn innermost(&self) -> &LabeledMatrix {
        &self.innermost
    }

    /// Schur complement after `j` stages (`j = 0` is the outer matrix).
    pub fn matrix(&self, j: usize) -> &LabeledMatrix {
        if j == self.stages.len() {
            &self.innermost
        } else {
            &self.stages[j].parent
        }
    }

    /// Complement gap `min |eig(D) - lambda|` of each stage.
    pub fn gaps(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.gap).collect()
    }

    /// Complement block `D` of stage `j` (1-based: the block eliminated to form `F^(j)`).
    pub fn complement_block(&self, j: usize) -> Result<DMatrix<f64>> {
        let s = &self.stages[j - 1];
        Ok(BlockPartition::new(&s.parent, &s.keep)?.d())
    }

    /// Lift `phi` on the innermost labels out to the outer matrix's labels.
    pub fn apply(&self, phi: &DVector<f64>) -> Result<DVector<f64>> {
        let mut v = phi.clone();
        for stage in self.stages.iter().rev() {
            let part = BlockPartition::new(&stage.parent, &stage.keep)?;
            v = lift_eigenvector(&part, self.lambda, &v, f64::INFINITY)?.vector;
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificatePair {
    pub lambda: f64,
    pub lambda_tilde: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateCounts {
    pub full: usize,
    pub reduced: usize,
}

/// Window comparison between `K` and its Schur complement `F_E`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateReport {
    #[serde(rename = "E")]
    pub e: f64,
    pub eps: f64,
    pub gamma_bound: f64,
    pub b_norm: f64,
    pub gap: f64,
    pub pairs: Vec<CertificatePair>,
    pub counts: CertificateCounts,
    pub passed: bool,
}

/// Slack added to the eigenvalue-shift bound for roundoff.
pub const CERTIFICATE_SLACK: f64 = 1e-10;

/// Compare the spectrum of `K` in `[E - eps/2, E + eps/2]` with that of `F_E`.
///
/// Each ranked pair must satisfy `|lambda_i - lambda~_i| <= 2 (gamma_bound / eps)^2 |lambda_i - E|`
/// (plus roundoff slack). A count mismatch yields a failed report, not an error;
/// unmet hypotheses on `D` or `B` are errors.
pub fn window_spectrum_compare(
    part: &BlockPartition<'_>,
    e: f64,
    eps: f64,
    gamma_bound: f64,
) -> Result<CertificateReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter { name: "eps", reason: format!("{eps} is not > 0") });
    }
    let d = part.d();
    let gap = if d.nrows() == 0 { f64::INFINITY } else { linalg::spectral_gap(&d, e) };
    if gap < eps {
        return Err(Error::Precondition(format!(
            "||(D - E)^-1|| = {:e} exceeds 1/eps = {:e}",
            1.0 / gap,
            1.0 / eps
        )));
    }
    let b_norm = linalg::spectral_norm(&part.b());
    if b_norm > gamma_bound * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!("||B|| = {b_norm:e} exceeds gamma bound {gamma_bound:e}")));
    }
    let in_window = |v: &f64| (v - e).abs() <= eps / 2.0;
    let full: Vec<f64> = part.parent().eigenvalues().into_iter().filter(in_window).collect();
    let f_e = schur_complement(part, e)?;
    let all_reduced = f_e.f.eigenvalues();
    let reduced_count = all_reduced.iter().filter(|v| in_window(v)).count();
    // Corresponding eigenvalues of F_E may sit just outside the window: take the
    // rank-contiguous run closest to the window spectrum.
    let m = full.len();
    let offset = (0..=all_reduced.len().saturating_sub(m))
        .filter(|_| m <= all_reduced.len())
        .min_by(|&a, &b| {
            let dev = |o: usize| full.iter().zip(&all_reduced[o..o + m]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            dev(a).total_cmp(&dev(b))
        });
    let matched: &[f64] = offset.map_or(&[], |o| &all_reduced[o..o + m]);
    let ratio = gamma_bound / eps;
    let pairs: Vec<CertificatePair> = full
        .iter()
        .zip(matched)
        .map(|(&lambda, &lambda_tilde)| {
            let bound = 2.0 * ratio * ratio * (lambda - e).abs() + CERTIFICATE_SLACK;
            CertificatePair { lambda, lambda_tilde, bound, pass: (lambda - lambda_tilde).abs() <= bound }
        })
        .collect();
    let counts = CertificateCounts { full: m, reduced: reduced_count };
    let passed = counts.full == counts.reduced && pairs.len() == m && pairs.iter().all(|p| p.pass);
    Ok(CertificateReport { e, eps, gamma_bound, b_norm, gap, pairs, counts, passed })
}

/// Neumann series and off-diagonal decay of `(W + V - lambda)^{-1}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayReport {
    pub lambda: f64,
    /// `||(W - lambda)^{-1}|| * ||V||`.
    pub contraction: f64,
    /// `deviations[m] = ||direct - S_m||`, `S_m` keeping `m` factors of `V`.
    pub deviations: Vec<f64>,
    /// `(distance, max 2x2 block norm at that distance)`.
    pub block_norms: Vec<(u64, f64)>,
    /// Ratios of consecutive entries of `block_norms` (both nonzero).
    pub step_ratios: Vec<f64>,
    /// Smallest `c` with `norm(r) <= (c gamma / eps)^r * 4 / eps` for all `r >= 1`.
    pub fitted_c: Option<f64>,
}

impl DecayReport {
    pub fn max_step_ratio(&self) -> f64 {
        self.step_ratios.iter().copied().fold(0.0, f64::max)
    }
}

fn block_norm_2x2(m: [[f64; 2]; 2]) -> f64 {
    let scale = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let [[a, b], [c, d]] = m.map(|r| r.map(|v| v / scale));
    let s = a * a + b * b + c * c + d * d;
    let det = (a * d - b * c).abs();
    let disc = (s * s - 4.0 * det * det).max(0.0).sqrt();
    scale * ((s + disc) / 2.0).sqrt()
}

/// Neumann expansion of `(W + V - lambda)^{-1}` around the block-diagonal `W`.
///
/// `w` and `v` share labels covering whole positions.
pub fn neumann_resolvent_decay(
    w: &LabeledMatrix,
    v: &LabeledMatrix,
    lambda: f64,
    max_terms: usize,
    lattice: &Lattice,
    gamma: f64,
    eps: f64,
) -> Result<DecayReport> {
    if w.labels() != v.labels() {
        return Err(Error::Precondition("W and V must share labels".into()));
    }
    let n = w.dim();
    let id = DMatrix::identity(n, n);
    checked_gap(w.entries(), lambda)?;
    let g0 = linalg::shifted_solve(w.entries(), lambda, &id)
        .ok_or(Error::Precondition("W - lambda not invertible".into()))?;
    let contraction = linalg::spectral_norm(&g0) * linalg::spectral_norm(v.entries());
    if contraction >= 1.0 {
        return Err(Error::NeumannDivergent(contraction));
    }
    let d = w.entries() + v.entries();
    let direct = linalg::shifted_solve(&d, lambda, &id)
        .ok_or(Error::Precondition("D - lambda not invertible".into()))?;

    let step = -(v.entries() * &g0);
    let mut term = g0.clone();
    let mut sum = g0.clone();
    let mut deviations = vec![linalg::spectral_norm(&(&direct - &sum))];
    for _ in 0..max_terms {
        term = &term * &step;
        sum += &term;
        deviations.push(linalg::spectral_norm(&(&direct - &sum)));
    }

    let positions: Vec<usize> = w.positions().iter().collect();
    let mut by_distance: std::collections::BTreeMap<u64, f64> = Default::default();
    for (ix, &x) in positions.iter().enumerate() {
        for (iy, &y) in positions.iter().enumerate() {
            let r = lattice.distance(x, y);
            let blk = [
                [direct[(2 * ix, 2 * iy)], direct[(2 * ix, 2 * iy + 1)]],
                [direct[(2 * ix + 1, 2 * iy)], direct[(2 * ix + 1, 2 * iy + 1)]],
            ];
            let e = by_distance.entry(r).or_insert(0.0);
            *e = e.max(block_norm_2x2(blk));
        }
    }
    let block_norms: Vec<(u64, f64)> = by_distance.into_iter().collect();
    let step_ratios = block_norms
        .windows(2)
        .filter(|w| w[1].0 == w[0].0 + 1 && w[0].1 > 0.0 && w[1].1 > 0.0)
        .map(|w| w[1].1 / w[0].1)
        .collect();
    let fitted_c = (gamma > 0.0)
        .then(|| {
            block_norms
                .iter()
                .filter(|(r, v)| *r >= 1 && *v > 0.0)
                .map(|&(r, v)| (v * eps / 4.0).powf(1.0 / r as f64) * eps / gamma)
                .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.max(c))))
        })
        .flatten();
    Ok(DecayReport { lambda, contraction, deviations, block_norms, step_ratios, fitted_c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::PositionSet;
    use crate::model::{build_hamiltonian, sites_of, DisorderField, ModelParams};

    fn labeled(m: DMatrix<f64>) -> LabeledMatrix {
        let n = m.nrows();
        LabeledMatrix::new((0..n).map(Site).collect(), m).unwrap()
    }

    #[test]
    fn decoupled_blocks() {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = 1.0;
        m[(0, 1)] = 0.5;
        m[(1, 0)] = 0.5;
        m[(2, 2)] = 3.0;
        m[(3, 3)] = -2.0;
        let k = labeled(m);
        let part = BlockPartition::new(&k, &[Site(0), Site(1)]).unwrap();
        for lambda in [-0.7, 0.0, 1.3] {
            let r = schur_complement(&part, lambda).unwrap();
            assert_eq!(r.f.entries(), &part.a());
        }
        let (vals, vecs) = linalg::sym_eigen(&part.a());
        let phi = vecs.column(1).into_owned();
        let lifted = lift_eigenvector(&part, vals[1], &phi, 1e-10).unwrap();
        assert!(lifted.warning.is_none());
        assert_eq!(lifted.vector.rows(2, 2).amax(), 0.0);
        assert_eq!(lifted.vector.rows(0, 2), phi);
    }

    #[test]
    fn scalar_schur() {
        let k = labeled(DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.1, 2.0]));
        let part = BlockPartition::new(&k, &[Site(0)]).unwrap();
        let r = schur_complement(&part, 0.0).unwrap();
        assert!((r.f.entries()[(0, 0)] + 0.005).abs() < 1e-15);
        assert!((r.gap - 2.0).abs() < 1e-15);
    }

    #[test]
    fn singular_complement_is_error() {
        let k = labeled(DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.1, 2.0]));
        let part = BlockPartition::new(&k, &[Site(0)]).unwrap();
        assert!(matches!(schur_complement(&part, 2.0), Err(Error::SingularComplement { .. })));
    }

    #[test]
    fn two_position_lift_matches_dense() {
        let lat = Lattice::new(vec![2]).unwrap();
        let field = DisorderField::from_values(lat, vec![0.0, 0.0], 0).unwrap();
        let h = build_hamiltonian(&field, &ModelParams::new(0.1).unwrap());
        let (vals, vecs) = linalg::sym_eigen(h.entries());
        let part = BlockPartition::new(&h, &[Site(0), Site(1)]).unwrap();
        for i in [0, 3] {
            let lambda = vals[i];
            let f = schur_complement(&part, lambda).unwrap().f;
            let (fv, fvec) = linalg::sym_eigen(f.entries());
            let p = fv.iter().enumerate().min_by(|a, b| (a.1 - lambda).abs().total_cmp(&(b.1 - lambda).abs())).unwrap().0;
            let lifted = lift_eigenvector(&part, lambda, &fvec.column(p).into_owned(), 1e-10).unwrap();
            let v = lifted.vector.normalize();
            let r = (h.entries() * &v - &v * lambda).norm();
            assert!(r <= 1e-10, "residual {r}");
            assert!(v.dot(&vecs.column(i)).abs() > 1.0 - 1e-10);
        }
    }

    #[test]
    fn certificate_decoupled_is_exact() {
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 1.02;
        m[(2, 2)] = 3.0;
        let k = labeled(m);
        let part = BlockPartition::new(&k, &[Site(0), Site(1)]).unwrap();
        let rep = window_spectrum_compare(&part, 1.0, 0.1, 0.0).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.counts.full, 2);
        assert!(rep.pairs.iter().all(|p| p.lambda == p.lambda_tilde));
    }

    #[test]
    fn neumann_trivial_cases() {
        let lat = Lattice::new(vec![4]).unwrap();
        let field = DisorderField::sample(lat.clone(), 3, 0);
        let params = ModelParams::new(1e-3).unwrap();
        let h = build_hamiltonian(&field, &params);
        let v = crate::model::hopping_part(&h);
        let w = h.entries() - &v;
        let sites = sites_of(&PositionSet::new((0..4).collect()));
        let wl = LabeledMatrix::new(sites.clone(), w).unwrap();
        let zero = LabeledMatrix::new(sites.clone(), DMatrix::zeros(8, 8)).unwrap();
        let rep = neumann_resolvent_decay(&wl, &zero, 0.5, 3, &lat, 1e-3, params.epsilon()).unwrap();
        assert!(rep.deviations.iter().all(|&d| d < 1e-14));

        let vl = LabeledMatrix::new(sites, v).unwrap();
        let rep = neumann_resolvent_decay(&wl, &vl, 0.5, 0, &lat, 1e-3, params.epsilon()).unwrap();
        let g0 = linalg::shifted_solve(wl.entries(), 0.5, &DMatrix::identity(8, 8)).unwrap();
        let direct = linalg::shifted_solve(h.entries(), 0.5, &DMatrix::identity(8, 8)).unwrap();
        assert!((rep.deviations[0] - linalg::spectral_norm(&(direct - g0))).abs() < 1e-15);
    }

    #[test]
    fn block_norm_matches_svd() {
        let m = [[0.3, -1.2], [2.0, 0.7]];
        let dm = DMatrix::from_row_slice(2, 2, &[0.3, -1.2, 2.0, 0.7]);
        assert!((block_norm_2x2(m) - linalg::spectral_norm(&dm)).abs() < 1e-12);
        let tiny = [[1e-200, 0.0], [0.0, 3e-200]];
        assert!((block_norm_2x2(tiny) / 3e-200 - 1.0).abs() < 1e-12);
    }
}

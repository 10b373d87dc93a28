//! Fixed-energy multiscale procedure.
//!
//! Step 1 collects the positions whose bare levels lie within `eps` of `E`
//! and Schur-complements the rest away. On every later scale `k` the surviving
//! set `R^(k-1)` is split into components at length `L_k`; components that are
//! isolated (small, narrow, far from the others) and not resonant with `E` at
//! window `eps_k` are removed, and the remaining sites are kept in the next
//! Schur complement `F^(k)`.
//!
//! The per-block "truncated" matrices are realised geometrically: the Schur
//! complement of the original `H`, restricted to the positions within the
//! collar radius of the block, onto the block's own sites. They therefore
//! depend only on the disorder inside that neighbourhood.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::constants::ScaleConstants;
use crate::error::{Error, Result};
use crate::lattice::{block_distance, components_at_scale, neighborhood, Block, Lattice, PositionSet};
use crate::linalg;
use crate::model::{sites_of, DisorderField, Instance, LabeledMatrix};
use crate::schur::{schur_complement, window_spectrum_compare, BlockPartition, CertificateReport};

/// Positions with a bare level within `eps` of `e`.
pub fn detect_resonant_positions(field: &DisorderField, e: f64, eps: f64) -> PositionSet {
    let target = e.abs();
    (0..field.lattice().num_positions())
        .filter(|&x| (field.t(x) - target).abs() <= eps)
        .collect()
}

/// Probability that `u ~ U[-1, 1]` makes a position `eps`-resonant with `e`.
pub fn resonance_probability_exact(e: f64, eps: f64) -> f64 {
    let lo_t = e.abs() - eps;
    let hi_t = e.abs() + eps;
    // t = sqrt(u^2 + 1) in [lo_t, hi_t]  <=>  |u| in [sqrt(lo_t^2 - 1), sqrt(hi_t^2 - 1)] ∩ [0, 1]
    let u_of = |t: f64| if t <= 1.0 { 0.0 } else { (t * t - 1.0).sqrt().min(1.0) };
    if hi_t < 1.0 {
        return 0.0;
    }
    (u_of(hi_t) - u_of(lo_t.max(0.0))).max(0.0)
}

/// Isolation test on scale `k >= 2`: volume, separation from every other
/// block, and diameter.
pub fn classify_isolated(b: &Block, all_blocks: &[Block], k: usize, sc: &ScaleConstants, lat: &Lattice) -> bool {
    let len = sc.length(k);
    if b.volume() as f64 > sc.isolation_volume(k) || b.diameter() as f64 > len {
        return false;
    }
    all_blocks
        .iter()
        .filter(|o| *o != b)
        .all(|o| block_distance(b, o, lat).map_or(false, |d| d as f64 >= 4.0 * len))
}

/// Local Schur complement of `h` over `neighborhood(b, radius)` onto the sites of `b`.
///
/// An infinite radius uses the whole lattice.
pub fn truncated_block_matrix(
    h: &LabeledMatrix,
    lat: &Lattice,
    b: &Block,
    radius: f64,
    lambda: f64,
) -> Result<LabeledMatrix> {
    let keep = sites_of(b.positions());
    if radius.is_infinite() {
        let part = BlockPartition::new(h, &keep)?;
        return Ok(schur_complement(&part, lambda)?.f);
    }
    let nb = neighborhood(b, radius, lat);
    let local = h.restrict(&sites_of(&nb))?;
    let part = BlockPartition::new(&local, &keep)?;
    Ok(schur_complement(&part, lambda)?.f)
}

/// Grow `keep` until every position has at most one neighbour across the
/// kept/eliminated cut. The hopping block `B` is then a partial matching and
/// `||B|| <= gamma`.
pub fn matching_keep_set(keep: &PositionSet, lat: &Lattice) -> PositionSet {
    let mut kept: Vec<bool> = (0..lat.num_positions()).map(|p| keep.contains(p)).collect();
    loop {
        let mut grown = false;
        for p in 0..kept.len() {
            let across: Vec<usize> = lat.neighbors(p).into_iter().filter(|&q| kept[q] != kept[p]).collect();
            if across.len() < 2 {
                continue;
            }
            if kept[p] {
                for &q in &across[..across.len() - 1] {
                    kept[q] = true;
                }
            } else {
                kept[p] = true;
            }
            grown = true;
        }
        if !grown {
            return (0..kept.len()).filter(|&p| kept[p]).collect();
        }
    }
}

/// Window certificate between `H` and its Schur complement at `E`. The kept
/// positions are those resonant at `eps + 2 d gamma`, which keeps
/// `||(D - E)^-1|| <= 1/eps`, grown by [`matching_keep_set`] so `||B|| <= gamma`.
pub fn fundamental_certificate(inst: &Instance, e: f64) -> Result<CertificateReport> {
    let eps = inst.params.epsilon();
    let lat = inst.lattice();
    let margin = 2.0 * lat.dim() as f64 * inst.params.gamma();
    let keep = matching_keep_set(&detect_resonant_positions(&inst.field, e, eps + margin), lat);
    let part = BlockPartition::new(&inst.hamiltonian, &sites_of(&keep))?;
    window_spectrum_compare(&part, e, eps, inst.params.gamma())
}

/// Distance from `e` to the spectrum of a symmetric matrix.
fn distance_to_spectrum(m: &LabeledMatrix, e: f64) -> f64 {
    linalg::spectral_gap(m.entries(), e)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifiedBlock {
    pub block: Block,
    pub scale: usize,
    pub isolated: bool,
    /// Only evaluated for isolated blocks.
    pub resonant: Option<bool>,
    pub truncation_radius: f64,
    /// Spectrum of the truncated matrix, when it was computed.
    pub spectrum: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ScaleState {
    pub k: usize,
    pub energy: f64,
    pub lambda: f64,
    pub resonant: PositionSet,
    pub blocks: Vec<ClassifiedBlock>,
    /// `F^(k)` on the sites of `resonant`.
    pub f: LabeledMatrix,
    /// `(scale, block)` for every block removed so far.
    pub removed: Vec<(usize, Block)>,
    /// Complement gap of the Schur step that produced `f`.
    pub gap: f64,
    /// `||F^(k) - ⊕_B F~^(k)(B)||` over the blocks of the next scale.
    pub truncation_discrepancy: Option<f64>,
}

impl ScaleState {
    /// No spectrum near `E` remains, or every component has merged.
    pub fn is_terminal(&self, lat: &Lattice, sc: &ScaleConstants) -> bool {
        self.resonant.is_empty() || sc.length(self.k) > lat.diameter() as f64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub lambda1: f64,
    pub lambda2: f64,
    pub difference_norm: f64,
    /// `||F~_l1 - F~_l2|| / |l1 - l2|`, 0 when `l1 == l2`.
    pub ratio: f64,
    pub reference: f64,
    pub flagged: bool,
}

/// JSON record of one scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaleRecord {
    pub k: usize,
    #[serde(rename = "E")]
    pub energy: f64,
    pub lambda: f64,
    pub eps_k: f64,
    pub resonant: Vec<Vec<i64>>,
    pub blocks: Vec<BlockRecord>,
    pub removed_count: usize,
    pub gap: f64,
    pub truncation_discrepancy: Option<f64>,
    pub discrepancy_envelope: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockRecord {
    pub positions: Vec<Vec<i64>>,
    pub volume: usize,
    pub diameter: u64,
    pub isolated: bool,
    pub resonant: Option<bool>,
    pub truncation_radius: f64,
}

/// Fixed-energy procedure on one disorder instance.
pub struct Multiscale<'a> {
    inst: &'a Instance,
    sc: ScaleConstants,
}

impl<'a> Multiscale<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        Self { inst, sc: ScaleConstants::from_params(&inst.params) }
    }

    pub fn constants(&self) -> &ScaleConstants {
        &self.sc
    }

    pub fn instance(&self) -> &Instance {
        self.inst
    }

    fn lat(&self) -> &Lattice {
        self.inst.lattice()
    }

    /// Resonance test on scale `k` for an isolated block.
    pub fn classify_resonant(&self, b: &Block, k: usize, e: f64) -> Result<(bool, Vec<f64>)> {
        let radius = self.sc.truncation_radius(k);
        let ft = truncated_block_matrix(&self.inst.hamiltonian, self.lat(), b, radius, e)?;
        let spectrum = ft.eigenvalues();
        let dist = distance_to_spectrum(&ft, e);
        Ok((self.sc.within_eps_k(dist, k), spectrum))
    }

    /// Step 1: `R^(1)` and `F^(1)_E`.
    pub fn first_step(&self, e: f64) -> Result<ScaleState> {
        let r1 = detect_resonant_positions(&self.inst.field, e, self.sc.eps);
        let removed_set = self.lat().all_positions().difference(&r1);
        let blocks = components_at_scale(&r1, 1, self.lat())
            .into_iter()
            .map(|block| ClassifiedBlock { block, scale: 1, isolated: false, resonant: None, truncation_radius: 0.0, spectrum: None })
            .collect();
        let removed = components_at_scale(&removed_set, 1, self.lat()).into_iter().map(|b| (1, b)).collect();
        let (f, gap) = self.reduce(&self.inst.hamiltonian, &r1, e, 1)?;
        let mut state = ScaleState { k: 1, energy: e, lambda: e, resonant: r1, blocks, f, removed, gap, truncation_discrepancy: None };
        state.truncation_discrepancy = self.truncation_discrepancy(&state).ok();
        Ok(state)
    }

    /// Schur step onto `keep`, refusing when the complement gap is below `eps_k / 2`.
    fn reduce(&self, parent: &LabeledMatrix, keep: &PositionSet, lambda: f64, k: usize) -> Result<(LabeledMatrix, f64)> {
        let keep_sites = sites_of(keep);
        let part = BlockPartition::new(parent, &keep_sites)?;
        let d = part.d();
        let gap = if d.nrows() == 0 { f64::INFINITY } else { linalg::spectral_gap(&d, lambda) };
        let required = self.sc.eps_k(k) / 2.0;
        if gap <= required {
            return Err(Error::WindowViolated { scale: k, gap, required });
        }
        let res = schur_complement(&part, lambda)?;
        Ok((res.f, res.gap))
    }

    /// Advance from scale `k - 1` to `k`.
    pub fn advance_scale(&self, state: &ScaleState) -> Result<ScaleState> {
        let k = state.k + 1;
        let e = state.energy;
        let comps = components_at_scale(&state.resonant, self.sc.length(k) as u64, self.lat());
        let radius = self.sc.truncation_radius(k);
        let mut blocks = Vec::with_capacity(comps.len());
        let mut removed = state.removed.clone();
        let mut drop = Vec::new();
        for b in &comps {
            let isolated = classify_isolated(b, &comps, k, &self.sc, self.lat());
            let (resonant, spectrum) = if isolated {
                let (r, s) = self.classify_resonant(b, k, e)?;
                (Some(r), Some(s))
            } else {
                (None, None)
            };
            if resonant == Some(false) {
                drop.extend(b.positions().iter());
                removed.push((k, b.clone()));
            }
            blocks.push(ClassifiedBlock { block: b.clone(), scale: k, isolated, resonant, truncation_radius: radius, spectrum });
        }
        let next = state.resonant.difference(&PositionSet::new(drop));
        let (f, gap) = self.reduce(&state.f, &next, state.lambda, k)?;
        let mut out = ScaleState {
            k,
            energy: e,
            lambda: state.lambda,
            resonant: next,
            blocks,
            f,
            removed,
            gap,
            truncation_discrepancy: None,
        };
        out.truncation_discrepancy = self.truncation_discrepancy(&out).ok();
        Ok(out)
    }

    /// Run from step 1 until the state is terminal or `k_max` is reached.
    pub fn run(&self, e: f64, k_max: usize) -> Result<Vec<ScaleState>> {
        let mut states = vec![self.first_step(e)?];
        loop {
            let last = states.last().expect("nonempty");
            if last.is_terminal(self.lat(), &self.sc) || last.k >= k_max {
                break;
            }
            let next = self.advance_scale(last)?;
            states.push(next);
        }
        Ok(states)
    }

    /// `||F^(k) - ⊕_B F~^(k)(B)||` for the blocks of `R^(k)` on scale `k + 1`.
    pub fn truncation_discrepancy(&self, state: &ScaleState) -> Result<f64> {
        if state.resonant.is_empty() {
            return Ok(0.0);
        }
        let k = state.k + 1;
        let comps = components_at_scale(&state.resonant, self.sc.length(k) as u64, self.lat());
        let radius = self.sc.truncation_radius(k);
        let n = state.f.dim();
        let mut direct_sum = DMatrix::zeros(n, n);
        for b in &comps {
            let ft = truncated_block_matrix(&self.inst.hamiltonian, self.lat(), b, radius, state.lambda)?;
            let idx = state.f.indices_of(ft.labels())?;
            for (i, &gi) in idx.iter().enumerate() {
                for (j, &gj) in idx.iter().enumerate() {
                    direct_sum[(gi, gj)] = ft.entries()[(i, j)];
                }
            }
        }
        Ok(linalg::spectral_norm(&(state.f.entries() - direct_sum)))
    }

    /// Lipschitz ratio of the truncated matrix of `b` on scale `k` in `lambda`.
    pub fn lipschitz_check(&self, b: &Block, k: usize, lambda1: f64, lambda2: f64, multiple: f64) -> Result<LipschitzReport> {
        let radius = self.sc.truncation_radius(k);
        let h = &self.inst.hamiltonian;
        let f1 = truncated_block_matrix(h, self.lat(), b, radius, lambda1)?;
        let f2 = truncated_block_matrix(h, self.lat(), b, radius, lambda2)?;
        let difference_norm = linalg::spectral_norm(&(f1.entries() - f2.entries()));
        let ratio = if lambda1 == lambda2 { 0.0 } else { difference_norm / (lambda1 - lambda2).abs() };
        let reference = self.inst.params.gamma() / self.sc.eps;
        Ok(LipschitzReport { lambda1, lambda2, difference_norm, ratio, reference, flagged: ratio > multiple * reference })
    }

    pub fn record(&self, state: &ScaleState) -> ScaleRecord {
        let lat = self.lat();
        let coords = |s: &PositionSet| s.iter().map(|p| lat.coords(p)).collect::<Vec<_>>();
        let gamma = self.inst.params.gamma();
        ScaleRecord {
            k: state.k,
            energy: state.energy,
            lambda: state.lambda,
            eps_k: self.sc.eps_k(state.k),
            resonant: coords(&state.resonant),
            blocks: state
                .blocks
                .iter()
                .map(|b| BlockRecord {
                    positions: coords(b.block.positions()),
                    volume: b.block.volume(),
                    diameter: b.block.diameter(),
                    isolated: b.isolated,
                    resonant: b.resonant,
                    truncation_radius: b.truncation_radius,
                })
                .collect(),
            removed_count: state.removed.iter().map(|(_, b)| b.volume()).sum(),
            gap: state.gap,
            truncation_discrepancy: state.truncation_discrepancy,
            discrepancy_envelope: gamma.powf(self.sc.length(state.k).powf(self.sc.psi)),
        }
    }
}

//! Energy-following: scale-by-scale re-centering `E_1 -> E_2 -> ...` from a bare
//! level `±t_x` to an exact eigenvalue of `H`.
//!
//! At step `k` the traced block `B_{x,k}` (the component of `R^(k)` containing
//! `x` at length `L_k`) has a truncated matrix `F~_λ(B_{x,k})` with collar radius
//! `L_{k-1}`. Every solution of `λ ∈ spec F~_λ` within `ε_k / 3` of `E_k` forks a
//! child with `E_{k+1} = λ`. Once the blocks can no longer grow (or the window
//! is below numerical resolution) the exact Schur complement `F^(k)_λ` replaces
//! the truncated matrix, so the final fixed points are eigenvalues of `H`.

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::constants::ScaleConstants;
use crate::error::{Error, Result};
use crate::lattice::{components_at_scale, Block, Lattice, PositionSet};
use crate::linalg;
use crate::model::{sites_of, Instance, LabeledMatrix, Site};
use crate::multiscale::{classify_isolated, detect_resonant_positions, truncated_block_matrix, Multiscale};
use crate::schur::LiftChain;

/// Convergence cap for the fixed-point iteration.
const MAX_ITERATIONS: usize = 200;
/// Eigenvalues closer than this are treated as a tracking ambiguity.
const TIE_TOL: f64 = 1e-13;
/// Fixed points closer than this are the same solution.
const SAME_SOLUTION: f64 = 1e-10;
/// Windows below this width are beyond double precision resolution.
const MIN_WINDOW: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TraceStatus {
    Active,
    Converged,
    Failed(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub x: usize,
    pub sign: Sign,
    /// `E_1..E_K`; once converged the last entry is `lambda0`.
    pub energies: Vec<f64>,
    /// `B_{x,1}..B_{x,k}`.
    pub blocks: Vec<Block>,
    /// `R^(1)..R^(k)`.
    pub resonant_sets: Vec<PositionSet>,
    /// Child index chosen at every fork.
    pub branch: Vec<usize>,
    pub status: TraceStatus,
    pub lambda0: Option<f64>,
    pub near_degenerate: bool,
    /// Largest contraction ratio seen in the fixed-point iterations.
    pub contraction: f64,
    /// Complement gaps of the last Schur chain, one per stage.
    pub stage_gaps: Vec<f64>,
    pub stopping_scale: Option<usize>,
    pub eigenvector: Option<Vec<f64>>,
    pub residual: Option<f64>,
}

impl EnergyTrace {
    /// Current step `k`.
    pub fn k(&self) -> usize {
        self.resonant_sets.len()
    }

    pub fn current_energy(&self) -> f64 {
        *self.energies.last().expect("trace has a starting energy")
    }

    pub fn is_converged(&self) -> bool {
        self.status == TraceStatus::Converged
    }

    pub fn branch_id(&self) -> String {
        let parts: Vec<String> = self.branch.iter().map(|b| b.to_string()).collect();
        if parts.is_empty() {
            "root".into()
        } else {
            parts.join(".")
        }
    }

    /// JSON-lines records, one per step.
    pub fn records(&self, lat: &Lattice, sc: &ScaleConstants) -> Vec<TraceStepRecord> {
        let coords = |s: &PositionSet| s.iter().map(|p| lat.coords(p)).collect::<Vec<_>>();
        (0..self.blocks.len())
            .map(|i| TraceStepRecord {
                x: lat.coords(self.x),
                sign: self.sign,
                branch: self.branch_id(),
                k: i + 1,
                energy: self.energies[i],
                eps_k: sc.eps_k(i + 1),
                block: coords(self.blocks[i].positions()),
                resonant_count: self.resonant_sets[i].len(),
                stage_gaps: if i + 1 == self.blocks.len() { self.stage_gaps.clone() } else { Vec::new() },
                status: self.status.clone(),
                lambda0: if i + 1 == self.blocks.len() { self.lambda0 } else { None },
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceStepRecord {
    pub x: Vec<i64>,
    pub sign: Sign,
    pub branch: String,
    pub k: usize,
    #[serde(rename = "E")]
    pub energy: f64,
    pub eps_k: f64,
    pub block: Vec<Vec<i64>>,
    pub resonant_count: usize,
    pub stage_gaps: Vec<f64>,
    pub status: TraceStatus,
    pub lambda0: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AutoresonanceReport {
    pub block: Block,
    pub k: usize,
    pub min_gap: f64,
    pub eps_k: f64,
    pub admissible: bool,
    /// `min_gap < eps_k`; `None` when the block is not admissible.
    pub autoresonant: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub lambda: f64,
    pub iterations: usize,
    pub ratio: f64,
}

/// Iterate `λ ↦ λ_p(M_λ)` from `start`, with `p` the eigenvalue nearest the
/// current iterate. Returns the fixed point if it lies in `[center ± halfwidth]`.
pub fn fixed_point_eigenvalue<F>(m: F, start: f64, center: f64, halfwidth: f64, tol: f64) -> Result<Option<FixedPoint>>
where
    F: Fn(f64) -> Result<LabeledMatrix>,
{
    let mut lambda = start;
    let mut prev_delta: Option<f64> = None;
    let mut ratio = 0.0f64;
    let mut growing = 0;
    for it in 1..=MAX_ITERATIONS {
        let mut eig = m(lambda)?.eigenvalues();
        if eig.is_empty() {
            return Ok(None);
        }
        eig.sort_by(|a, b| (a - lambda).abs().total_cmp(&(b - lambda).abs()));
        if eig.len() > 1 {
            let (d0, d1) = ((eig[0] - lambda).abs(), (eig[1] - lambda).abs());
            if (d1 - d0).abs() < TIE_TOL && (eig[1] - eig[0]).abs() > TIE_TOL {
                return Err(Error::NearDegenerate { lambda, separation: (eig[1] - eig[0]).abs() });
            }
        }
        let next = eig[0];
        let delta = (next - lambda).abs();
        lambda = next;
        if let Some(p) = prev_delta.filter(|&p| p > 0.0) {
            let r = delta / p;
            ratio = ratio.max(r);
            if r >= 1.0 {
                growing += 1;
                if growing >= 3 {
                    return Err(Error::NotContracting { lambda, ratio: r });
                }
            } else {
                growing = 0;
            }
        }
        if delta < tol.max(16.0 * f64::EPSILON * lambda.abs()) {
            return Ok(((lambda - center).abs() <= halfwidth).then_some(FixedPoint { lambda, iterations: it, ratio }));
        }
        prev_delta = Some(delta);
    }
    Err(Error::NotContracting { lambda, ratio })
}

/// All fixed points in `[center ± halfwidth]`, one iteration started from each
/// eigenvalue of `M_center` near the window. Duplicates are merged.
pub fn enumerate_fixed_points<F>(m: F, center: f64, halfwidth: f64, tol: f64) -> Result<Vec<FixedPoint>>
where
    F: Fn(f64) -> Result<LabeledMatrix>,
{
    let starts: Vec<f64> = m(center)?
        .eigenvalues()
        .into_iter()
        .filter(|mu| (mu - center).abs() <= 1.5 * halfwidth)
        .collect();
    let mut found: Vec<FixedPoint> = Vec::new();
    for mu in starts {
        if let Some(fp) = fixed_point_eigenvalue(&m, mu, center, halfwidth, tol)? {
            if !found.iter().any(|f| (f.lambda - fp.lambda).abs() <= SAME_SOLUTION) {
                found.push(fp);
            }
        }
    }
    found.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(found)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FollowOptions {
    pub k_max: usize,
    pub residual_tol: f64,
    /// Maximum number of trace nodes expanded in a sweep.
    pub branch_cap: usize,
}

impl Default for FollowOptions {
    fn default() -> Self {
        Self { k_max: 20, residual_tol: 1e-8, branch_cap: 100_000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reconstruction {
    pub lambda0: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub stage_gaps: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenvalueCoverage {
    pub lambda: f64,
    pub nearest_distance: f64,
    pub tolerance: f64,
    pub reached: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompletenessReport {
    pub coverage: Vec<EigenvalueCoverage>,
    pub reached: usize,
    pub missed: usize,
    /// Converged traces whose eigenvalue is not in the oracle spectrum.
    pub spurious: usize,
    pub converged_traces: usize,
    pub failed_traces: usize,
    pub near_degenerate_traces: usize,
    pub nodes_expanded: usize,
    pub branch_cap_hit: bool,
    /// Largest child count relative to `2 n(B)` over all forks.
    pub max_branch_fraction: f64,
}

impl CompletenessReport {
    pub fn complete(&self) -> bool {
        self.missed == 0 && self.spurious == 0
    }
}

pub struct EnergyFollower<'a> {
    inst: &'a Instance,
    ms: Multiscale<'a>,
    opts: FollowOptions,
}

impl<'a> EnergyFollower<'a> {
    pub fn new(inst: &'a Instance, opts: FollowOptions) -> Self {
        Self { inst, ms: Multiscale::new(inst), opts }
    }

    pub fn constants(&self) -> &ScaleConstants {
        self.ms.constants()
    }

    fn lat(&self) -> &Lattice {
        self.inst.lattice()
    }

    /// Collar radius of the step-`k` matrix, `L_{k-1}`.
    fn follow_radius(&self, k: usize) -> f64 {
        self.constants().length(k - 1)
    }

    fn block_of(&self, set: &PositionSet, x: usize, k: usize) -> Block {
        components_at_scale(set, self.constants().length(k) as u64, self.lat())
            .into_iter()
            .find(|b| b.contains(x))
            .expect("x belongs to the set")
    }

    pub fn start_trace(&self, x: usize, sign: Sign) -> Result<EnergyTrace> {
        if x >= self.lat().num_positions() {
            return Err(Error::InvalidParameter { name: "x", reason: format!("position {x} outside the lattice") });
        }
        let e1 = sign.value() * self.inst.field.t(x);
        let r1 = detect_resonant_positions(&self.inst.field, e1, self.constants().eps);
        let b1 = self.block_of(&r1, x, 1);
        Ok(EnergyTrace {
            x,
            sign,
            energies: vec![e1],
            blocks: vec![b1],
            resonant_sets: vec![r1],
            branch: Vec::new(),
            status: TraceStatus::Active,
            lambda0: None,
            near_degenerate: false,
            contraction: 0.0,
            stage_gaps: Vec::new(),
            stopping_scale: None,
            eigenvector: None,
            residual: None,
        })
    }

    /// Exact Schur chain over `R^(1)..R^(k)` at `lambda`.
    fn chain(&self, sets: &[PositionSet], lambda: f64) -> Result<LiftChain> {
        let nested: Vec<Vec<Site>> = sets.iter().map(sites_of).collect();
        LiftChain::build(&self.inst.hamiltonian, &nested, lambda)
    }

    /// Stage `j` eliminates the complement of `R^(j)`; its spectrum must stay
    /// `ε_j / 2` away from the stage centre `E_j`.
    fn window_check(&self, chain: &LiftChain, energies: &[f64]) -> Result<Vec<f64>> {
        let mut gaps = Vec::with_capacity(chain.depth());
        for j in 1..=chain.depth() {
            let d = chain.complement_block(j)?;
            let gap = if d.nrows() == 0 { f64::INFINITY } else { linalg::spectral_gap(&d, energies[j - 1]) };
            let required = self.constants().eps_k(j) / 2.0;
            if gap <= required {
                return Err(Error::WindowViolated { scale: j, gap, required });
            }
            gaps.push(gap);
        }
        Ok(gaps)
    }

    /// Exact stage: blocks cannot grow any further or the window is unresolvable.
    fn is_final_step(&self, k: usize) -> bool {
        let sc = self.constants();
        sc.length(k + 1) > self.lat().diameter() as f64 || sc.eps_k(k) < MIN_WINDOW || k >= self.opts.k_max
    }

    /// Fixed point of the truncated matrix of `b` on step `k`, iterated from `center`.
    pub fn block_fixed_point(&self, b: &Block, k: usize, center: f64, halfwidth: f64) -> Result<Option<FixedPoint>> {
        let radius = self.follow_radius(k);
        let tol = MIN_WINDOW.min(self.constants().eps_k(k + 1) / 100.0).min(1e-13);
        let m = |l: f64| truncated_block_matrix(&self.inst.hamiltonian, self.lat(), b, radius, l);
        fixed_point_eigenvalue(m, center, center, halfwidth, tol)
    }

    fn failed(mut t: EnergyTrace, e: Error) -> EnergyTrace {
        t.status = TraceStatus::Failed(e.to_string());
        t
    }

    /// Fork the trace at its current step. Every returned child is either
    /// active one step further, converged, or failed.
    pub fn advance_trace(&self, trace: &EnergyTrace) -> Result<Vec<EnergyTrace>> {
        if trace.status != TraceStatus::Active {
            return Err(Error::Precondition("only active traces can be advanced".into()));
        }
        let k = trace.k();
        let sc = *self.constants();
        let center = trace.current_energy();
        let halfwidth = sc.eps_k(k) / 3.0;
        let tol = 1e-13f64.min(sc.eps_k(k + 1) / 100.0);
        let is_final = self.is_final_step(k);
        let b = trace.blocks.last().expect("block history");

        let solutions = if is_final {
            let m = |l: f64| Ok(self.chain(&trace.resonant_sets, l)?.innermost().clone());
            enumerate_fixed_points(m, center, halfwidth, tol)
        } else {
            let radius = self.follow_radius(k);
            let m = |l: f64| truncated_block_matrix(&self.inst.hamiltonian, self.lat(), b, radius, l);
            enumerate_fixed_points(m, center, halfwidth, tol)
        };
        let solutions = match solutions {
            Ok(s) => s,
            Err(e) => return Ok(vec![Self::failed(trace.clone(), e)]),
        };
        if solutions.is_empty() {
            return Ok(vec![Self::failed(trace.clone(), Error::Precondition(format!("no fixed point within {halfwidth:e} of {center}")))]);
        }

        let close = sc.eps_k(k + 1) / 10.0;
        let mut children = Vec::with_capacity(solutions.len());
        for (i, fp) in solutions.iter().enumerate() {
            let mut child = trace.clone();
            child.branch.push(i);
            child.contraction = child.contraction.max(fp.ratio);
            child.near_degenerate |= solutions.iter().any(|o| o.lambda != fp.lambda && (o.lambda - fp.lambda).abs() < close);
            child.energies.push(fp.lambda);
            let child = if is_final { self.finish(child) } else { self.extend(child) };
            children.push(child);
        }
        Ok(children)
    }

    /// Converged child: window check of the exact chain at `lambda0`.
    fn finish(&self, mut t: EnergyTrace) -> EnergyTrace {
        let lambda = t.current_energy();
        let gaps = self.chain(&t.resonant_sets, lambda).and_then(|c| self.window_check(&c, &t.energies));
        match gaps {
            Ok(g) => {
                t.stage_gaps = g;
                t.lambda0 = Some(lambda);
                t.status = TraceStatus::Converged;
                t.stopping_scale = self.stopping_scale(&t);
                t
            }
            Err(e) => Self::failed(t, e),
        }
    }

    /// Active child on step `k + 1`: classify the blocks of `R^(k)` at
    /// `L_{k+1}` against the new energy and locate `B_{x,k+1}`.
    fn extend(&self, mut t: EnergyTrace) -> EnergyTrace {
        let k = t.k();
        let e = t.current_energy();
        let sc = *self.constants();
        let current = t.resonant_sets.last().expect("resonant sets").clone();
        let comps = components_at_scale(&current, sc.length(k + 1) as u64, self.lat());
        let mut drop = Vec::new();
        for c in &comps {
            if classify_isolated(c, &comps, k + 1, &sc, self.lat()) {
                match self.ms.classify_resonant(c, k + 1, e) {
                    Ok((false, _)) => drop.extend(c.positions().iter()),
                    Ok((true, _)) => {}
                    Err(err) => return Self::failed(t, err),
                }
            }
        }
        let next = current.difference(&PositionSet::new(drop));
        if !next.contains(t.x) {
            return Self::failed(t, Error::Precondition(format!("start position removed on scale {}", k + 1)));
        }
        t.resonant_sets.push(next.clone());
        match self.chain(&t.resonant_sets, e).and_then(|c| self.window_check(&c, &t.energies)) {
            Ok(g) => t.stage_gaps = g,
            Err(err) => {
                t.resonant_sets.pop();
                return Self::failed(t, err);
            }
        }
        t.blocks.push(self.block_of(&next, t.x, k + 1));
        t
    }

    /// Run every branch of one start to completion.
    pub fn follow(&self, x: usize, sign: Sign) -> Result<Vec<EnergyTrace>> {
        if self.inst.params.is_decoupled() {
            let mut t = self.start_trace(x, sign)?;
            t.lambda0 = Some(t.energies[0]);
            t.status = TraceStatus::Converged;
            t.stopping_scale = Some(1);
            return Ok(vec![t]);
        }
        let mut out = Vec::new();
        let mut queue = VecDeque::from([self.start_trace(x, sign)?]);
        let mut expanded = 0;
        while let Some(t) = queue.pop_front() {
            expanded += 1;
            if expanded > self.opts.branch_cap {
                break;
            }
            for c in self.advance_trace(&t)? {
                if c.status == TraceStatus::Active {
                    queue.push_back(c);
                } else {
                    out.push(c);
                }
            }
        }
        Ok(out)
    }

    /// Truncated-matrix eigenvalue spacing test for `b` on scale `k` at energy `e`.
    pub fn autoresonance_check(&self, b: &Block, k: usize, e: f64) -> Result<AutoresonanceReport> {
        let sc = self.constants();
        let eps_k = sc.eps_k(k);
        let admissible = (b.volume() as f64) <= sc.autoresonance_volume(k) && (b.diameter() as f64) <= sc.length(k);
        let ft = truncated_block_matrix(&self.inst.hamiltonian, self.lat(), b, self.follow_radius(k), e)?;
        let min_gap = linalg::min_spacing(&ft.eigenvalues());
        Ok(AutoresonanceReport {
            block: b.clone(),
            k,
            min_gap,
            eps_k,
            admissible,
            autoresonant: admissible.then_some(min_gap < eps_k),
        })
    }

    /// First step at which the block has stopped growing, is small, and is not
    /// autoresonant. `None` while pending.
    pub fn stopping_scale(&self, t: &EnergyTrace) -> Option<usize> {
        let sc = self.constants();
        let n = t.blocks.len();
        (1..=n).find(|&k| {
            let b = &t.blocks[k - 1];
            let maximal = t.blocks[k..].iter().all(|later| later == b);
            maximal
                && (b.volume() as f64) <= sc.autoresonance_volume(k)
                && (b.diameter() as f64) <= sc.length(k)
                && self
                    .autoresonance_check(b, k, t.energies[k - 1])
                    .map_or(false, |r| r.autoresonant == Some(false))
        })
    }

    /// Lift the innermost eigenvector at `lambda0` through every stage.
    pub fn reconstruct_eigenfunction(&self, t: &EnergyTrace) -> Result<Reconstruction> {
        let lambda0 = t.lambda0.ok_or_else(|| Error::Precondition("trace has not converged".into()))?;
        let h = &self.inst.hamiltonian;
        let vector = if self.inst.params.is_decoupled() {
            let (vals, vecs) = linalg::sym_eigen(h.restrict(&sites_of(&PositionSet::new(vec![t.x])))?.entries());
            let col = if (vals[1] - lambda0).abs() < (vals[0] - lambda0).abs() { 1 } else { 0 };
            let mut v = DVector::zeros(h.dim());
            v[2 * t.x] = vecs[(0, col)];
            v[2 * t.x + 1] = vecs[(1, col)];
            (v, Vec::new())
        } else {
            let chain = self.chain(&t.resonant_sets, lambda0)?;
            let (vals, vecs) = linalg::sym_eigen(chain.innermost().entries());
            let p = (0..vals.len())
                .min_by(|&a, &b| (vals[a] - lambda0).abs().total_cmp(&(vals[b] - lambda0).abs()))
                .ok_or_else(|| Error::Precondition("empty innermost matrix".into()))?;
            (chain.apply(&vecs.column(p).into_owned())?, chain.gaps())
        };
        let (mut v, stage_gaps) = vector;
        v /= v.norm();
        let residual = (h.entries() * &v - &v * lambda0).norm();
        if residual > self.opts.residual_tol {
            return Err(Error::ResidualTooLarge { residual, tolerance: self.opts.residual_tol });
        }
        Ok(Reconstruction { lambda0, vector: v.iter().copied().collect(), residual, stage_gaps })
    }

    /// Follow every `(x, sign)` and compare the reached eigenvalues against
    /// the dense spectrum.
    pub fn sweep_all_eigenvalues(&self) -> Result<(CompletenessReport, Vec<EnergyTrace>)> {
        let sc = *self.constants();
        let mut traces = Vec::new();
        let mut nodes = 0usize;
        let mut cap_hit = false;
        let mut max_fraction = 0.0f64;
        let decoupled = self.inst.params.is_decoupled();
        let mut queue = VecDeque::new();
        for x in 0..self.lat().num_positions() {
            for sign in [Sign::Plus, Sign::Minus] {
                queue.push_back(self.start_trace(x, sign)?);
            }
        }
        while let Some(t) = queue.pop_front() {
            if decoupled {
                let mut t = t;
                t.lambda0 = Some(t.energies[0]);
                t.status = TraceStatus::Converged;
                traces.push(t);
                continue;
            }
            if nodes >= self.opts.branch_cap {
                cap_hit = true;
                break;
            }
            nodes += 1;
            let n = t.blocks.last().map_or(1, |b| b.volume());
            let children = self.advance_trace(&t)?;
            max_fraction = max_fraction.max(children.len() as f64 / (2 * n) as f64);
            for c in children {
                if c.status == TraceStatus::Active {
                    queue.push_back(c);
                } else {
                    traces.push(c);
                }
            }
        }

        let oracle = self.inst.hamiltonian.eigenvalues();
        let converged: Vec<&EnergyTrace> = traces.iter().filter(|t| t.is_converged()).collect();
        let tolerance_of = |t: &EnergyTrace| sc.eps_k(t.energies.len()).max(1e-9);
        let coverage: Vec<EigenvalueCoverage> = oracle
            .iter()
            .map(|&lambda| {
                let best = converged
                    .iter()
                    .map(|t| ((t.lambda0.unwrap() - lambda).abs(), tolerance_of(t)))
                    .min_by(|a, b| a.0.total_cmp(&b.0));
                let (nearest_distance, tolerance) = best.unwrap_or((f64::INFINITY, 1e-9));
                EigenvalueCoverage { lambda, nearest_distance, tolerance, reached: nearest_distance <= tolerance }
            })
            .collect();
        let spurious = converged
            .iter()
            .filter(|t| {
                let l = t.lambda0.unwrap();
                !oracle.iter().any(|o| (o - l).abs() <= tolerance_of(t))
            })
            .count();
        let reached = coverage.iter().filter(|c| c.reached).count();
        let report = CompletenessReport {
            missed: coverage.len() - reached,
            reached,
            coverage,
            spurious,
            converged_traces: converged.len(),
            failed_traces: traces.iter().filter(|t| matches!(t.status, TraceStatus::Failed(_))).count(),
            near_degenerate_traces: traces.iter().filter(|t| t.near_degenerate).count(),
            nodes_expanded: nodes,
            branch_cap_hit: cap_hit,
            max_branch_fraction: max_fraction,
        };
        Ok((report, traces))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DisorderField, ModelParams};

    fn instance(u: Vec<f64>, gamma: f64) -> Instance {
        let lat = Lattice::new(vec![u.len()]).unwrap();
        Instance::new(DisorderField::from_values(lat, u, 0).unwrap(), ModelParams::new(gamma).unwrap())
    }

    #[test]
    fn start_energies() {
        let inst = instance(vec![0.0, 2.0, 0.4], 1e-3);
        let f = EnergyFollower::new(&inst, FollowOptions::default());
        assert_eq!(f.start_trace(0, Sign::Plus).unwrap().energies, vec![1.0]);
        let e = f.start_trace(1, Sign::Minus).unwrap().energies[0];
        assert!((e + 5f64.sqrt()).abs() < 1e-15);
        assert!(f.start_trace(3, Sign::Plus).is_err());
    }

    #[test]
    fn lambda_independent_matrix_converges_in_one_step() {
        let inst = instance(vec![0.3], 1e-3);
        let f = EnergyFollower::new(&inst, FollowOptions::default());
        let b = Block::new(PositionSet::new(vec![0]), inst.lattice());
        let t = inst.field.t(0);
        let fp = f.block_fixed_point(&b, 1, t + 0.01, 0.05).unwrap().unwrap();
        assert_eq!(fp.lambda, t);
        assert_eq!(fp.iterations, 2);
    }

    #[test]
    fn decoupled_sweep_is_trivially_complete() {
        let lat = Lattice::new(vec![6]).unwrap();
        let inst = Instance::new(DisorderField::sample(lat, 3, 0), ModelParams::new(0.0).unwrap());
        let f = EnergyFollower::new(&inst, FollowOptions::default());
        let (rep, traces) = f.sweep_all_eigenvalues().unwrap();
        assert!(rep.complete());
        assert_eq!(rep.reached, 12);
        let r = f.reconstruct_eigenfunction(&traces[0]).unwrap();
        assert!(r.residual < 1e-14);
    }

    #[test]
    fn single_position_autoresonance() {
        let inst = instance(vec![0.0, 0.7], 1e-3);
        let f = EnergyFollower::new(&inst, FollowOptions::default());
        let b = Block::new(PositionSet::new(vec![0]), inst.lattice());
        let r = f.autoresonance_check(&b, 1, 1.0).unwrap();
        assert!((r.min_gap - 2.0).abs() < 1e-14);
        assert_eq!(r.autoresonant, Some(false));
    }

    #[test]
    fn small_chain_traces_converge_to_eigenvalues() {
        let lat = Lattice::new(vec![8]).unwrap();
        let inst = Instance::new(DisorderField::sample(lat, 11, 0), ModelParams::new(1e-3).unwrap());
        let f = EnergyFollower::new(&inst, FollowOptions::default());
        let (rep, traces) = f.sweep_all_eigenvalues().unwrap();
        assert!(rep.complete(), "{rep:?}");
        for t in traces.iter().filter(|t| t.is_converged()) {
            let r = f.reconstruct_eigenfunction(t).unwrap();
            assert!(r.residual <= 1e-8);
            for j in 0..t.energies.len() {
                for k in j + 1..t.energies.len() {
                    assert!((t.energies[k] - t.energies[j]).abs() < f.constants().eps_k(j + 1) / 2.0);
                }
            }
        }
    }
}

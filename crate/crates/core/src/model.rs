//! The random block Hamiltonian `H = H0 + V`.
//!
//! Each position `x` carries the 2x2 block `h_x = [[u_x, 1], [1, -u_x]]` with
//! `u_x` uniform on `[-1, 1]`; nearest-neighbour positions are coupled by
//! `gamma * I_2`. Sites are ordered position-major with the `+` layer first,
//! so site `2x` is `(x, +)` and site `2x + 1` is `(x, -)`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, PositionSet};
use crate::linalg;
use crate::rng::trial_rng;

/// Exponent relating the resonance window to the hopping, `eps = gamma^phi`.
pub const DEFAULT_PHI: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    gamma: f64,
    phi: f64,
}

impl ModelParams {
    pub fn new(gamma: f64) -> Result<Self> {
        Self::with_phi(gamma, DEFAULT_PHI)
    }

    pub fn with_phi(gamma: f64, phi: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidParameter { name: "gamma", reason: format!("{gamma} is not >= 0") });
        }
        if !(phi.is_finite() && phi > 0.0) {
            return Err(Error::InvalidParameter { name: "phi", reason: format!("{phi} is not > 0") });
        }
        Ok(Self { gamma, phi })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn epsilon(&self) -> f64 {
        self.gamma.powf(self.phi)
    }

    /// `gamma == 0`: positions decouple and the spectrum is exactly `{±t_x}`.
    pub fn is_decoupled(&self) -> bool {
        self.gamma == 0.0
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.gamma >= 0.1 {
            w.push(format!("gamma = {} is not small; multiscale windows may be violated", self.gamma));
        }
        w
    }
}

/// Eigenvalues `(t, -t)` of `h_x`, with `t = sqrt(u^2 + 1)`.
pub fn bare_levels(u: f64) -> (f64, f64) {
    let t = u.hypot(1.0);
    (t, -t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Layer {
    Plus,
    Minus,
}

/// One of the two internal states at a position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Site(pub usize);

impl Site {
    pub fn new(position: usize, layer: Layer) -> Self {
        Site(2 * position + usize::from(layer == Layer::Minus))
    }

    pub fn position(self) -> usize {
        self.0 / 2
    }

    pub fn layer(self) -> Layer {
        if self.0 % 2 == 0 {
            Layer::Plus
        } else {
            Layer::Minus
        }
    }
}

/// Both sites of every position in `set`, in canonical order.
pub fn sites_of(set: &PositionSet) -> Vec<Site> {
    set.iter().flat_map(|p| [Site(2 * p), Site(2 * p + 1)]).collect()
}

/// An iid disorder sample `u_x`, plus the seed that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderField {
    lattice: Lattice,
    u: Vec<f64>,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct DisorderDoc {
    dims: Vec<usize>,
    seed: u64,
    u: Vec<f64>,
}

impl DisorderField {
    /// Draw `u` for trial `trial` of a run seeded with `seed`.
    pub fn sample(lattice: Lattice, seed: u64, trial: u64) -> Self {
        let mut rng = trial_rng(seed, trial);
        let u = (0..lattice.num_positions()).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Self { lattice, u, seed }
    }

    /// Explicit values, e.g. for replays or constructed instances. Values
    /// outside `[-1, 1]` are accepted (probes evaluate there); see
    /// [`DisorderField::in_model_range`].
    pub fn from_values(lattice: Lattice, u: Vec<f64>, seed: u64) -> Result<Self> {
        if u.len() != lattice.num_positions() {
            return Err(Error::DimensionMismatch { expected: lattice.num_positions(), got: u.len() });
        }
        if let Some(bad) = u.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter { name: "u", reason: format!("non-finite value {bad}") });
        }
        Ok(Self { lattice, u, seed })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_value(mut self, position: usize, u: f64) -> Self {
        self.u[position] = u;
        self
    }

    pub fn t(&self, position: usize) -> f64 {
        bare_levels(self.u[position]).0
    }

    pub fn in_model_range(&self) -> bool {
        self.u.iter().all(|v| (-1.0..=1.0).contains(v))
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = DisorderDoc { dims: self.lattice.dims().to_vec(), seed: self.seed, u: self.u.clone() };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: DisorderDoc = serde_json::from_str(s)?;
        Self::from_values(Lattice::new(doc.dims)?, doc.u, doc.seed)
    }
}

/// A dense real symmetric matrix whose rows and columns are labelled by sites.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    labels: Vec<Site>,
    entries: DMatrix<f64>,
}

impl LabeledMatrix {
    /// `labels` must be strictly increasing.
    pub fn new(labels: Vec<Site>, entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != labels.len() || entries.ncols() != labels.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), got: entries.nrows() });
        }
        if labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Precondition("labels must be strictly increasing".into()));
        }
        Ok(Self { labels, entries })
    }

    pub fn empty() -> Self {
        Self { labels: Vec::new(), entries: DMatrix::zeros(0, 0) }
    }

    pub fn labels(&self) -> &[Site] {
        &self.labels
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, site: Site) -> Option<usize> {
        self.labels.binary_search(&site).ok()
    }

    pub fn indices_of(&self, sites: &[Site]) -> Result<Vec<usize>> {
        sites.iter().map(|&s| self.index_of(s).ok_or(Error::UnknownLabel(s.0))).collect()
    }

    /// Principal submatrix on `sites` (which must be increasing).
    pub fn restrict(&self, sites: &[Site]) -> Result<LabeledMatrix> {
        let idx = self.indices_of(sites)?;
        let m = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.entries[(idx[i], idx[j])]);
        LabeledMatrix::new(sites.to_vec(), m)
    }

    /// Positions covered by the labels.
    pub fn positions(&self) -> PositionSet {
        self.labels.iter().map(|s| s.position()).collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::sym_eigenvalues(&self.entries)
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        linalg::is_symmetric(&self.entries, rel_tol)
    }
}

/// Build `H = H0 + gamma J ⊗ I_2` on the whole lattice (open boundaries).
pub fn build_hamiltonian(field: &DisorderField, params: &ModelParams) -> LabeledMatrix {
    let lat = field.lattice();
    let n = lat.num_sites();
    let mut h = DMatrix::zeros(n, n);
    for x in 0..lat.num_positions() {
        let (p, m) = (2 * x, 2 * x + 1);
        let u = field.u[x];
        h[(p, p)] = u;
        h[(m, m)] = -u;
        h[(p, m)] = 1.0;
        h[(m, p)] = 1.0;
        for y in lat.neighbors(x) {
            h[(p, 2 * y)] = params.gamma();
            h[(m, 2 * y + 1)] = params.gamma();
        }
    }
    let labels = (0..n).map(Site).collect();
    LabeledMatrix { labels, entries: h }
}

/// The hopping part `V` of a full-lattice Hamiltonian built by [`build_hamiltonian`].
pub fn hopping_part(h: &LabeledMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(h.dim(), h.dim(), |i, j| {
        if h.labels[i].position() == h.labels[j].position() {
            0.0
        } else {
            h.entries[(i, j)]
        }
    })
}

/// True iff every eigenvalue of `h` lies in `[-sqrt2 - 2d gamma, sqrt2 + 2d gamma]`.
pub fn spectrum_range_check(h: &LabeledMatrix, params: &ModelParams, lattice: &Lattice) -> bool {
    let bound = std::f64::consts::SQRT_2 + 2.0 * lattice.dim() as f64 * params.gamma();
    h.eigenvalues().iter().all(|v| v.abs() <= bound)
}

/// A disorder sample together with its Hamiltonian.
#[derive(Debug, Clone)]
pub struct Instance {
    pub field: DisorderField,
    pub params: ModelParams,
    pub hamiltonian: LabeledMatrix,
}

impl Instance {
    pub fn new(field: DisorderField, params: ModelParams) -> Self {
        let hamiltonian = build_hamiltonian(&field, &params);
        Self { field, params, hamiltonian }
    }

    pub fn lattice(&self) -> &Lattice {
        self.field.lattice()
    }
}

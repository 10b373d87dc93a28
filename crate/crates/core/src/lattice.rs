//! Position lattice geometry.
//!
//! A [`Lattice`] is a rectangle `[0, n_1) x ... x [0, n_d)` in `Z^d` with the
//! l1 metric. Positions are addressed by their row-major flat index, so the
//! natural order of flat indices is the lexicographic order of coordinates.
//! Each position carries two sites (see [`crate::model::Site`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    dims: Vec<usize>,
    strides: Vec<usize>,
}

impl Lattice {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidLattice("dimension must be >= 1".into()));
        }
        if let Some(i) = dims.iter().position(|&n| n == 0) {
            return Err(Error::InvalidLattice(format!("side {i} has length 0")));
        }
        let mut strides = vec![1usize; dims.len()];
        for d in (0..dims.len() - 1).rev() {
            strides[d] = strides[d + 1] * dims[d + 1];
        }
        Ok(Self { dims, strides })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn num_positions(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn num_sites(&self) -> usize {
        2 * self.num_positions()
    }

    /// Largest l1 distance between two positions.
    pub fn diameter(&self) -> u64 {
        self.dims.iter().map(|&n| (n - 1) as u64).sum()
    }

    pub fn coords(&self, flat: usize) -> Vec<i64> {
        self.dims
            .iter()
            .zip(&self.strides)
            .map(|(&n, &s)| ((flat / s) % n) as i64)
            .collect()
    }

    pub fn flat(&self, coords: &[i64]) -> Option<usize> {
        if coords.len() != self.dims.len() {
            return None;
        }
        let mut idx = 0;
        for ((&c, &n), &s) in coords.iter().zip(&self.dims).zip(&self.strides) {
            if c < 0 || c as usize >= n {
                return None;
            }
            idx += c as usize * s;
        }
        Some(idx)
    }

    pub fn distance(&self, a: usize, b: usize) -> u64 {
        self.dims
            .iter()
            .zip(&self.strides)
            .map(|(&n, &s)| {
                let ca = (a / s) % n;
                let cb = (b / s) % n;
                ca.abs_diff(cb) as u64
            })
            .sum()
    }

    /// Nearest neighbours of a position inside the rectangle (open boundaries).
    pub fn neighbors(&self, flat: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * self.dim());
        for (&n, &s) in self.dims.iter().zip(&self.strides) {
            let c = (flat / s) % n;
            if c > 0 {
                out.push(flat - s);
            }
            if c + 1 < n {
                out.push(flat + s);
            }
        }
        out.sort_unstable();
        out
    }

    pub fn all_positions(&self) -> PositionSet {
        PositionSet((0..self.num_positions()).collect())
    }
}

/// l1 distance between two coordinate tuples.
pub fn l1_distance(p: &[i64], q: &[i64]) -> Result<u64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    Ok(p.iter().zip(q).map(|(a, b)| a.abs_diff(*b)).sum())
}

/// A sorted, duplicate-free set of flat position indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PositionSet(Vec<usize>);

impl PositionSet {
    pub fn new(mut positions: Vec<usize>) -> Self {
        positions.sort_unstable();
        positions.dedup();
        Self(positions)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, p: usize) -> bool {
        self.0.binary_search(&p).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn is_subset(&self, other: &PositionSet) -> bool {
        self.iter().all(|p| other.contains(p))
    }

    pub fn difference(&self, other: &PositionSet) -> PositionSet {
        PositionSet(self.iter().filter(|&p| !other.contains(p)).collect())
    }

    pub fn union(&self, other: &PositionSet) -> PositionSet {
        PositionSet::new(self.iter().chain(other.iter()).collect())
    }

    /// Every member lies inside `lat`.
    pub fn within(&self, lat: &Lattice) -> bool {
        self.0.last().is_none_or(|&p| p < lat.num_positions())
    }
}

impl FromIterator<usize> for PositionSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        PositionSet::new(iter.into_iter().collect())
    }
}

/// A connected component of a position set, with its volume and diameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    positions: PositionSet,
    diameter: u64,
}

impl Block {
    pub fn new(positions: PositionSet, lat: &Lattice) -> Self {
        assert!(!positions.is_empty(), "block must contain at least one position");
        let p = positions.as_slice();
        let mut diameter = 0;
        for (i, &a) in p.iter().enumerate() {
            for &b in &p[i + 1..] {
                diameter = diameter.max(lat.distance(a, b));
            }
        }
        Self { positions, diameter }
    }

    pub fn positions(&self) -> &PositionSet {
        &self.positions
    }

    /// Number of positions, `n(B)`.
    pub fn volume(&self) -> usize {
        self.positions.len()
    }

    pub fn diameter(&self) -> u64 {
        self.diameter
    }

    pub fn contains(&self, p: usize) -> bool {
        self.positions.contains(p)
    }

    pub fn min_position(&self) -> usize {
        self.positions.as_slice()[0]
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Partition `s` into maximal subsets spanned by links of l1 length `<= scale`.
///
/// Blocks are ordered by their smallest position.
pub fn components_at_scale(s: &PositionSet, scale: u64, lat: &Lattice) -> Vec<Block> {
    let p = s.as_slice();
    let mut dsu = DisjointSet::new(p.len());
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if lat.distance(p[i], p[j]) <= scale {
                dsu.union(i, j);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..p.len() {
        let root = dsu.find(i);
        groups.entry(root).or_default().push(p[i]);
    }
    let mut blocks: Vec<Block> = groups
        .into_values()
        .map(|v| Block::new(PositionSet::new(v), lat))
        .collect();
    blocks.sort_by_key(Block::min_position);
    blocks
}

/// Minimum l1 distance between two disjoint blocks.
pub fn block_distance(b1: &Block, b2: &Block, lat: &Lattice) -> Result<u64> {
    if let Some(p) = b1.positions().iter().find(|&p| b2.contains(p)) {
        return Err(Error::OverlappingBlocks(p));
    }
    Ok(b1
        .positions()
        .iter()
        .flat_map(|a| b2.positions().iter().map(move |b| (a, b)))
        .map(|(a, b)| lat.distance(a, b))
        .min()
        .unwrap_or(0))
}

/// Lattice positions at l1 distance `< radius` from `b`; exactly `b` when `radius == 0`.
pub fn neighborhood(b: &Block, radius: f64, lat: &Lattice) -> PositionSet {
    if radius <= 0.0 {
        return b.positions().clone();
    }
    (0..lat.num_positions())
        .filter(|&y| b.positions().iter().any(|x| (lat.distance(x, y) as f64) < radius))
        .collect()
}

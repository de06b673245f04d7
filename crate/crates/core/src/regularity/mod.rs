//! Gromov-Hausdorff distances between small finite spaces and the
//! classification of points by closeness of their balls to Euclidean balls.

mod scan;

pub use scan::{
    epsilon_regular_scan, regular_set_measure, KMass, KScan, LevelRecord, LevelVerdict,
    RegularMass, ScanOptions, ScanReport, Verdict,
};

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::space::FiniteMMS;

/// Largest point count accepted by [`gh_exact`] on either side.
pub const GH_EXACT_LIMIT: usize = 8;

/// Dense symmetric distance table.
#[derive(Debug, Clone)]
pub(crate) struct Table {
    n: usize,
    d: Vec<f64>,
}

impl Table {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = f(i, j);
            }
        }
        Self { n, d }
    }

    pub fn of(space: &FiniteMMS, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |i, j| space.dist(idx[i], idx[j]))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn diameter(&self) -> f64 {
        self.d.iter().copied().fold(0.0, f64::max)
    }

    pub fn eccentricities(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).fold(0.0, f64::max))
            .collect()
    }
}

/// A relation between two point sets that is surjective both ways.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GHCorrespondence {
    pub relation: Vec<(usize, usize)>,
    pub distortion: f64,
}

impl GHCorrespondence {
    pub fn new(x: &FiniteMMS, y: &FiniteMMS, relation: Vec<(usize, usize)>) -> Result<Self> {
        let tx = Table::of(x, &(0..x.len()).collect::<Vec<_>>());
        let ty = Table::of(y, &(0..y.len()).collect::<Vec<_>>());
        Self::from_tables(&tx, &ty, relation)
    }

    pub(crate) fn from_tables(
        tx: &Table,
        ty: &Table,
        relation: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let mut seen_x = vec![false; tx.len()];
        let mut seen_y = vec![false; ty.len()];
        for &(i, j) in &relation {
            if i >= tx.len() || j >= ty.len() {
                return Err(invalid(
                    "relation",
                    format!("pair ({i}, {j}) is out of range"),
                ));
            }
            seen_x[i] = true;
            seen_y[j] = true;
        }
        if seen_x.contains(&false) || seen_y.contains(&false) {
            return Err(invalid("relation", "does not cover both point sets"));
        }
        let distortion = relation_distortion(tx, ty, &relation);
        Ok(Self {
            relation,
            distortion,
        })
    }
}

pub(crate) fn relation_distortion(tx: &Table, ty: &Table, relation: &[(usize, usize)]) -> f64 {
    let mut worst = 0.0f64;
    for (a, &(i, j)) in relation.iter().enumerate() {
        for &(k, l) in &relation[a + 1..] {
            worst = worst.max((tx.get(i, k) - ty.get(j, l)).abs());
        }
    }
    worst
}

/// Half the least distortion over all correspondences, with a witness.
pub fn gh_exact(x: &FiniteMMS, y: &FiniteMMS) -> Result<(f64, GHCorrespondence)> {
    for s in [x, y] {
        if s.len() > GH_EXACT_LIMIT {
            return Err(Error::SupportTooLarge {
                rows: x.len(),
                cols: y.len(),
                limit: GH_EXACT_LIMIT,
            });
        }
        if s.len() == 0 {
            return Err(Error::EmptySupport);
        }
    }
    let tx = Table::of(x, &(0..x.len()).collect::<Vec<_>>());
    let ty = Table::of(y, &(0..y.len()).collect::<Vec<_>>());
    let c = gh_tables(&tx, &ty);
    Ok((c.distortion / 2.0, c))
}

/// Bisects over the finite set of attainable distortion values.
pub(crate) fn gh_tables(tx: &Table, ty: &Table) -> GHCorrespondence {
    let mut cand: Vec<f64> = Vec::new();
    for i in 0..tx.len() {
        for k in i..tx.len() {
            for j in 0..ty.len() {
                for l in j..ty.len() {
                    cand.push((tx.get(i, k) - ty.get(j, l)).abs());
                }
            }
        }
    }
    cand.sort_by(f64::total_cmp);
    cand.dedup();
    // the full relation attains the largest candidate
    let (mut lo, mut hi) = (0usize, cand.len() - 1);
    let mut best = decide(tx, ty, cand[hi]).expect("full relation");
    while lo < hi {
        let mid = (lo + hi) / 2;
        match decide(tx, ty, cand[mid]) {
            Some(r) => {
                best = r;
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    let distortion = relation_distortion(tx, ty, &best);
    GHCorrespondence {
        relation: best,
        distortion,
    }
}

/// A correspondence with distortion at most `delta`: a set of pairwise
/// compatible pairs meeting every row and every column. Pairs are bits of a
/// `u64` (both sides have at most 8 points).
fn decide(tx: &Table, ty: &Table, delta: f64) -> Option<Vec<(usize, usize)>> {
    let (nx, ny) = (tx.len(), ty.len());
    let pair = |i: usize, j: usize| i * ny + j;
    let mut compat = vec![0u64; nx * ny];
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nx {
                for l in 0..ny {
                    if (tx.get(i, k) - ty.get(j, l)).abs() <= delta {
                        compat[pair(i, j)] |= 1 << pair(k, l);
                    }
                }
            }
        }
    }
    let row = |i: usize| ((1u64 << ny) - 1) << (i * ny);
    let col = |j: usize| (0..nx).fold(0u64, |m, i| m | 1 << pair(i, j));
    let rows: Vec<u64> = (0..nx).map(row).collect();
    let cols: Vec<u64> = (0..ny).map(col).collect();

    fn go(alive: u64, chosen: u64, rows: &[u64], cols: &[u64], compat: &[u64]) -> Option<u64> {
        // the most constrained uncovered row or column
        let mut best: Option<(u32, u64)> = None;
        for &line in rows.iter().chain(cols) {
            if chosen & line != 0 {
                continue;
            }
            let c = (alive & line).count_ones();
            if c == 0 {
                return None;
            }
            if best.map_or(true, |(b, _)| c < b) {
                best = Some((c, line));
            }
        }
        let Some((_, line)) = best else {
            return Some(chosen);
        };
        let mut options = alive & line;
        while options != 0 {
            let p = options.trailing_zeros() as usize;
            options &= options - 1;
            if let Some(r) = go(alive & compat[p], chosen | 1 << p, rows, cols, compat) {
                return Some(r);
            }
        }
        None
    }
    // a pair incompatible with itself cannot be used
    let all = (0..nx * ny).fold(0u64, |m, p| {
        if compat[p] >> p & 1 == 1 {
            m | 1 << p
        } else {
            m
        }
    });
    go(all, 0, &rows, &cols, &compat).map(|bits| {
        (0..nx * ny)
            .filter(|p| bits >> p & 1 == 1)
            .map(|p| (p / ny, p % ny))
            .collect()
    })
}

/// Hausdorff distance between two finite subsets of the line.
pub(crate) fn hausdorff_1d(a: &[f64], b: &[f64]) -> f64 {
    let one = |p: &[f64], q: &[f64]| {
        p.iter()
            .map(|&u| {
                q.iter()
                    .map(|&v| (u - v).abs())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

/// `1/2 max(|diam X - diam Y|, d_H(ecc X, ecc Y))`.
///
/// Paired points of a correspondence with distortion `e` have
/// eccentricities within `e` of each other.
pub fn gh_lower_bound(x: &FiniteMMS, y: &FiniteMMS) -> f64 {
    if x.len() == 0 || y.len() == 0 {
        return 0.0;
    }
    let tx = Table::of(x, &(0..x.len()).collect::<Vec<_>>());
    let ty = Table::of(y, &(0..y.len()).collect::<Vec<_>>());
    let diam = (tx.diameter() - ty.diameter()).abs();
    0.5 * diam.max(hausdorff_1d(&tx.eccentricities(), &ty.eccentricities()))
}

//! Exact discrete W2 transport, geodesic plans, uniqueness probing and the
//! symmetrized competitor construction.

mod competitor;
mod plan;
mod probe;
mod simplex;

pub use competitor::{
    run_competitor, symmetrized_competitor, verify_competitor, CompetitorOptions, CompetitorReport,
    CompetitorRun, TargetVariant,
};
pub use plan::{lift_to_geodesic_plan, lift_with, pushforward_at, GeodesicPlan, PlanAtom};
pub use probe::{is_induced_by_map, uniqueness_probe, UniquenessVerdict};
pub use simplex::{solve_transport, TransportSolution};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::space::FiniteMMS;

/// Relative tolerance on the difference of total masses.
pub const MASS_TOL: f64 = 1e-9;

/// Largest support size handled by [`brute_force_w2`] on either side.
pub const BRUTE_FORCE_LIMIT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

/// A transport plan between two discrete measures, stored sparsely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub source: Measure,
    pub target: Measure,
    pub entries: Vec<Entry>,
    pub cost: f64,
}

impl Coupling {
    /// Builds a coupling from entries, deriving marginals and cost.
    pub fn from_entries(space: &FiniteMMS, entries: Vec<Entry>) -> Result<Self> {
        for e in &entries {
            space.check_index(e.source)?;
            space.check_index(e.target)?;
        }
        let source = Measure::new(entries.iter().map(|e| (e.source, e.mass)))?;
        let target = Measure::new(entries.iter().map(|e| (e.target, e.mass)))?;
        let cost = entries
            .iter()
            .map(|e| e.mass * space.dist(e.source, e.target).powi(2))
            .sum();
        Ok(Self {
            source,
            target,
            entries,
            cost,
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.mass).sum()
    }

    /// Largest deviation of the entry marginals from the stored measures.
    pub fn marginal_defect(&self) -> f64 {
        let rows =
            Measure::new(self.entries.iter().map(|e| (e.source, e.mass))).unwrap_or_default();
        let cols =
            Measure::new(self.entries.iter().map(|e| (e.target, e.mass))).unwrap_or_default();
        rows.max_defect(&self.source)
            .max(cols.max_defect(&self.target))
    }

    /// Entrywise largest difference between two couplings.
    pub fn max_entry_diff(&self, other: &Coupling) -> f64 {
        use std::collections::BTreeMap;
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for e in &self.entries {
            *acc.entry((e.source, e.target)).or_insert(0.0) += e.mass;
        }
        for e in &other.entries {
            *acc.entry((e.source, e.target)).or_insert(0.0) -= e.mass;
        }
        acc.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Validated transport instance: supports, masses and the squared-distance cost block.
pub(crate) struct Instance {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub cost: Vec<f64>,
}

impl Instance {
    pub fn new(space: &FiniteMMS, mu0: &Measure, mu1: &Measure) -> Result<Self> {
        if mu0.is_empty() || mu1.is_empty() {
            return Err(Error::EmptySupport);
        }
        mu0.check_support(space)?;
        mu1.check_support(space)?;
        let (t0, t1) = (mu0.total(), mu1.total());
        if (t0 - t1).abs() > MASS_TOL * t0.max(t1).max(1.0) {
            return Err(Error::MassMismatch {
                left: t0,
                right: t1,
            });
        }
        let rows = mu0.support();
        let cols = mu1.support();
        let mut cost = Vec::with_capacity(rows.len() * cols.len());
        for &i in &rows {
            for &j in &cols {
                cost.push(space.dist(i, j).powi(2));
            }
        }
        let a = mu0.masses();
        // absorb the rounding gap so that the basis flows close exactly
        let mut b = mu1.masses();
        let gap = t0 - b.iter().sum::<f64>();
        let big = (0..b.len())
            .max_by(|&x, &y| b[x].total_cmp(&b[y]))
            .unwrap_or(0);
        b[big] += gap;
        Ok(Self {
            rows,
            cols,
            a,
            b,
            cost,
        })
    }

    pub fn coupling(
        &self,
        space: &FiniteMMS,
        mu0: &Measure,
        mu1: &Measure,
        flow: &[f64],
    ) -> Coupling {
        let n = self.cols.len();
        let entries: Vec<Entry> = flow
            .iter()
            .enumerate()
            .filter(|(_, &f)| f > 0.0)
            .map(|(k, &f)| Entry {
                source: self.rows[k / n],
                target: self.cols[k % n],
                mass: f,
            })
            .collect();
        let cost = entries
            .iter()
            .map(|e| e.mass * space.dist(e.source, e.target).powi(2))
            .sum();
        Coupling {
            source: mu0.clone(),
            target: mu1.clone(),
            entries,
            cost,
        }
    }
}

/// Optimal coupling for the squared-distance cost; returns `(W2^2, coupling)`.
pub fn solve_w2(space: &FiniteMMS, mu0: &Measure, mu1: &Measure) -> Result<(f64, Coupling)> {
    let inst = Instance::new(space, mu0, mu1)?;
    let sol = solve_transport(&inst.a, &inst.b, &inst.cost)?;
    let c = inst.coupling(space, mu0, mu1, &sol.flow);
    Ok((c.cost, c))
}

/// Minimum cost over every spanning-tree basis of the transport polytope.
/// Exponential; supports are limited to [`BRUTE_FORCE_LIMIT`] on each side.
pub fn brute_force_w2(space: &FiniteMMS, mu0: &Measure, mu1: &Measure) -> Result<f64> {
    let inst = Instance::new(space, mu0, mu1)?;
    let (m, n) = (inst.a.len(), inst.b.len());
    if m > BRUTE_FORCE_LIMIT || n > BRUTE_FORCE_LIMIT {
        return Err(Error::SupportTooLarge {
            rows: m,
            cols: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(m + n - 1);
    let mut dsu = Dsu::new(m + n);
    let neg_tol = -1e-12 * inst.a.iter().sum::<f64>().max(1.0);
    enumerate_trees(&cells, 0, m, &mut chosen, &mut dsu, &mut |basis| {
        if let Ok(flow) = simplex::tree_flows(&inst.a, &inst.b, basis) {
            if flow.iter().all(|&f| f >= neg_tol) {
                let c: f64 = flow
                    .iter()
                    .zip(&inst.cost)
                    .map(|(f, c)| f.max(0.0) * c)
                    .sum();
                best = best.min(c);
            }
        }
    });
    Ok(best)
}

fn enumerate_trees(
    cells: &[(usize, usize)],
    from: usize,
    m: usize,
    chosen: &mut Vec<(usize, usize)>,
    dsu: &mut Dsu,
    visit: &mut dyn FnMut(&[(usize, usize)]),
) {
    let need = dsu.len() - 1 - chosen.len();
    if need == 0 {
        visit(chosen);
        return;
    }
    if cells.len() - from < need {
        return;
    }
    for k in from..=cells.len() - need {
        let (i, j) = cells[k];
        if let Some(undo) = dsu.union(i, m + j) {
            chosen.push((i, j));
            enumerate_trees(cells, k + 1, m, chosen, dsu, visit);
            chosen.pop();
            dsu.rollback(undo);
        }
    }
}

/// Union-find with union by size and rollback (no path compression).
struct Dsu {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn len(&self) -> usize {
        self.parent.len()
    }

    fn find(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    /// Returns the absorbed root on success, `None` if already connected.
    fn union(&mut self, a: usize, b: usize) -> Option<usize> {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        Some(rb)
    }

    fn rollback(&mut self, absorbed: usize) {
        let root = self.parent[absorbed];
        self.size[root] -= self.size[absorbed];
        self.parent[absorbed] = absorbed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Meta, Point};

    fn line(xs: &[f64]) -> FiniteMMS {
        let pts = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| Point::at(i, vec![x]))
            .collect();
        FiniteMMS::from_fn(pts, vec![1.0; xs.len()], Meta::default(), |i, j| {
            (xs[i] - xs[j]).abs()
        })
        .unwrap()
    }

    #[test]
    fn dirac_to_itself_is_free() {
        let s = line(&[0.0, 1.0]);
        let (c, cp) = solve_w2(&s, &Measure::dirac(1), &Measure::dirac(1)).unwrap();
        assert_eq!(c, 0.0);
        assert_eq!(
            cp.entries,
            vec![Entry {
                source: 1,
                target: 1,
                mass: 1.0
            }]
        );
    }

    #[test]
    fn forced_split() {
        let s = line(&[0.0, 1.0]);
        let mu1 = Measure::new([(0, 0.5), (1, 0.5)]).unwrap();
        let (c, cp) = solve_w2(&s, &Measure::dirac(0), &mu1).unwrap();
        assert_eq!(c, 0.5);
        assert_eq!(cp.entries.len(), 2);
        assert_eq!(brute_force_w2(&s, &Measure::dirac(0), &mu1).unwrap(), 0.5);
    }

    #[test]
    fn single_row_brute_force() {
        let s = line(&[0.0, 1.0, 3.0]);
        let mu1 = Measure::new([(1, 0.25), (2, 0.75)]).unwrap();
        assert_eq!(
            brute_force_w2(&s, &Measure::dirac(0), &mu1).unwrap(),
            0.25 + 0.75 * 9.0
        );
    }

    #[test]
    fn spanning_tree_count_of_k33() {
        let cells: Vec<(usize, usize)> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
        let mut count = 0;
        enumerate_trees(&cells, 0, 3, &mut Vec::new(), &mut Dsu::new(6), &mut |_| {
            count += 1
        });
        // K_{m,n} has m^(n-1) n^(m-1) spanning trees
        assert_eq!(count, 81);
    }

    #[test]
    fn input_errors() {
        let s = line(&[0.0, 1.0]);
        assert_eq!(
            solve_w2(&s, &Measure::dirac(0), &Measure::default()).unwrap_err(),
            Error::EmptySupport
        );
        let half = Measure::new([(0, 0.5)]).unwrap();
        assert!(matches!(
            solve_w2(&s, &Measure::dirac(0), &half),
            Err(Error::MassMismatch { .. })
        ));
        assert!(solve_w2(&s, &Measure::dirac(5), &Measure::dirac(0)).is_err());
        let wide = line(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let u = Measure::new((0..6).map(|i| (i, 1.0 / 6.0))).unwrap();
        assert!(matches!(
            brute_force_w2(&wide, &u, &u),
            Err(Error::SupportTooLarge { .. })
        ));
    }
}

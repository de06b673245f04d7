use std::collections::BTreeMap;

use serde::Serialize;

use super::{solve_transport, Coupling, Instance};
use crate::error::Result;
use crate::measure::Measure;
use crate::space::FiniteMMS;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum UniquenessVerdict {
    Unique {
        cost: f64,
        coupling: Coupling,
    },
    NonUnique {
        cost: f64,
        coupling: Coupling,
        witness: Coupling,
        witness_cost: f64,
        /// Largest entrywise difference between the two couplings.
        distance: f64,
    },
}

impl UniquenessVerdict {
    pub fn is_unique(&self) -> bool {
        matches!(self, Self::Unique { .. })
    }
}

/// Looks for a second optimal coupling.
///
/// Cells with zero reduced cost at the optimal duals span the optimal face.
/// The optimum is re-solved on that face with a secondary cost equal to the
/// indicator of the first solution's support. The first solution is a vertex,
/// so any other optimal coupling must put mass outside that support, and the
/// secondary optimum drops below the total mass exactly when one exists.
pub fn uniqueness_probe(
    space: &FiniteMMS,
    mu0: &Measure,
    mu1: &Measure,
    tol: f64,
) -> Result<UniquenessVerdict> {
    let inst = Instance::new(space, mu0, mu1)?;
    let (m, n) = (inst.a.len(), inst.b.len());
    let first = solve_transport(&inst.a, &inst.b, &inst.cost)?;
    let coupling = inst.coupling(space, mu0, mu1, &first.flow);
    let cmax = inst.cost.iter().fold(0.0f64, |s, &c| s.max(c));
    let rc_tol = 1e-9 * (1.0 + cmax);
    let big = 1e6 * (1.0 + (m * n) as f64);

    let mut secondary = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let k = i * n + j;
            secondary[k] = if first.reduced_cost(&inst.cost, i, j) > rc_tol {
                big
            } else if first.flow[k] > tol {
                1.0
            } else {
                0.0
            };
        }
    }
    let alt = solve_transport(&inst.a, &inst.b, &secondary)?;
    let on_face = alt
        .flow
        .iter()
        .zip(&secondary)
        .all(|(&f, &w)| f <= tol || w < big);
    let witness = inst.coupling(space, mu0, mu1, &alt.flow);
    let distance = coupling.max_entry_diff(&witness);
    if on_face
        && distance > tol
        && (witness.cost - coupling.cost).abs() <= tol * (1.0 + coupling.cost)
    {
        return Ok(UniquenessVerdict::NonUnique {
            cost: coupling.cost,
            witness_cost: witness.cost,
            coupling,
            witness,
            distance,
        });
    }
    Ok(UniquenessVerdict::Unique {
        cost: coupling.cost,
        coupling,
    })
}

/// True iff every source point sends more than `tol` mass to exactly one target.
pub fn is_induced_by_map(coupling: &Coupling, tol: f64) -> bool {
    let mut targets: BTreeMap<usize, usize> = BTreeMap::new();
    for e in &coupling.entries {
        let c = targets.entry(e.source).or_insert(0);
        if e.mass > tol {
            *c += 1;
        }
    }
    targets.values().all(|&c| c == 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Meta, Point};
    use crate::transport::Entry;

    fn square_linf() -> FiniteMMS {
        let c = [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        let pts = c
            .iter()
            .enumerate()
            .map(|(i, p)| Point::at(i, p.to_vec()))
            .collect();
        FiniteMMS::from_fn(pts, vec![1.0; 4], Meta::default(), |i, j| {
            (c[i][0] - c[j][0]).abs().max((c[i][1] - c[j][1]).abs())
        })
        .unwrap()
    }

    #[test]
    fn forced_instance_is_unique() {
        let s = square_linf();
        let mu1 = Measure::new([(0, 0.5), (2, 0.5)]).unwrap();
        assert!(uniqueness_probe(&s, &Measure::dirac(0), &mu1, 1e-9)
            .unwrap()
            .is_unique());
    }

    #[test]
    fn equidistant_square_is_not() {
        let s = square_linf();
        let mu0 = Measure::new([(0, 0.5), (1, 0.5)]).unwrap();
        let mu1 = Measure::new([(2, 0.5), (3, 0.5)]).unwrap();
        match uniqueness_probe(&s, &mu0, &mu1, 1e-9).unwrap() {
            UniquenessVerdict::NonUnique {
                cost,
                witness_cost,
                distance,
                ..
            } => {
                assert_eq!(cost, witness_cost);
                assert!(distance >= 0.5 - 1e-12);
            }
            v => panic!("expected non-unique, got {v:?}"),
        }
    }

    #[test]
    fn map_detection() {
        let s = square_linf();
        let diag = Coupling::from_entries(
            &s,
            vec![Entry {
                source: 0,
                target: 0,
                mass: 1.0,
            }],
        )
        .unwrap();
        assert!(is_induced_by_map(&diag, 1e-12));
        let split = Coupling::from_entries(
            &s,
            vec![
                Entry {
                    source: 0,
                    target: 2,
                    mass: 0.5,
                },
                Entry {
                    source: 0,
                    target: 3,
                    mass: 0.5,
                },
            ],
        )
        .unwrap();
        assert!(!is_induced_by_map(&split, 1e-12));
    }
}

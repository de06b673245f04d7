use serde::{Deserialize, Serialize};

use super::{Coupling, Entry};
use crate::error::{invalid, Result};
use crate::geodesic::{DiscreteGeodesic, GeodesicFinder, GeodesicOptions};
use crate::measure::Measure;
use crate::space::FiniteMMS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanAtom {
    pub geodesic: DiscreteGeodesic,
    pub mass: f64,
}

/// A finite weighted collection of discrete geodesics.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GeodesicPlan {
    pub atoms: Vec<PlanAtom>,
}

impl GeodesicPlan {
    pub fn new(atoms: Vec<PlanAtom>) -> Result<Self> {
        if atoms.iter().any(|a| !(a.mass > 0.0) || !a.mass.is_finite()) {
            return Err(invalid("atoms", "masses must be positive and finite"));
        }
        Ok(Self { atoms })
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// `sum mass * length^2`.
    pub fn cost(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.mass * a.geodesic.length().powi(2))
            .sum()
    }

    /// The `(e_0, e_1)` image of the plan.
    pub fn endpoint_coupling(&self, space: &FiniteMMS) -> Result<Coupling> {
        let mut acc: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
        for a in &self.atoms {
            *acc.entry((a.geodesic.start(), a.geodesic.end()))
                .or_insert(0.0) += a.mass;
        }
        Coupling::from_entries(
            space,
            acc.into_iter()
                .map(|((source, target), mass)| Entry {
                    source,
                    target,
                    mass,
                })
                .collect(),
        )
    }

    /// Worst constant-speed defect over all atoms.
    pub fn constant_speed_defect(&self, space: &FiniteMMS) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.geodesic.constant_speed_defect(space))
            .fold(0.0, f64::max)
    }
}

/// One geodesic per coupling entry: the first chain the finder returns.
pub fn lift_to_geodesic_plan(
    space: &FiniteMMS,
    coupling: &Coupling,
    budget: usize,
) -> Result<GeodesicPlan> {
    let finder = GeodesicFinder::new(space, GeodesicOptions::default());
    lift_with(&finder, coupling, budget)
}

pub fn lift_with(
    finder: &GeodesicFinder<'_>,
    coupling: &Coupling,
    budget: usize,
) -> Result<GeodesicPlan> {
    let mut atoms = Vec::with_capacity(coupling.entries.len());
    for e in &coupling.entries {
        if e.mass <= 0.0 {
            continue;
        }
        let mut chains = finder.between(e.source, e.target, budget)?;
        atoms.push(PlanAtom {
            geodesic: chains.swap_remove(0),
            mass: e.mass,
        });
    }
    GeodesicPlan::new(atoms)
}

/// `(e_t)_# plan`.
pub fn pushforward_at(plan: &GeodesicPlan, t: f64, space: &FiniteMMS) -> Result<Measure> {
    let mut pts = Vec::with_capacity(plan.atoms.len());
    for a in &plan.atoms {
        let p = a.geodesic.evaluate(t)?;
        space.check_index(p)?;
        pts.push((p, a.mass));
    }
    Measure::new(pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::segment_space;
    use crate::transport::solve_w2;

    #[test]
    fn diagonal_lift_is_trivial() {
        let s = segment_space(0.2).unwrap();
        let mu = Measure::new([(0, 0.5), (3, 0.5)]).unwrap();
        let (_, c) = solve_w2(&s, &mu, &mu).unwrap();
        let p = lift_to_geodesic_plan(&s, &c, 4).unwrap();
        assert!(p.atoms.iter().all(|a| a.geodesic.length() == 0.0));
        assert_eq!(pushforward_at(&p, 0.3, &s).unwrap(), mu);
    }

    #[test]
    fn off_diagonal_entry_becomes_monotone_chain() {
        let s = segment_space(0.2).unwrap();
        let (_, c) = solve_w2(&s, &Measure::dirac(1), &Measure::dirac(5)).unwrap();
        let p = lift_to_geodesic_plan(&s, &c, 4).unwrap();
        assert_eq!(p.atoms[0].geodesic.nodes(), &[1, 2, 3, 4, 5]);
        assert_eq!(pushforward_at(&p, 0.5, &s).unwrap(), Measure::dirac(3));
        assert_eq!(p.endpoint_coupling(&s).unwrap().entries, c.entries);
        assert!((p.cost() - c.cost).abs() < 1e-15);
    }
}

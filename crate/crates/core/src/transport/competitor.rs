use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{lift_to_geodesic_plan, solve_w2, Coupling, GeodesicPlan, PlanAtom};
use crate::error::{Error, Result};
use crate::io::check_permutation;
use crate::measure::Measure;
use crate::space::{BallKind, FiniteMMS};

/// Shape of the target measure in the non-uniqueness construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TargetVariant {
    /// `(delta_x + delta_f(x)) / 2`.
    Point,
    /// Half the normalized measure of the open ball `B_r(x)` plus half that of its image.
    Ball { radius: f64 },
}

impl TargetVariant {
    /// The set `S` around `x`; the construction needs `S` and `f(S)` disjoint.
    pub fn near_set(&self, space: &FiniteMMS, x: usize) -> Vec<usize> {
        match *self {
            Self::Point => vec![x],
            Self::Ball { radius } => space.ball_indices(x, radius, BallKind::Open),
        }
    }

    pub fn target(&self, space: &FiniteMMS, f: &[usize], x: usize) -> Result<Measure> {
        let s = self.near_set(space, x);
        let image: Vec<usize> = s.iter().map(|&i| f[i]).collect();
        let near = Measure::normalized_restriction(space, &s)?;
        let far = Measure::normalized_restriction(space, &image)?;
        Measure::new(
            near.atoms()
                .iter()
                .chain(far.atoms())
                .map(|a| (a.point, a.mass / 2.0)),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompetitorOptions {
    pub variant: TargetVariant,
    /// Allowed distance distortion of `f`.
    pub iso_tol: f64,
    /// Points moved by at most this much count as fixed; defaults to the pitch.
    pub fix_tol: Option<f64>,
    /// Tolerance on the target marginal check.
    pub mass_tol: f64,
}

impl Default for CompetitorOptions {
    fn default() -> Self {
        Self {
            variant: TargetVariant::Point,
            iso_tol: 1e-9,
            fix_tol: None,
            mass_tol: 1e-9,
        }
    }
}

/// Reflects the part of `plan` ending near `x` through `f` and the part
/// ending near `f(x)` through `f^-1`.
pub fn symmetrized_competitor(
    space: &FiniteMMS,
    f: &[usize],
    plan: &GeodesicPlan,
    x: usize,
    opts: &CompetitorOptions,
) -> Result<GeodesicPlan> {
    let n = space.len();
    if f.len() != n {
        return Err(Error::Precondition(format!(
            "map has {} entries for {n} points",
            f.len()
        )));
    }
    check_permutation(f)?;
    space.check_index(x)?;
    let distortion = crate::symmetry::distortion(space, f);
    if distortion > opts.iso_tol {
        return Err(Error::Precondition(format!(
            "map is not an isometry (distortion {distortion:e})"
        )));
    }
    let fix_tol = opts.fix_tol.or(space.pitch()).unwrap_or(0.0);
    if space.dist(x, f[x]) <= fix_tol {
        return Err(Error::Precondition("x lies in the fixed set of f".into()));
    }
    let near = opts.variant.near_set(space, x);
    let mut side = vec![0u8; n];
    for &i in &near {
        side[i] = 1;
    }
    for &i in &near {
        if side[f[i]] == 1 {
            return Err(Error::Precondition("target set meets its image".into()));
        }
        side[f[i]] = 2;
    }
    for a in &plan.atoms {
        let s = a.geodesic.start();
        if space.dist(s, f[s]) > fix_tol {
            return Err(Error::Precondition(format!(
                "plan source point {s} is moved by f"
            )));
        }
    }
    let want = opts.variant.target(space, f, x)?;
    let got = Measure::new(plan.atoms.iter().map(|a| (a.geodesic.end(), a.mass)))?;
    if got.max_defect(&want) > opts.mass_tol {
        return Err(Error::Precondition(
            "plan target marginal does not match the variant".into(),
        ));
    }

    let mut inverse = vec![0; n];
    for (i, &j) in f.iter().enumerate() {
        inverse[j] = i;
    }
    let atoms = plan
        .atoms
        .iter()
        .map(|a| {
            let g = match side[a.geodesic.end()] {
                1 => a.geodesic.map_nodes(f),
                _ => a.geodesic.map_nodes(&inverse),
            };
            PlanAtom {
                geodesic: g,
                mass: a.mass,
            }
        })
        .collect();
    GeodesicPlan::new(atoms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompetitorReport {
    pub marginals_equal: bool,
    pub marginal_defect: f64,
    pub cost_equal: bool,
    pub cost_defect: f64,
    pub distinct: bool,
    /// Largest difference of the masses the two plans give one geodesic.
    pub distance: f64,
}

pub fn verify_competitor(
    plan: &GeodesicPlan,
    competitor: &GeodesicPlan,
    tol: f64,
) -> CompetitorReport {
    let marginal = |p: &GeodesicPlan, end: bool| {
        Measure::new(p.atoms.iter().map(|a| {
            let pt = if end {
                a.geodesic.end()
            } else {
                a.geodesic.start()
            };
            (pt, a.mass)
        }))
        .unwrap_or_default()
    };
    let marginal_defect = marginal(plan, false)
        .max_defect(&marginal(competitor, false))
        .max(marginal(plan, true).max_defect(&marginal(competitor, true)));
    let cost_defect = (plan.cost() - competitor.cost()).abs();

    let mut acc: BTreeMap<&[usize], f64> = BTreeMap::new();
    for a in &plan.atoms {
        *acc.entry(a.geodesic.nodes()).or_insert(0.0) += a.mass;
    }
    for a in &competitor.atoms {
        *acc.entry(a.geodesic.nodes()).or_insert(0.0) -= a.mass;
    }
    let distance = acc.values().fold(0.0f64, |m, v| m.max(v.abs()));
    CompetitorReport {
        marginals_equal: marginal_defect <= tol,
        marginal_defect,
        cost_equal: cost_defect <= tol,
        cost_defect,
        distinct: distance > tol,
        distance,
    }
}

/// The full construction: optimal plan from the normalized measure on `a_set`
/// to the variant's target, its symmetrized competitor, and the comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompetitorRun {
    pub coupling: Coupling,
    pub plan: GeodesicPlan,
    pub competitor: GeodesicPlan,
    pub report: CompetitorReport,
    pub plan_induced_by_map: bool,
    pub competitor_induced_by_map: bool,
}

pub fn run_competitor(
    space: &FiniteMMS,
    f: &[usize],
    a_set: &[usize],
    x: usize,
    opts: &CompetitorOptions,
    tol: f64,
) -> Result<CompetitorRun> {
    check_permutation(f)?;
    let mu0 = Measure::normalized_restriction(space, a_set)?;
    let mu1 = opts.variant.target(space, f, x)?;
    let (_, coupling) = solve_w2(space, &mu0, &mu1)?;
    let plan = lift_to_geodesic_plan(space, &coupling, 1)?;
    let competitor = symmetrized_competitor(space, f, &plan, x, opts)?;
    let report = verify_competitor(&plan, &competitor, tol);
    let competitor_coupling = competitor.endpoint_coupling(space)?;
    Ok(CompetitorRun {
        plan_induced_by_map: super::is_induced_by_map(&coupling, tol),
        competitor_induced_by_map: super::is_induced_by_map(&competitor_coupling, tol),
        coupling,
        plan,
        competitor,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::Earring;
    use crate::geodesic::DiscreteGeodesic;

    #[test]
    fn identity_is_rejected() {
        let e = Earring::new(2, 8).unwrap();
        let id: Vec<usize> = (0..e.space().len()).collect();
        let plan = GeodesicPlan::default();
        let r = symmetrized_competitor(
            e.space(),
            &id,
            &plan,
            e.point(1, 2),
            &CompetitorOptions::default(),
        );
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn two_atom_case() {
        let e = Earring::new(2, 8).unwrap();
        let s = e.space();
        let f = e.reflection(1);
        let (a, x) = (e.point(2, 3), e.point(1, 2));
        let mk = |end: usize| PlanAtom {
            geodesic: DiscreteGeodesic::from_chain(s, vec![a, Earring::BASE, end]).unwrap(),
            mass: 0.5,
        };
        let plan = GeodesicPlan::new(vec![mk(x), mk(f[x])]).unwrap();
        let comp = symmetrized_competitor(s, &f, &plan, x, &CompetitorOptions::default()).unwrap();
        let r = verify_competitor(&plan, &comp, 1e-12);
        // the mirror atoms swap, so the plan is its own competitor
        assert!(r.marginals_equal && r.cost_equal && !r.distinct);
        // a plan sending everything through one side is not symmetric
        let half = GeodesicPlan::new(vec![mk(x)]).unwrap();
        let r = verify_competitor(&half, &comp, 1e-12);
        assert!(!r.marginals_equal);
    }

    #[test]
    fn longer_geodesic_changes_cost() {
        let e = Earring::new(2, 8).unwrap();
        let s = e.space();
        let g = |nodes: Vec<usize>| DiscreteGeodesic::from_chain(s, nodes).unwrap();
        let p = GeodesicPlan::new(vec![PlanAtom {
            geodesic: g(vec![e.point(1, 1), e.point(1, 2)]),
            mass: 1.0,
        }])
        .unwrap();
        let q = GeodesicPlan::new(vec![PlanAtom {
            geodesic: g(vec![e.point(1, 1), e.point(1, 3)]),
            mass: 1.0,
        }])
        .unwrap();
        let r = verify_competitor(&p, &p, 1e-12);
        assert!(r.marginals_equal && r.cost_equal && !r.distinct);
        assert!(!verify_competitor(&p, &q, 1e-12).cost_equal);
    }
}

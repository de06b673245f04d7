//! The (2,3) measure contraction inequality on discrete plans, the scalar
//! estimate behind it, and the two-bead necklace transport schedule.

mod schedule;

pub use schedule::{
    necklace_schedule, schedule_density_check, DensityRecord, HeightRecord, Schedule,
    ScheduleParams, ScheduleReport,
};

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::space::FiniteMMS;
use crate::transport::{pushforward_at, GeodesicPlan};

/// Lower end of the time grid in [`scalar_bound_check`].
pub const SCALAR_T_MIN: f64 = 1e-9;
pub const SCALAR_T_MAX: f64 = 0.2;
/// Lower end of the length grid in [`scalar_bound_check`].
pub const SCALAR_D_MIN: f64 = 1e-6;
pub const SCALAR_D_MAX: f64 = PI / 2.0 + 0.25;

/// `t sin^2(d) / sin^2(t d) - (5/4 - t/4)`.
pub fn scalar_margin(t: f64, d: f64) -> f64 {
    t * d.sin().powi(2) / (t * d).sin().powi(2) - (1.25 - 0.25 * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarBoundReport {
    pub holds: bool,
    pub min_margin: f64,
    pub argmin_t: f64,
    pub argmin_d: f64,
    pub evaluations: usize,
}

fn grid(lo: f64, hi: f64, n: usize, k: usize) -> f64 {
    if k + 1 == n {
        hi
    } else {
        lo + (hi - lo) * k as f64 / (n - 1) as f64
    }
}

/// Evaluates the margin on uniform inclusive grids over the stated domain.
pub fn scalar_bound_check(t_grid: usize, d_grid: usize) -> Result<ScalarBoundReport> {
    if t_grid < 2 || d_grid < 2 {
        return Err(crate::error::invalid(
            "grid",
            "need at least 2 points per axis",
        ));
    }
    let (min_margin, argmin_t, argmin_d) = (0..t_grid)
        .into_par_iter()
        .map(|i| {
            let t = grid(SCALAR_T_MIN, SCALAR_T_MAX, t_grid, i);
            (0..d_grid)
                .map(|j| {
                    let d = grid(SCALAR_D_MIN, SCALAR_D_MAX, d_grid, j);
                    (scalar_margin(t, d), t, d)
                })
                .fold(
                    (f64::INFINITY, 0.0, 0.0),
                    |a, b| if b.0 < a.0 { b } else { a },
                )
        })
        .reduce(
            || (f64::INFINITY, 0.0, 0.0),
            |a, b| {
                if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );
    Ok(ScalarBoundReport {
        holds: min_margin >= -1e-12,
        min_margin,
        argmin_t,
        argmin_d,
        evaluations: t_grid * d_grid,
    })
}

/// `t sin^2(t l) / sin^2(l)`, with the limit `t^3` at `l = 0`.
pub fn contraction_coefficient(t: f64, l: f64) -> f64 {
    if l.abs() < 1e-12 {
        t * t * t
    } else {
        t * (t * l).sin().powi(2) / l.sin().powi(2)
    }
}

/// `1/2 (1 - cos(k pi / (n - 1)))`, `k = 0..n`, merged with `extra` and sorted.
pub fn chebyshev_samples(n: usize, extra: &[f64]) -> Vec<f64> {
    let mut ts: Vec<f64> = (0..n)
        .map(|k| {
            if n == 1 {
                1.0
            } else {
                0.5 * (1.0 - (k as f64 * PI / (n - 1) as f64).cos())
            }
        })
        .map(|t| t.clamp(0.0, 1.0))
        .collect();
    ts.extend(extra.iter().copied().filter(|t| (0.0..=1.0).contains(t)));
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    ts
}

pub const DEFAULT_T_SAMPLES: usize = 33;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellRecord {
    pub t: f64,
    pub cell: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TSummary {
    pub t: f64,
    pub worst_slack: f64,
    pub worst_cell: Option<usize>,
    pub lhs_total: f64,
}

/// Per-cell verdicts of the contraction inequality. Cells not listed at a
/// given `t` receive no mass and have slack equal to their weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCPReport {
    pub t_samples: Vec<f64>,
    pub records: Vec<CellRecord>,
    pub per_t: Vec<TSummary>,
    /// Minimum raw slack over all samples and loaded cells (`+inf` if none).
    pub worst_slack: f64,
    pub worst_t: f64,
    pub worst_cell: Option<usize>,
    /// Absolute allowance in mass units added to every slack.
    pub allowance: f64,
    pub pass: bool,
}

pub const MARGINAL_TOL: f64 = 1e-9;

/// Checks `(e_t)_#(coef(t, l) m(A) pi) <= m` cell by cell.
pub fn mcp_check(
    space: &FiniteMMS,
    x: usize,
    a_set: &[usize],
    plan: &GeodesicPlan,
    t_samples: &[f64],
    allowance: f64,
) -> Result<MCPReport> {
    space.check_index(x)?;
    let target = Measure::normalized_restriction(space, a_set)?;
    if let Some(&far) = a_set.iter().find(|&&a| !(space.dist(x, a) < PI)) {
        return Err(Error::Precondition(format!(
            "cell {far} lies outside B(x, pi)"
        )));
    }
    let start = pushforward_at(plan, 0.0, space)?;
    let end = pushforward_at(plan, 1.0, space)?;
    if start.max_defect(&Measure::dirac(x)) > MARGINAL_TOL || end.max_defect(&target) > MARGINAL_TOL
    {
        return Err(Error::Precondition(
            "plan marginals differ from (delta_x, normalized m|_A)".into(),
        ));
    }
    if t_samples.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(crate::error::invalid("t_samples", "must lie in [0, 1]"));
    }
    let m_a = space.mass_of(a_set);

    let per: Vec<(TSummary, Vec<CellRecord>)> = t_samples
        .par_iter()
        .map(|&t| {
            let mut lhs: std::collections::BTreeMap<usize, f64> = Default::default();
            for atom in &plan.atoms {
                let c = atom.geodesic.evaluate(t).expect("t checked");
                *lhs.entry(c).or_insert(0.0) +=
                    atom.mass * contraction_coefficient(t, atom.geodesic.length()) * m_a;
            }
            let records: Vec<CellRecord> = lhs
                .into_iter()
                .filter(|&(_, l)| l > 0.0)
                .map(|(cell, l)| CellRecord {
                    t,
                    cell,
                    lhs: l,
                    rhs: space.weight(cell),
                    slack: space.weight(cell) - l,
                })
                .collect();
            let worst = records.iter().min_by(|a, b| a.slack.total_cmp(&b.slack));
            let summary = TSummary {
                t,
                worst_slack: worst.map_or(f64::INFINITY, |r| r.slack),
                worst_cell: worst.map(|r| r.cell),
                lhs_total: records.iter().map(|r| r.lhs).sum(),
            };
            (summary, records)
        })
        .collect();

    let mut records = Vec::new();
    let mut per_t = Vec::new();
    for (s, r) in per {
        per_t.push(s);
        records.extend(r);
    }
    let worst = per_t
        .iter()
        .min_by(|a, b| a.worst_slack.total_cmp(&b.worst_slack))
        .copied();
    let worst_slack = worst.map_or(f64::INFINITY, |w| w.worst_slack);
    Ok(MCPReport {
        t_samples: t_samples.to_vec(),
        records,
        per_t,
        worst_slack,
        worst_t: worst.map_or(0.0, |w| w.t),
        worst_cell: worst.and_then(|w| w.worst_cell),
        allowance,
        pass: worst_slack + allowance >= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::segment_space;
    use crate::transport::{lift_to_geodesic_plan, solve_w2};

    #[test]
    fn scalar_margin_values() {
        // at t = 1 both sides equal 1
        assert!(scalar_margin(1.0, 0.7).abs() < 1e-15);
        let m = scalar_margin(0.2, PI / 2.0);
        let expected = 0.2 / (0.1 * PI).sin().powi(2) - 1.2;
        assert!((m - expected).abs() < 1e-12);
        assert!(m > 0.8);
        let r = scalar_bound_check(50, 50).unwrap();
        assert!(r.holds && r.min_margin > 0.0);
    }

    #[test]
    fn coefficient_limits() {
        assert_eq!(contraction_coefficient(0.0, 1.0), 0.0);
        assert!((contraction_coefficient(1.0, 1.3) - 1.0).abs() < 1e-15);
        assert!((contraction_coefficient(0.5, 1e-13) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn chebyshev_includes_ends_and_breaks() {
        let ts = chebyshev_samples(33, &[0.123, 2.0]);
        assert_eq!(ts.len(), 34);
        assert_eq!(ts[0], 0.0);
        assert_eq!(*ts.last().unwrap(), 1.0);
        assert!(ts.contains(&0.123));
    }

    #[test]
    fn segment_plan_at_t_one_is_tight() {
        let s = segment_space(PI / 100.0).unwrap();
        let a: Vec<usize> = (25..50).collect();
        let mu1 = Measure::normalized_restriction(&s, &a).unwrap();
        let (_, c) = solve_w2(&s, &Measure::dirac(0), &mu1).unwrap();
        let plan = lift_to_geodesic_plan(&s, &c, 1).unwrap();
        let r = mcp_check(&s, 0, &a, &plan, &[0.0, 1.0], 1e-15).unwrap();
        let at_one: Vec<&CellRecord> = r.records.iter().filter(|c| c.t == 1.0).collect();
        assert_eq!(at_one.len(), a.len());
        assert!(at_one.iter().all(|c| c.slack.abs() < 1e-15));
        assert!(r.records.iter().all(|c| c.t == 1.0));
        assert!(r.pass);
        // wrong target set
        assert!(mcp_check(&s, 0, &a[1..], &plan, &[1.0], 0.0).is_err());
    }
}

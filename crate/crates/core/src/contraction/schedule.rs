//! Transport from a diamond cell to part of a fiber in the next diamond,
//! spreading out early in the first diamond and then moving rigidly.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::generators::{ColumnKind, Necklace};
use crate::geodesic::DiscreteGeodesic;
use crate::measure::Measure;
use crate::transport::{pushforward_at, GeodesicPlan, PlanAtom};

use super::MARGINAL_TOL;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleParams {
    pub z_tilde: usize,
    pub x_tilde: f64,
    pub y_tilde: f64,
    pub x_prime: f64,
    pub a_cells: Vec<usize>,
    /// `x1 + r1/20 + 4/5 (x_tilde - x1)` before snapping.
    pub x_hat_exact: f64,
    /// Column abscissa used for the spreading target.
    pub x_hat: f64,
    /// Cells of the spread set at `x_hat`.
    pub a_hat: Vec<usize>,
    pub t_hat: f64,
    /// Time at which the geodesics leave the first diamond.
    pub t1: f64,
    /// Time at which they enter the second.
    pub t2: f64,
    pub length: f64,
    /// Index of the first bead in the bead list.
    pub bead1: usize,
    pub bead2: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub params: ScheduleParams,
    pub plan: GeodesicPlan,
}

fn bead_of(necklace: &Necklace, point: usize) -> Option<usize> {
    match necklace.column(necklace.column_of(point)).kind {
        ColumnKind::Diamond(k) => Some(k),
        ColumnKind::Segment => None,
    }
}

/// Cell of column `c` whose center is nearest to height `y`.
fn snap(necklace: &Necklace, c: usize, y: f64) -> usize {
    let col = necklace.column(c);
    let m = col.cells.len();
    if m == 1 {
        return col.cells.start;
    }
    let j = ((y + col.half_height) / col.cell_height() - 0.5).round();
    col.cells.start + j.clamp(0.0, (m - 1) as f64) as usize
}

/// Builds one geodesic per cell of `a_cells`, each of mass `1/k`.
pub fn necklace_schedule(
    necklace: &Necklace,
    z_tilde: usize,
    a_cells: &[usize],
) -> Result<Schedule> {
    let space = necklace.space();
    space.check_index(z_tilde)?;
    if a_cells.is_empty() {
        return Err(invalid("a_cells", "empty"));
    }
    let mut a_sorted = a_cells.to_vec();
    a_sorted.sort_unstable();
    a_sorted.dedup();
    if a_sorted.len() != a_cells.len() {
        return Err(invalid("a_cells", "contains duplicates"));
    }
    for &a in &a_sorted {
        space.check_index(a)?;
    }
    let bead1 = bead_of(necklace, z_tilde)
        .ok_or_else(|| Error::Precondition("z_tilde is not a diamond cell".into()))?;
    let ca = necklace.column_of(a_sorted[0]);
    if a_sorted.iter().any(|&a| necklace.column_of(a) != ca) {
        return Err(Error::Precondition("a_cells must lie on one fiber".into()));
    }
    let bead2 = bead_of(necklace, a_sorted[0])
        .ok_or_else(|| Error::Precondition("a_cells are not diamond cells".into()))?;
    let cz = necklace.column_of(z_tilde);
    if bead1 == bead2 || ca <= cz {
        return Err(Error::Precondition(
            "a_cells must lie in a diamond to the right of z_tilde".into(),
        ));
    }
    for c in cz..=ca {
        if let ColumnKind::Diamond(k) = necklace.column(c).kind {
            if k != bead1 && k != bead2 {
                return Err(Error::Precondition(
                    "another diamond lies between the two beads".into(),
                ));
            }
        }
    }

    let b1 = necklace.beads()[bead1];
    let b2 = necklace.beads()[bead2];
    let x_tilde = necklace.column(cz).x;
    let x_prime = necklace.column(ca).x;
    let length = x_prime - x_tilde;
    let y_tilde = space.coords(z_tilde).map_or(0.0, |c| c[1]);

    let x_hat_exact = b1.x + b1.r / 20.0 + 0.8 * (x_tilde - b1.x);
    let c_hat = necklace.nearest_column(x_hat_exact).max(cz + 1);
    if necklace.column(c_hat).kind != ColumnKind::Diamond(bead1) {
        return Err(Error::Precondition(
            "no column of the first diamond lies past z_tilde".into(),
        ));
    }
    let x_hat = necklace.column(c_hat).x;

    let k = a_sorted.len();
    let m1 = necklace.column(c_hat).cells.len();
    let m2 = necklace.column(ca).cells.len();
    let k_hat = ((k * m1) as f64 / m2 as f64).round().clamp(1.0, m1 as f64) as usize;
    let hat_start = necklace.column(c_hat).cells.start + (m1 - k_hat) / 2;
    let a_hat: Vec<usize> = (hat_start..hat_start + k_hat).collect();

    let times: Vec<f64> = (cz..=ca)
        .map(|c| {
            if c == ca {
                1.0
            } else {
                (necklace.column(c).x - x_tilde) / length
            }
        })
        .collect();
    let mut atoms = Vec::with_capacity(k);
    for (i, &a) in a_sorted.iter().enumerate() {
        let hat = hat_start + i * k_hat / k;
        let j_hat = hat - necklace.column(c_hat).cells.start;
        let j_a = a - necklace.column(ca).cells.start;
        let y_hat = space.coords(hat).map_or(0.0, |c| c[1]);
        let nodes: Vec<usize> = (cz..=ca)
            .map(|c| {
                let col = necklace.column(c);
                if c == cz {
                    z_tilde
                } else if c < c_hat {
                    let s = (col.x - x_tilde) / (x_hat - x_tilde);
                    snap(necklace, c, y_tilde + s * (y_hat - y_tilde))
                } else {
                    match col.kind {
                        ColumnKind::Diamond(b) if b == bead1 => col.cells.start + j_hat,
                        ColumnKind::Diamond(_) => col.cells.start + j_a,
                        ColumnKind::Segment => col.cells.start,
                    }
                }
            })
            .collect();
        atoms.push(PlanAtom {
            geodesic: DiscreteGeodesic::new(nodes, times.clone(), length)?,
            mass: 1.0 / k as f64,
        });
    }

    Ok(Schedule {
        params: ScheduleParams {
            z_tilde,
            x_tilde,
            y_tilde,
            x_prime,
            a_cells: a_sorted,
            x_hat_exact,
            x_hat,
            a_hat,
            t_hat: (x_hat - x_tilde) / length,
            t1: (b1.right() - x_tilde) / length,
            t2: (b2.left() - x_tilde) / length,
            length,
            bead1,
            bead2,
        },
        plan: GeodesicPlan::new(atoms)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityRecord {
    pub t: f64,
    pub cell: usize,
    /// `m(A) sin^2(t l) / sin^2(l) n_t(cell)`.
    pub lhs: f64,
    /// `m(cell)`.
    pub rhs: f64,
    pub slack: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeightRecord {
    pub t: f64,
    /// Fiber height of the first diamond at `x_t` over the height at `x_hat`.
    pub ratio: f64,
    /// `5/4 - t/4`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleReport {
    pub params: ScheduleParams,
    pub t_samples: Vec<f64>,
    pub records: Vec<DensityRecord>,
    pub worst_slack: f64,
    pub worst_t: f64,
    pub worst_cell: Option<usize>,
    /// Largest `lhs / rhs`; at most 1 when the inequality holds exactly.
    pub max_ratio: f64,
    pub allowance: f64,
    pub pass: bool,
    pub heights: Vec<HeightRecord>,
    pub heights_ok: bool,
    /// `t_hat <= r1 / 5`.
    pub t_hat_ok: bool,
    pub constant_speed_defect: f64,
}

/// Checks the fiberwise density bound
/// `dn_t/dm(g_t) <= sin^2(l) / (t sin^2(t l)) dn_1/dm(g_1)`.
///
/// A single fiber has no width, so the horizontal factor `1/t` is dropped on
/// both sides; multiplying through by `m(A) w(cell)` gives the per-cell form
/// `m(A) sin^2(t l)/sin^2(l) n_t(cell) <= w(cell)`. `allowance` is added to
/// every slack in mass units.
pub fn schedule_density_check(
    necklace: &Necklace,
    schedule: &Schedule,
    t_samples: &[f64],
    allowance: f64,
) -> Result<ScheduleReport> {
    let space = necklace.space();
    let p = &schedule.params;
    let plan = &schedule.plan;
    if t_samples.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(invalid("t_samples", "must lie in [0, 1]"));
    }
    let target = Measure::normalized_restriction(space, &p.a_cells)?;
    let start = pushforward_at(plan, 0.0, space)?;
    let end = pushforward_at(plan, 1.0, space)?;
    if start.max_defect(&Measure::dirac(p.z_tilde)) > MARGINAL_TOL
        || end.max_defect(&target) > MARGINAL_TOL
    {
        return Err(Error::Precondition(
            "schedule marginals differ from (delta_z, normalized m|_A)".into(),
        ));
    }
    let m_a = space.mass_of(&p.a_cells);
    let l = p.length;

    let mut records = Vec::new();
    for &t in t_samples.iter().filter(|&&t| t > 0.0) {
        let coef = m_a * (t * l).sin().powi(2) / l.sin().powi(2);
        let nt = pushforward_at(plan, t, space)?;
        for atom in nt.atoms() {
            let lhs = coef * atom.mass;
            let rhs = space.weight(atom.point);
            records.push(DensityRecord {
                t,
                cell: atom.point,
                lhs,
                rhs,
                slack: rhs - lhs,
                ratio: lhs / rhs,
            });
        }
    }
    let worst = records
        .iter()
        .min_by(|a, b| a.slack.total_cmp(&b.slack))
        .copied();
    let worst_slack = worst.map_or(f64::INFINITY, |w| w.slack);
    let max_ratio = records.iter().map(|r| r.ratio).fold(0.0, f64::max);

    let b1 = necklace.beads()[p.bead1];
    let h_hat = b1.half_height(p.x_hat);
    let heights: Vec<HeightRecord> = t_samples
        .iter()
        .filter(|&&t| t <= p.t_hat)
        .map(|&t| {
            let x_t = p.x_tilde + t * l;
            HeightRecord {
                t,
                ratio: b1.half_height(x_t) / h_hat,
                bound: 1.25 - 0.25 * t,
            }
        })
        .collect();

    Ok(ScheduleReport {
        params: p.clone(),
        t_samples: t_samples.to_vec(),
        heights_ok: heights.iter().all(|h| h.ratio <= h.bound + 1e-12),
        heights,
        t_hat_ok: p.t_hat <= b1.r / 5.0 + 1e-12,
        constant_speed_defect: plan.constant_speed_defect(space),
        worst_t: worst.map_or(0.0, |w| w.t),
        worst_cell: worst.map(|w| w.cell),
        worst_slack,
        max_ratio,
        allowance,
        pass: worst_slack + allowance >= 0.0,
        records,
    })
}

//! Bracketing `d_GH(B_r(x), B_r^k)` at sampled radii.
//!
//! Three brackets are combined at every radius:
//! * eccentricities: `1/2 d_H(ecc B, [r, 2r])` from below;
//! * a map of a farthest-point subsample of the ball into a lattice model of
//!   the Euclidean ball: the least distortion (found by bisection) bounds from
//!   below, and a correspondence of the whole ball built by least-squares
//!   placement against that map bounds from above;
//! * `gh_exact` on 8-point subsamples of both balls, widened by the
//!   Hausdorff radii of the subsamples.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::space::{BallKind, FiniteMMS};

use super::{gh_tables, hausdorff_1d, relation_distortion, Table, GH_EXACT_LIMIT};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanOptions {
    /// Radii sampled geometrically in `[r_min, 0.9 delta]`.
    pub r_samples: usize,
    /// `r_min` in units of the pitch (or of the smallest positive distance from `x`).
    pub r_min_pitches: f64,
    /// Points per side for the `gh_exact` bracket (at most 8).
    pub subsample: usize,
    /// Points of the ball mapped into the lattice model.
    pub embed_points: usize,
    /// Lattice steps per model radius; the default depends on `k`.
    pub model_divisions: Option<usize>,
    /// Search nodes per embedding decision.
    pub search_budget: u64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            r_samples: 12,
            r_min_pitches: 16.0,
            subsample: GH_EXACT_LIMIT,
            embed_points: 12,
            model_divisions: None,
            search_budget: 2_000_000,
        }
    }
}

fn default_divisions(k: usize) -> usize {
    match k {
        1 => 256,
        2 => 12,
        _ => 6,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    In,
    Out,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelVerdict {
    /// `upper < eps r`.
    Pass,
    /// `lower >= eps r`.
    Fail,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRecord {
    pub r: f64,
    pub ball_size: usize,
    pub whole_space: bool,
    /// Sound bounds on `d_GH(B_r(x), B_r^k)`.
    pub lower: f64,
    pub upper: f64,
    pub eps_r: f64,
    /// `lower - eps r` when failing, `eps r - upper` when passing, else the larger of the two (negative).
    pub margin: f64,
    /// Covering radius of the lattice model.
    pub model_error: f64,
    /// Least distortion of the subsample map into the model, bracketed by bisection.
    pub embed_distortion_lo: f64,
    pub embed_distortion_hi: f64,
    pub embed_complete: bool,
    /// `gh_exact` on the small subsamples and their Hausdorff radii.
    pub subsample_gh: f64,
    pub subsample_error: f64,
    pub verdict: LevelVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KScan {
    pub k: usize,
    pub verdict: Verdict,
    pub levels: Vec<LevelRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub x: usize,
    pub eps: f64,
    pub delta: f64,
    pub radii: Vec<f64>,
    /// Every sampled ball is the whole space.
    pub degenerate: bool,
    pub per_k: Vec<KScan>,
}

impl ScanReport {
    pub fn verdict(&self, k: usize) -> Option<Verdict> {
        self.per_k.iter().find(|s| s.k == k).map(|s| s.verdict)
    }
}

fn radii(space: &FiniteMMS, x: usize, delta: f64, opts: &ScanOptions) -> Vec<f64> {
    let unit = space.pitch().unwrap_or_else(|| {
        space
            .row(x)
            .iter()
            .copied()
            .filter(|&d| d > 0.0)
            .fold(f64::INFINITY, f64::min)
    });
    let hi = 0.9 * delta;
    let lo = (opts.r_min_pitches * unit).min(hi);
    let n = opts.r_samples.max(1);
    if n == 1 || lo >= hi || !lo.is_finite() {
        return vec![hi];
    }
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Lattice points of pitch `1/div` in the closed unit ball of `R^k`.
struct Model {
    k: usize,
    pts: Vec<Vec<f64>>,
    table: Table,
    /// Covering radius bound `sqrt(k) / div`.
    eta: f64,
}

impl Model {
    fn new(k: usize, div: usize) -> Self {
        let d = div as i64;
        let mut pts = Vec::new();
        let mut idx = vec![-d; k];
        loop {
            let p: Vec<f64> = idx.iter().map(|&i| i as f64 / div as f64).collect();
            if p.iter().map(|c| c * c).sum::<f64>() <= 1.0 + 1e-12 {
                pts.push(p);
            }
            let mut a = 0;
            while a < k {
                idx[a] += 1;
                if idx[a] <= d {
                    break;
                }
                idx[a] = -d;
                a += 1;
            }
            if a == k {
                break;
            }
        }
        let table = Table::from_fn(pts.len(), |i, j| euclid(&pts[i], &pts[j]));
        Self {
            k,
            eta: (k as f64).sqrt() / div as f64,
            pts,
            table,
        }
    }

    /// Index of the origin.
    fn origin(&self) -> usize {
        self.pts
            .iter()
            .position(|p| p.iter().all(|&c| c == 0.0))
            .unwrap_or(0)
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Greedy farthest-point order from `start`; returns the chosen positions
/// and the Hausdorff distance from the subsample to the whole set.
fn farthest_points(t: &Table, start: usize, count: usize) -> (Vec<usize>, f64) {
    let n = t.len();
    let mut chosen = vec![start];
    let mut near: Vec<f64> = (0..n).map(|i| t.get(start, i)).collect();
    while chosen.len() < count.min(n) {
        let (far, d) = near
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .unwrap();
        if d <= 0.0 {
            break;
        }
        chosen.push(far);
        for i in 0..n {
            near[i] = near[i].min(t.get(far, i));
        }
    }
    (chosen, near.iter().copied().fold(0.0, f64::max))
}

enum Decision {
    Feasible(Vec<usize>),
    Infeasible,
    OutOfBudget,
}

/// A map of the subsample (distances `ds`) into the scaled model with
/// distortion at most `delta`. Forward checking with smallest-domain-first
/// ordering; the first placement is restricted to lattice points with
/// `p_0 >= p_1 >= ... >= 0`, which loses nothing since the model is invariant
/// under signed coordinate permutations.
fn embed_decide(ds: &Table, model: &Model, r: f64, delta: f64, budget: u64) -> Decision {
    struct S<'a> {
        ds: &'a Table,
        model: &'a Model,
        r: f64,
        delta: f64,
        nodes: u64,
        budget: u64,
        assign: Vec<Option<usize>>,
    }
    impl S<'_> {
        fn go(&mut self, domains: &[Vec<u32>]) -> Option<bool> {
            let Some(i) = (0..self.ds.len())
                .filter(|&i| self.assign[i].is_none())
                .min_by_key(|&i| (domains[i].len(), i))
            else {
                return Some(true);
            };
            for &g in &domains[i] {
                self.nodes += 1;
                if self.nodes > self.budget {
                    return None;
                }
                let g = g as usize;
                let mut next = domains.to_vec();
                let mut dead = false;
                for j in 0..self.ds.len() {
                    if self.assign[j].is_some() || j == i {
                        continue;
                    }
                    let dij = self.ds.get(i, j);
                    next[j].retain(|&h| {
                        (dij - self.r * self.model.table.get(g, h as usize)).abs() <= self.delta
                    });
                    if next[j].is_empty() {
                        dead = true;
                        break;
                    }
                }
                if dead {
                    continue;
                }
                self.assign[i] = Some(g);
                if self.go(&next)? {
                    return Some(true);
                }
                self.assign[i] = None;
            }
            Some(false)
        }
    }
    let n = ds.len();
    if n == 0 {
        return Decision::Feasible(Vec::new());
    }
    let all: Vec<u32> = (0..model.pts.len() as u32).collect();
    let canonical: Vec<u32> = all
        .iter()
        .copied()
        .filter(|&g| {
            let p = &model.pts[g as usize];
            p.windows(2).all(|w| w[0] >= w[1]) && p.last().map_or(true, |&c| c >= 0.0)
        })
        .collect();
    let mut domains = vec![all; n];
    domains[0] = canonical;
    let mut s = S {
        ds,
        model,
        r,
        delta,
        nodes: 0,
        budget,
        assign: vec![None; n],
    };
    // place the first point before the smallest-domain rule takes over
    let mut result = Some(false);
    for &g in &domains[0].clone() {
        let mut d = domains.clone();
        d[0] = vec![g];
        match s.go(&d) {
            Some(true) => {
                result = Some(true);
                break;
            }
            Some(false) => {}
            None => {
                result = None;
                break;
            }
        }
    }
    match result {
        Some(true) => {
            Decision::Feasible(s.assign.into_iter().map(|a| a.expect("complete")).collect())
        }
        Some(false) => Decision::Infeasible,
        None => Decision::OutOfBudget,
    }
}

struct Level {
    record: LevelRecord,
}

fn level(
    space: &FiniteMMS,
    x: usize,
    r: f64,
    eps: f64,
    model: &Model,
    opts: &ScanOptions,
) -> Level {
    let ball = space.ball_indices(x, r, BallKind::Open);
    let whole = ball.len() == space.len();
    let tb = Table::of(space, &ball);
    let center = ball.iter().position(|&i| i == x).unwrap_or(0);
    let eps_r = eps * r;

    // eccentricities against the continuum values [r, 2r]
    let mut ecc_model: Vec<f64> = vec![r, 2.0 * r];
    let ecc = tb.eccentricities();
    let mut sorted = ecc.clone();
    sorted.sort_by(f64::total_cmp);
    // points of [r, 2r] farthest from the ball's eccentricities are gap midpoints
    for w in sorted.windows(2) {
        let m = 0.5 * (w[0] + w[1]);
        if (r..=2.0 * r).contains(&m) {
            ecc_model.push(m);
        }
    }
    for &e in &sorted {
        if (r..=2.0 * r).contains(&e) {
            ecc_model.push(e);
        }
    }
    let clamp: Vec<f64> = sorted.iter().map(|&e| e.clamp(r, 2.0 * r)).collect();
    ecc_model.extend(clamp);
    let lower_ecc = 0.5 * hausdorff_1d(&sorted, &ecc_model);

    let model_error = model.eta * r;

    // embedding bracket
    let (sub, _) = farthest_points(&tb, center, opts.embed_points.max(1));
    let ts = Table::from_fn(sub.len(), |i, j| tb.get(sub[i], sub[j]));
    let mut lo = 0.0;
    let mut hi = ts.diameter().max(2.0 * r) * (1.0 + 1e-12) + 1e-15;
    let mut witness = None;
    let mut complete = true;
    match embed_decide(&ts, model, r, 0.0, opts.search_budget) {
        Decision::Feasible(w) => {
            hi = 0.0;
            witness = Some(w);
        }
        Decision::OutOfBudget => complete = false,
        Decision::Infeasible => {}
    }
    if witness.is_none() {
        if let Decision::Feasible(w) = embed_decide(&ts, model, r, hi, opts.search_budget) {
            witness = Some(w);
        }
        while complete && hi - lo > 1e-4 * r {
            let mid = 0.5 * (lo + hi);
            match embed_decide(&ts, model, r, mid, opts.search_budget) {
                Decision::Feasible(w) => {
                    hi = mid;
                    witness = Some(w);
                }
                Decision::Infeasible => lo = mid,
                Decision::OutOfBudget => complete = false,
            }
        }
    }
    let lower_embed = 0.5 * (lo - 2.0 * model_error);

    // full correspondence placed against the witness map
    let upper_embed = witness.map_or(f64::INFINITY, |w| {
        let ng = model.pts.len();
        let cost: Vec<f64> = (0..ball.len())
            .flat_map(|y| {
                let (sub, w, tb) = (&sub, &w, &tb);
                (0..ng).map(move |g| {
                    sub.iter()
                        .zip(w)
                        .map(|(&s, &h)| (r * model.table.get(g, h) - tb.get(y, s)).powi(2))
                        .sum::<f64>()
                })
            })
            .collect();
        let argmin = |it: &mut dyn Iterator<Item = (usize, f64)>| {
            it.min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0
        };
        let mut rel: Vec<(usize, usize)> = (0..ball.len())
            .map(|y| (y, argmin(&mut (0..ng).map(|g| (g, cost[y * ng + g])))))
            .collect();
        rel.extend((0..ng).map(|g| {
            (
                argmin(&mut (0..ball.len()).map(|y| (y, cost[y * ng + g]))),
                g,
            )
        }));
        rel.sort_unstable();
        rel.dedup();
        let scaled = Table::from_fn(ng, |i, j| r * model.table.get(i, j));
        0.5 * relation_distortion(&tb, &scaled, &rel) + model_error
    });

    // gh_exact on small subsamples
    let m = opts.subsample.clamp(1, GH_EXACT_LIMIT);
    let (sb, eta_b) = farthest_points(&tb, center, m);
    let scaled = Table::from_fn(model.pts.len(), |i, j| r * model.table.get(i, j));
    let (sg, eta_g) = farthest_points(&scaled, model.origin(), m);
    let small_b = Table::from_fn(sb.len(), |i, j| tb.get(sb[i], sb[j]));
    let small_g = Table::from_fn(sg.len(), |i, j| scaled.get(sg[i], sg[j]));
    let subsample_gh = gh_tables(&small_b, &small_g).distortion / 2.0;
    let subsample_error = eta_b + eta_g + model_error;

    let lower = lower_ecc
        .max(lower_embed)
        .max(subsample_gh - subsample_error)
        .max(0.0);
    let upper = upper_embed.min(subsample_gh + subsample_error);
    let verdict = if whole || ball.len() < 2 {
        LevelVerdict::Unknown
    } else if upper < eps_r {
        LevelVerdict::Pass
    } else if lower >= eps_r {
        LevelVerdict::Fail
    } else {
        LevelVerdict::Unknown
    };
    let margin = match verdict {
        LevelVerdict::Pass => eps_r - upper,
        LevelVerdict::Fail => lower - eps_r,
        LevelVerdict::Unknown => (eps_r - upper).max(lower - eps_r),
    };
    Level {
        record: LevelRecord {
            r,
            ball_size: ball.len(),
            whole_space: whole,
            lower,
            upper,
            eps_r,
            margin,
            model_error,
            embed_distortion_lo: lo,
            embed_distortion_hi: hi,
            embed_complete: complete,
            subsample_gh,
            subsample_error,
            verdict,
        },
    }
}

/// Classifies `x` for each `k` in `k_set` (each in `1..=3`).
pub fn epsilon_regular_scan(
    space: &FiniteMMS,
    x: usize,
    eps: f64,
    delta: f64,
    k_set: &[usize],
    opts: &ScanOptions,
) -> Result<ScanReport> {
    space.check_index(x)?;
    if !(eps > 0.0) || !(delta > 0.0) {
        return Err(invalid("eps/delta", "must be positive"));
    }
    if let Some(&k) = k_set.iter().find(|&&k| !(1..=3).contains(&k)) {
        return Err(invalid("k", format!("{k} is not in 1..=3")));
    }
    let rs = radii(space, x, delta, opts);
    let degenerate = rs
        .iter()
        .all(|&r| space.ball_indices(x, r, BallKind::Open).len() == space.len());
    let per_k = k_set
        .iter()
        .map(|&k| {
            let model = Model::new(
                k,
                opts.model_divisions.unwrap_or_else(|| default_divisions(k)),
            );
            debug_assert_eq!(model.k, k);
            let levels: Vec<LevelRecord> = rs
                .par_iter()
                .map(|&r| level(space, x, r, eps, &model, opts).record)
                .collect();
            let verdict = if levels.iter().any(|l| l.verdict == LevelVerdict::Fail) {
                Verdict::Out
            } else if !levels.is_empty() && levels.iter().all(|l| l.verdict == LevelVerdict::Pass) {
                Verdict::In
            } else {
                Verdict::Inconclusive
            };
            KScan { k, verdict, levels }
        })
        .collect();
    Ok(ScanReport {
        x,
        eps,
        delta,
        radii: rs,
        degenerate,
        per_k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KMass {
    pub k: usize,
    pub in_mass: f64,
    pub out_mass: f64,
    pub inconclusive_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularMass {
    pub points: Vec<usize>,
    pub scanned_mass: f64,
    /// Mass of points that are in for some `k`.
    pub in_mass: f64,
    /// Mass of points that are out for every `k`.
    pub out_mass: f64,
    pub inconclusive_mass: f64,
    pub per_k: Vec<KMass>,
}

/// Scans every `ceil(n / budget)`-th point and adds up weights by verdict.
pub fn regular_set_measure(
    space: &FiniteMMS,
    eps: f64,
    delta: f64,
    k_set: &[usize],
    budget: usize,
    opts: &ScanOptions,
) -> Result<RegularMass> {
    let n = space.len();
    let stride = n.div_ceil(budget.max(1)).max(1);
    let points: Vec<usize> = (0..n).step_by(stride).collect();
    let reports: Vec<ScanReport> = points
        .par_iter()
        .map(|&p| epsilon_regular_scan(space, p, eps, delta, k_set, opts))
        .collect::<Result<_>>()?;
    let mut per_k: Vec<KMass> = k_set
        .iter()
        .map(|&k| KMass {
            k,
            in_mass: 0.0,
            out_mass: 0.0,
            inconclusive_mass: 0.0,
        })
        .collect();
    let (mut in_mass, mut out_mass, mut inconclusive_mass) = (0.0, 0.0, 0.0);
    for (&p, rep) in points.iter().zip(&reports) {
        let w = space.weight(p);
        for (acc, s) in per_k.iter_mut().zip(&rep.per_k) {
            match s.verdict {
                Verdict::In => acc.in_mass += w,
                Verdict::Out => acc.out_mass += w,
                Verdict::Inconclusive => acc.inconclusive_mass += w,
            }
        }
        let vs: Vec<Verdict> = rep.per_k.iter().map(|s| s.verdict).collect();
        if vs.contains(&Verdict::In) {
            in_mass += w;
        } else if !vs.is_empty() && vs.iter().all(|&v| v == Verdict::Out) {
            out_mass += w;
        } else {
            inconclusive_mass += w;
        }
    }
    Ok(RegularMass {
        scanned_mass: space.mass_of(&points),
        points,
        in_mass,
        out_mass,
        inconclusive_mass,
        per_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{segment_space, Bead, Necklace, NecklaceParams};
    use std::f64::consts::PI;

    #[test]
    fn model_lattice_sizes() {
        assert_eq!(Model::new(1, 4).pts.len(), 9);
        // lattice points of pitch 1/2 in the unit disc
        assert_eq!(Model::new(2, 2).pts.len(), 13);
        assert_eq!(Model::new(3, 1).pts.len(), 7);
    }

    #[test]
    fn farthest_points_on_a_line() {
        let t = Table::from_fn(11, |i, j| (i as f64 - j as f64).abs());
        let (c, eta) = farthest_points(&t, 5, 3);
        assert_eq!(c, vec![5, 0, 10]);
        assert_eq!(eta, 2.0);
    }

    #[test]
    fn segment_interior_is_in() {
        let s = segment_space(PI / 800.0).unwrap();
        let x = s.nearest_point(&[PI / 4.0, 0.0]).unwrap();
        let r = epsilon_regular_scan(&s, x, 0.1, 0.2, &[1], &ScanOptions::default()).unwrap();
        assert_eq!(r.verdict(1), Some(Verdict::In), "{:#?}", r.per_k[0].levels);
        assert!(!r.degenerate);
    }

    #[test]
    fn diamond_vertex_is_out() {
        let n = Necklace::new(NecklaceParams {
            beads: vec![Bead { x: 0.6, r: 1.0 }],
            pitch: PI / 800.0,
            fiber_cells: None,
        })
        .unwrap();
        let x = n.column(n.nearest_column(0.35)).cells.start;
        let r =
            epsilon_regular_scan(n.space(), x, 0.02, 0.2, &[1], &ScanOptions::default()).unwrap();
        assert_eq!(r.verdict(1), Some(Verdict::Out), "{:#?}", r.per_k[0].levels);
    }

    #[test]
    fn whole_space_balls_are_inconclusive() {
        let s = segment_space(0.2).unwrap();
        let r = epsilon_regular_scan(&s, 3, 0.1, 10.0, &[1], &ScanOptions::default()).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.verdict(1), Some(Verdict::Inconclusive));
        let m = regular_set_measure(&s, 0.1, 0.5, &[], 100, &ScanOptions::default()).unwrap();
        assert_eq!(m.in_mass + m.out_mass, 0.0);
        assert!((m.inconclusive_mass - s.total_mass()).abs() < 1e-12);
    }
}

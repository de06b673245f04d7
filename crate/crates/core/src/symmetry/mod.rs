//! Isometry groups of finite spaces: enumeration, fixed sets, subgroup
//! closures, displacement, and the small-subgroup diagnostics.

mod euclid;

pub use euclid::{euclidean_power_escape, EscapeOutcome, EuclideanIsometry};

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::check_permutation;
use crate::space::{BallKind, FiniteMMS};

/// Default distance tolerance for accepting a permutation as an isometry.
pub const DEFAULT_ISO_TOL: f64 = 1e-9;
/// Default tolerance for measure preservation.
pub const DEFAULT_MEAS_TOL: f64 = 1e-9;

/// `max |d(g i, g j) - d(i, j)|`.
pub fn distortion(space: &FiniteMMS, perm: &[usize]) -> f64 {
    let n = space.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        let (ri, gi) = (space.row(i), space.row(perm[i]));
        for j in (i + 1)..n {
            worst = worst.max((gi[perm[j]] - ri[j]).abs());
        }
    }
    worst
}

/// `max |w(g i) - w(i)|`.
pub fn measure_defect(space: &FiniteMMS, perm: &[usize]) -> f64 {
    (0..space.len())
        .map(|i| (space.weight(perm[i]) - space.weight(i)).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsometryMap {
    pub perm: Vec<usize>,
    pub distortion: f64,
    pub measure_defect: f64,
}

impl IsometryMap {
    pub fn new(space: &FiniteMMS, perm: Vec<usize>) -> Result<Self> {
        if perm.len() != space.len() {
            return Err(invalid(
                "perm",
                format!("has {} entries for {} points", perm.len(), space.len()),
            ));
        }
        check_permutation(&perm)?;
        Ok(Self {
            distortion: distortion(space, &perm),
            measure_defect: measure_defect(space, &perm),
            perm,
        })
    }

    pub fn identity(space: &FiniteMMS) -> Self {
        Self {
            perm: (0..space.len()).collect(),
            distortion: 0.0,
            measure_defect: 0.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }

    pub fn is_measure_preserving(&self, meas_tol: f64) -> bool {
        self.measure_defect <= meas_tol
    }
}

/// `a after b`.
pub fn compose(a: &[usize], b: &[usize]) -> Vec<usize> {
    b.iter().map(|&i| a[i]).collect()
}

pub fn inverse(a: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; a.len()];
    for (i, &j) in a.iter().enumerate() {
        inv[j] = i;
    }
    inv
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Enumeration {
    /// Sorted lexicographically by permutation.
    pub maps: Vec<IsometryMap>,
    pub truncated: bool,
    pub nodes: u64,
}

/// All permutations with distortion at most `iso_tol`, by backtracking over
/// assignments compatible with sorted distance rows. At most `budget` search
/// nodes are visited; beyond that the result is partial and flagged.
pub fn enumerate_isometries(space: &FiniteMMS, iso_tol: f64, budget: u64) -> Enumeration {
    let n = space.len();
    if n == 0 {
        return Enumeration {
            maps: Vec::new(),
            truncated: false,
            nodes: 0,
        };
    }
    let profiles: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = space.row(i).to_vec();
            r.sort_by(f64::total_cmp);
            r
        })
        .collect();
    let candidates: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| {
                    profiles[i]
                        .iter()
                        .zip(&profiles[j])
                        .all(|(a, b)| (a - b).abs() <= iso_tol)
                })
                .collect()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (candidates[i].len(), i));

    let mut search = Search {
        space,
        iso_tol,
        candidates: &candidates,
        order: &order,
        image: vec![usize::MAX; n],
        used: vec![false; n],
        found: Vec::new(),
        nodes: 0,
        budget,
        truncated: false,
    };
    search.extend(0);
    let mut maps: Vec<IsometryMap> = search
        .found
        .into_iter()
        .map(|perm| IsometryMap {
            distortion: distortion(space, &perm),
            measure_defect: measure_defect(space, &perm),
            perm,
        })
        .collect();
    maps.sort_by(|a, b| a.perm.cmp(&b.perm));
    Enumeration {
        maps,
        truncated: search.truncated,
        nodes: search.nodes,
    }
}

struct Search<'a> {
    space: &'a FiniteMMS,
    iso_tol: f64,
    candidates: &'a [Vec<usize>],
    order: &'a [usize],
    image: Vec<usize>,
    used: Vec<bool>,
    found: Vec<Vec<usize>>,
    nodes: u64,
    budget: u64,
    truncated: bool,
}

impl Search<'_> {
    fn extend(&mut self, depth: usize) {
        if depth == self.order.len() {
            self.found.push(self.image.clone());
            return;
        }
        let i = self.order[depth];
        for &j in &self.candidates[i] {
            if self.truncated {
                return;
            }
            if self.used[j] {
                continue;
            }
            self.nodes += 1;
            if self.nodes > self.budget {
                self.truncated = true;
                return;
            }
            let (ri, rj) = (self.space.row(i), self.space.row(j));
            let consistent = self.order[..depth]
                .iter()
                .all(|&p| (rj[self.image[p]] - ri[p]).abs() <= self.iso_tol);
            if !consistent {
                continue;
            }
            self.image[i] = j;
            self.used[j] = true;
            self.extend(depth + 1);
            self.used[j] = false;
            self.image[i] = usize::MAX;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedSet {
    pub cells: Vec<usize>,
    pub measure: f64,
}

/// `{i : d(i, g i) <= fix_tol}` and its mass.
pub fn fixed_set(space: &FiniteMMS, g: &[usize], fix_tol: f64) -> FixedSet {
    let cells: Vec<usize> = (0..space.len())
        .filter(|&i| space.dist(i, g[i]) <= fix_tol)
        .collect();
    FixedSet {
        measure: space.mass_of(&cells),
        cells,
    }
}

/// `m(Fix(g) ∩ B_s(x))` for the open ball.
pub fn fixed_mass_in_ball(space: &FiniteMMS, g: &[usize], fix_tol: f64, x: usize, s: f64) -> f64 {
    space
        .ball_indices(x, s, BallKind::Open)
        .into_iter()
        .filter(|&i| space.dist(i, g[i]) <= fix_tol)
        .map(|i| space.weight(i))
        .sum()
}

/// A set of permutations containing the identity, with the generators it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subgroup {
    pub elements: Vec<Vec<usize>>,
    pub generators: Vec<Vec<usize>>,
    /// True when the set is closed under composition and inverses.
    pub closed: bool,
}

impl Subgroup {
    pub fn trivial(n: usize) -> Self {
        Self {
            elements: vec![(0..n).collect()],
            generators: Vec::new(),
            closed: true,
        }
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.elements
            .iter()
            .all(|p| p.iter().enumerate().all(|(i, &j)| i == j))
    }

    /// `{g^0, ..., g^depth}`; closed when some `g^k`, `k <= depth + 1`, is the identity.
    pub fn from_powers(g: &[usize], depth: usize) -> Self {
        let id: Vec<usize> = (0..g.len()).collect();
        let mut elements = vec![id.clone()];
        let mut cur = id.clone();
        let mut closed = false;
        for k in 1..=depth + 1 {
            cur = compose(g, &cur);
            if cur == id {
                closed = true;
                break;
            }
            if k <= depth {
                elements.push(cur.clone());
            }
        }
        elements.sort();
        Self {
            elements,
            generators: vec![g.to_vec()],
            closed,
        }
    }

    /// Checks closure under composition and inverses directly.
    pub fn verify_closed(&self) -> bool {
        let set: HashSet<&Vec<usize>> = self.elements.iter().collect();
        let n = self.elements.first().map_or(0, Vec::len);
        let id: Vec<usize> = (0..n).collect();
        set.contains(&id)
            && self.elements.iter().all(|a| {
                set.contains(&inverse(a))
                    && self.elements.iter().all(|b| set.contains(&compose(a, b)))
            })
    }
}

/// Closure of `gens` under composition and inverses, stopping after `budget` elements.
pub fn generate_subgroup(n: usize, gens: &[Vec<usize>], budget: usize) -> Subgroup {
    let id: Vec<usize> = (0..n).collect();
    let mut steps: Vec<Vec<usize>> = Vec::new();
    for g in gens {
        steps.push(g.clone());
        steps.push(inverse(g));
    }
    let mut seen: HashSet<Vec<usize>> = HashSet::from([id.clone()]);
    let mut queue = VecDeque::from([id]);
    let mut closed = true;
    'bfs: while let Some(e) = queue.pop_front() {
        for s in &steps {
            let next = compose(s, &e);
            if !seen.contains(&next) {
                if seen.len() >= budget {
                    closed = false;
                    break 'bfs;
                }
                seen.insert(next.clone());
                queue.push_back(next);
            }
        }
    }
    let mut elements: Vec<Vec<usize>> = seen.into_iter().collect();
    elements.sort();
    Subgroup {
        elements,
        generators: gens.to_vec(),
        closed,
    }
}

/// `D(Λ, r, x) = max_{g ∈ Λ, y ∈ B_{r/2}(x)} d(y, g y)` over the open ball.
pub fn displacement(space: &FiniteMMS, group: &Subgroup, r: f64, x: usize) -> Result<f64> {
    space.check_index(x)?;
    if group.elements.is_empty() {
        return Err(invalid("group", "empty"));
    }
    if !(r > 0.0) {
        return Err(Error::EmptyBall {
            center: x,
            radius: r / 2.0,
        });
    }
    let ball = space.ball_indices(x, r / 2.0, BallKind::Open);
    Ok(sup_move(space, &group.elements, &ball))
}

fn sup_move(space: &FiniteMMS, elements: &[Vec<usize>], set: &[usize]) -> f64 {
    elements
        .iter()
        .flat_map(|g| set.iter().map(move |&y| space.dist(y, g[y])))
        .fold(0.0, f64::max)
}

/// Largest cyclic closure formed while probing.
const CYCLIC_BUDGET: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum ProbeVerdict {
    Found {
        subgroup: Subgroup,
        displacement: f64,
    },
    NoneFound,
    Inconclusive {
        reason: String,
    },
}

/// A nontrivial subgroup all of whose elements move every point of `k_set`
/// by less than `eps`, searched among cyclic closures of the enumerated maps
/// sorted by displacement.
pub fn small_subgroup_probe(
    space: &FiniteMMS,
    eps: f64,
    k_set: &[usize],
    iso_tol: f64,
    budget: u64,
) -> Result<ProbeVerdict> {
    for &k in k_set {
        space.check_index(k)?;
    }
    let en = enumerate_isometries(space, iso_tol, budget);
    Ok(probe_among(space, eps, k_set, &en))
}

pub fn probe_among(space: &FiniteMMS, eps: f64, k_set: &[usize], en: &Enumeration) -> ProbeVerdict {
    let mut small: Vec<(f64, &IsometryMap)> = en
        .maps
        .iter()
        .filter(|m| !m.is_identity())
        .map(|m| (sup_move(space, std::slice::from_ref(&m.perm), k_set), m))
        .filter(|(d, _)| *d < eps)
        .collect();
    small.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.perm.cmp(&b.1.perm)));
    for (_, m) in small {
        let group = generate_subgroup(space.len(), std::slice::from_ref(&m.perm), CYCLIC_BUDGET);
        if !group.closed {
            continue;
        }
        let d = sup_move(space, &group.elements, k_set);
        if d < eps {
            return ProbeVerdict::Found {
                subgroup: group,
                displacement: d,
            };
        }
    }
    if en.truncated {
        ProbeVerdict::Inconclusive {
            reason: "isometry enumeration was truncated".into(),
        }
    } else {
        ProbeVerdict::NoneFound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionAVerdict {
    Witnessed,
    NotWitnessed,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionAReport {
    /// Largest `m(Fix(g) ∩ B_s(x))` over nontrivial enumerated `g`; 0 if none.
    pub fix_sup: f64,
    pub ball_mass: f64,
    pub normalized: f64,
    pub gap: f64,
    pub no_nontrivial_isometries: bool,
    /// Permutation attaining `fix_sup`.
    pub argmax: Option<Vec<usize>>,
    pub group_order: usize,
    pub verdict: ConditionAVerdict,
}

pub fn condition_a_scan(
    space: &FiniteMMS,
    x: usize,
    s: f64,
    iso_tol: f64,
    fix_tol: f64,
    budget: u64,
) -> Result<ConditionAReport> {
    space.check_index(x)?;
    if !(s > 0.0) {
        return Err(invalid("s", "must be positive"));
    }
    let en = enumerate_isometries(space, iso_tol, budget);
    Ok(condition_a_among(space, x, s, fix_tol, &en))
}

pub fn condition_a_among(
    space: &FiniteMMS,
    x: usize,
    s: f64,
    fix_tol: f64,
    en: &Enumeration,
) -> ConditionAReport {
    let ball_mass = space.ball_mass(x, s, BallKind::Open);
    let mut fix_sup = 0.0;
    let mut argmax = None;
    for m in en.maps.iter().filter(|m| !m.is_identity()) {
        let f = fixed_mass_in_ball(space, &m.perm, fix_tol, x, s);
        if argmax.is_none() || f > fix_sup {
            fix_sup = f;
            argmax = Some(m.perm.clone());
        }
    }
    let verdict = if en.truncated {
        ConditionAVerdict::Inconclusive
    } else if fix_sup < ball_mass {
        ConditionAVerdict::Witnessed
    } else {
        ConditionAVerdict::NotWitnessed
    };
    ConditionAReport {
        no_nontrivial_isometries: argmax.is_none(),
        fix_sup,
        ball_mass,
        normalized: if ball_mass > 0.0 {
            fix_sup / ball_mass
        } else {
            0.0
        },
        gap: ball_mass - fix_sup,
        argmax,
        group_order: en.maps.len(),
        verdict,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixDisplacementReport {
    /// `m(B_N(x))^-1 min_{y ∈ B_N(x)} m(B_{1/N}(y) ∩ B_N(x))`.
    pub xi: f64,
    pub min_small_ball_mass: f64,
    /// `m(B_N(x) \ Fix(f))`.
    pub moved_mass: f64,
    pub hypothesis_holds: bool,
    pub max_displacement: f64,
    /// `2/N + pitch`.
    pub bound: f64,
    pub conclusion_holds: bool,
    /// False only when the hypothesis holds and the conclusion fails.
    pub implication_ok: bool,
}

/// If `f` moves less mass in `B_N(x)` than any small ball carries, every
/// point of `B_N(x)` is moved by less than `2/N` (plus the grid pitch).
pub fn large_fix_implies_small_displacement(
    space: &FiniteMMS,
    f: &[usize],
    x: usize,
    big_n: u32,
    fix_tol: f64,
) -> Result<FixDisplacementReport> {
    space.check_index(x)?;
    if big_n == 0 {
        return Err(invalid("N", "must be positive"));
    }
    if f.len() != space.len() {
        return Err(invalid("f", "length does not match the space"));
    }
    let nf = big_n as f64;
    let ball = space.ball_indices(x, nf, BallKind::Open);
    let mut inside = vec![false; space.len()];
    for &i in &ball {
        inside[i] = true;
    }
    let ball_mass = space.mass_of(&ball);
    let min_small = ball
        .iter()
        .map(|&y| {
            space
                .ball_indices(y, 1.0 / nf, BallKind::Open)
                .into_iter()
                .filter(|&z| inside[z])
                .map(|z| space.weight(z))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    let moved_mass: f64 = ball
        .iter()
        .filter(|&&i| space.dist(i, f[i]) > fix_tol)
        .map(|&i| space.weight(i))
        .sum();
    let max_displacement = ball
        .iter()
        .map(|&i| space.dist(i, f[i]))
        .fold(0.0, f64::max);
    let bound = 2.0 / nf + space.pitch().unwrap_or(0.0);
    let hypothesis_holds = moved_mass < min_small;
    let conclusion_holds = max_displacement < bound;
    Ok(FixDisplacementReport {
        xi: min_small / ball_mass,
        min_small_ball_mass: min_small,
        moved_mass,
        hypothesis_holds,
        max_displacement,
        bound,
        conclusion_holds,
        implication_ok: !hypothesis_holds || conclusion_holds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum CriticalScale {
    /// `D(r) >= r/20` at `lo` and `D(r) < r/20` at `hi`, with `hi - lo <= tol`.
    Crossing {
        lo: f64,
        hi: f64,
        r: f64,
        defect: f64,
    },
    /// `D(lo) < lo/20`: no crossing inside the bracket.
    NoCrossing { d_lo: f64 },
}

/// Bisection for the scale where the displacement meets `r/20`.
pub fn critical_scale(
    space: &FiniteMMS,
    group: &Subgroup,
    x: usize,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<CriticalScale> {
    if !(0.0 < lo && lo < hi) || !(tol > 0.0) {
        return Err(invalid("bracket", "need 0 < lo < hi and tol > 0"));
    }
    let f = |r: f64| -> Result<f64> { Ok(displacement(space, group, r, x)? - r / 20.0) };
    let d_lo = displacement(space, group, lo, x)?;
    if d_lo < lo / 20.0 {
        return Ok(CriticalScale::NoCrossing { d_lo });
    }
    if f(hi)? >= 0.0 {
        return Err(Error::Precondition(
            "displacement still exceeds r/20 at the upper end".into(),
        ));
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if f(mid)? >= 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let r = 0.5 * (a + b);
    Ok(CriticalScale::Crossing {
        lo: a,
        hi: b,
        r,
        defect: (displacement(space, group, r, x)? - r / 20.0).abs(),
    })
}

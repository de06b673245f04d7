//! Discrete geodesics: time-stamped chains of points with constant speed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::space::FiniteMMS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteGeodesic {
    nodes: Vec<usize>,
    times: Vec<f64>,
    length: f64,
}

impl DiscreteGeodesic {
    pub fn new(nodes: Vec<usize>, times: Vec<f64>, length: f64) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != times.len() {
            return Err(invalid(
                "times",
                "need at least two nodes with one time each",
            ));
        }
        if times[0] != 0.0 || *times.last().unwrap() != 1.0 {
            return Err(invalid("times", "must start at 0 and end at 1"));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("times", "must be strictly increasing"));
        }
        if !(length >= 0.0) {
            return Err(invalid("length", "must be nonnegative"));
        }
        Ok(Self {
            nodes,
            times,
            length,
        })
    }

    /// The constant curve at `p`.
    pub fn trivial(p: usize) -> Self {
        Self {
            nodes: vec![p, p],
            times: vec![0.0, 1.0],
            length: 0.0,
        }
    }

    /// Chain through `nodes`, timed by cumulative distance. The length is the
    /// endpoint distance.
    pub fn from_chain(space: &FiniteMMS, nodes: Vec<usize>) -> Result<Self> {
        let (&first, &last) = match (nodes.first(), nodes.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(invalid("nodes", "empty chain")),
        };
        if nodes.len() == 1 || (first == last && nodes.iter().all(|&n| n == first)) {
            return Ok(Self::trivial(first));
        }
        let mut cumulative = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in nodes.windows(2) {
            acc += space.dist(w[0], w[1]);
            cumulative.push(acc);
        }
        if !(acc > 0.0) {
            return Err(invalid("nodes", "chain has zero length but distinct nodes"));
        }
        let mut times: Vec<f64> = cumulative.iter().map(|c| c / acc).collect();
        *times.last_mut().unwrap() = 1.0;
        Self::new(nodes, times, space.dist(first, last))
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn start(&self) -> usize {
        self.nodes[0]
    }

    pub fn end(&self) -> usize {
        *self.nodes.last().unwrap()
    }

    /// Position of the node whose time is nearest to `t`; ties go to the
    /// smaller time.
    pub fn position_at(&self, t: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&t) {
            return Err(invalid("t", format!("{t} is outside [0, 1]")));
        }
        let idx = self.times.partition_point(|&s| s < t);
        if idx == 0 {
            return Ok(0);
        }
        if idx == self.times.len() {
            return Ok(idx - 1);
        }
        if t - self.times[idx - 1] <= self.times[idx] - t {
            Ok(idx - 1)
        } else {
            Ok(idx)
        }
    }

    /// The evaluation map `e_t`.
    pub fn evaluate(&self, t: f64) -> Result<usize> {
        Ok(self.nodes[self.position_at(t)?])
    }

    /// Restriction to the window `[s, t]`, reparametrized to `[0, 1]`.
    ///
    /// Window ends snap to nodes with the nearest-time rule; a window that
    /// snaps to a single node yields the constant curve there.
    pub fn restrict(&self, s: f64, t: f64) -> Result<Self> {
        if !(0.0 <= s && s < t && t <= 1.0) {
            return Err(invalid(
                "window",
                format!("need 0 <= s < t <= 1, got [{s}, {t}]"),
            ));
        }
        let a = self.position_at(s)?;
        let b = self.position_at(t)?;
        if a == b {
            return Ok(Self::trivial(self.nodes[a]));
        }
        let (ta, tb) = (self.times[a], self.times[b]);
        let span = tb - ta;
        let mut times: Vec<f64> = self.times[a..=b].iter().map(|&x| (x - ta) / span).collect();
        times[0] = 0.0;
        *times.last_mut().unwrap() = 1.0;
        Self::new(self.nodes[a..=b].to_vec(), times, span * self.length)
    }

    /// Largest violation of `d(n_a, n_b) = (t_b - t_a) * length` over node pairs.
    pub fn constant_speed_defect(&self, space: &FiniteMMS) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.nodes.len() {
            for b in (a + 1)..self.nodes.len() {
                let want = (self.times[b] - self.times[a]) * self.length;
                worst = worst.max((space.dist(self.nodes[a], self.nodes[b]) - want).abs());
            }
        }
        worst
    }

    /// Image under a point permutation (an isometry acting on curves).
    pub fn map_nodes(&self, perm: &[usize]) -> Self {
        Self {
            nodes: self.nodes.iter().map(|&n| perm[n]).collect(),
            times: self.times.clone(),
            length: self.length,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicOptions {
    /// Points closer than `edge_factor` times the local pitch are neighbors.
    pub edge_factor: f64,
    /// Constant-speed tolerance; defaults to twice the space's pitch.
    pub tol: Option<f64>,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self {
            edge_factor: 1.5,
            tol: None,
        }
    }
}

/// Shortest chains in the neighbor graph of a space, used as its discrete
/// geodesics. Build once per space and query many pairs.
pub struct GeodesicFinder<'a> {
    space: &'a FiniteMMS,
    adj: Vec<Vec<(usize, f64)>>,
    tol: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> GeodesicFinder<'a> {
    pub fn new(space: &'a FiniteMMS, opts: GeodesicOptions) -> Self {
        let n = space.len();
        let base = space.pitch().unwrap_or(0.0);
        let local: Vec<f64> = (0..n)
            .map(|i| {
                let nn = space
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &d)| d)
                    .fold(f64::INFINITY, f64::min);
                if nn.is_finite() {
                    nn.max(base)
                } else {
                    base
                }
            })
            .collect();
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = space.dist(i, j);
                if d <= opts.edge_factor * local[i].max(local[j]) {
                    adj[i].push((j, d));
                    adj[j].push((i, d));
                }
            }
        }
        let tol = opts.tol.unwrap_or_else(|| {
            2.0 * space
                .pitch()
                .unwrap_or_else(|| local.iter().copied().fold(0.0, f64::max))
        });
        Self { space, adj, tol }
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn space(&self) -> &FiniteMMS {
        self.space
    }

    fn dijkstra(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.adj.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Entry(0.0, source));
        while let Some(Entry(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adj[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Entry(nd, v));
                }
            }
        }
        dist
    }

    /// Up to `budget` distinct shortest chains from `a` to `b`, each meeting
    /// the constant-speed tolerance. Falls back to the two-node chain when no
    /// graph chain is fine enough.
    pub fn between(&self, a: usize, b: usize, budget: usize) -> Result<Vec<DiscreteGeodesic>> {
        self.space.check_index(a)?;
        self.space.check_index(b)?;
        if a == b {
            return Ok(vec![DiscreteGeodesic::trivial(a)]);
        }
        let from_a = self.dijkstra(a);
        if !from_a[b].is_finite() {
            return Err(Error::Disconnected { from: a, to: b });
        }
        let from_b = self.dijkstra(b);
        let total = from_a[b];
        let slack = 1e-9 * (1.0 + total);
        let on_path = |u: usize, v: usize, w: f64| {
            (from_a[u] + w - from_a[v]).abs() <= slack && from_a[u] + w + from_b[v] <= total + slack
        };

        let budget = budget.max(1);
        let mut chains = Vec::new();
        let mut path = vec![a];
        let mut iters = vec![0usize];
        // Iterative DFS over the shortest-path DAG.
        while let Some(&u) = path.last() {
            if chains.len() >= budget {
                break;
            }
            if u == b {
                chains.push(path.clone());
                path.pop();
                iters.pop();
                continue;
            }
            let k = iters.last_mut().unwrap();
            let mut next = None;
            while *k < self.adj[u].len() {
                let (v, w) = self.adj[u][*k];
                *k += 1;
                if w > 0.0 && on_path(u, v, w) {
                    next = Some(v);
                    break;
                }
            }
            match next {
                Some(v) => {
                    path.push(v);
                    iters.push(0);
                }
                None => {
                    path.pop();
                    iters.pop();
                }
            }
        }

        let mut out = Vec::new();
        for chain in chains {
            let g = DiscreteGeodesic::from_chain(self.space, chain)?;
            if g.constant_speed_defect(self.space) <= self.tol {
                out.push(g);
            }
        }
        if out.is_empty() {
            out.push(DiscreteGeodesic::new(
                vec![a, b],
                vec![0.0, 1.0],
                self.space.dist(a, b),
            )?);
        }
        Ok(out)
    }
}

//! Transportation simplex on the bipartite basis tree.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_SWITCH: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    /// Row-major `m x n` flows.
    pub flow: Vec<f64>,
    pub cost: f64,
    /// Row potentials; `u[0] = 0`.
    pub u: Vec<f64>,
    /// Column potentials.
    pub v: Vec<f64>,
    /// Basic cells as `(row, col)`, `m + n - 1` of them.
    pub basis: Vec<(usize, usize)>,
    pub pivots: usize,
}

impl TransportSolution {
    pub fn reduced_cost(&self, cost: &[f64], i: usize, j: usize) -> f64 {
        let n = self.v.len();
        cost[i * n + j] - self.u[i] - self.v[j]
    }
}

/// Minimizes `sum c_ij f_ij` subject to row sums `a` and column sums `b`.
/// Requires positive `a`, `b` with equal totals (up to rounding).
pub fn solve_transport(a: &[f64], b: &[f64], cost: &[f64]) -> Result<TransportSolution> {
    let (m, n) = (a.len(), b.len());
    if m == 0 || n == 0 {
        return Err(Error::EmptySupport);
    }
    assert_eq!(cost.len(), m * n, "cost matrix shape");
    let cmax = cost.iter().fold(0.0f64, |s, c| s.max(c.abs()));
    let eps = 1e-12 * (1.0 + cmax);
    let mass_eps = 1e-15 * (1.0 + a.iter().sum::<f64>());

    let mut flow = vec![0.0; m * n];
    let mut basis = northwest_corner(a, b, &mut flow);
    let cap = 50 * (m + n) * (m + n) + 1000;
    let mut degenerate_run = 0;
    let mut pivots = 0;
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    loop {
        let adj = adjacency(m, n, &basis);
        potentials(m, n, &basis, &adj, cost, &mut u, &mut v);
        let bland = degenerate_run >= DEGENERATE_SWITCH;
        let mut entering: Option<(usize, usize)> = None;
        let mut best = -eps;
        'scan: for i in 0..m {
            for j in 0..n {
                let r = cost[i * n + j] - u[i] - v[j];
                if r < best {
                    entering = Some((i, j));
                    if bland {
                        break 'scan;
                    }
                    best = r;
                }
            }
        }
        let Some((ei, ej)) = entering else { break };
        if pivots >= cap {
            return Err(Error::NoConvergence(pivots));
        }
        pivots += 1;

        // Cycle: entering cell, then the tree path from column ej back to row ei.
        let path = tree_path(m, &adj, &basis, ei, m + ej);
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (k, &cell) in path.iter().enumerate() {
            if k % 2 == 0 {
                let (i, j) = basis[cell];
                let f = flow[i * n + j];
                // ties broken toward the smallest basis position for determinism
                if f < theta || (f == theta && cell < leave) {
                    theta = f;
                    leave = cell;
                }
            }
        }
        for (k, &cell) in path.iter().enumerate() {
            let (i, j) = basis[cell];
            if k % 2 == 0 {
                flow[i * n + j] -= theta;
            } else {
                flow[i * n + j] += theta;
            }
        }
        flow[ei * n + ej] += theta;
        let (li, lj) = basis[leave];
        flow[li * n + lj] = 0.0;
        basis[leave] = (ei, ej);
        if theta <= mass_eps {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
    }

    let mut flow = tree_flows(a, b, &basis)?;
    for f in flow.iter_mut() {
        if *f < 0.0 {
            if *f < -1e3 * mass_eps {
                return Err(Error::NoConvergence(pivots));
            }
            *f = 0.0;
        }
    }
    let cost_value = flow.iter().zip(cost).map(|(f, c)| f * c).sum();
    Ok(TransportSolution {
        flow,
        cost: cost_value,
        u,
        v,
        basis,
        pivots,
    })
}

fn northwest_corner(a: &[f64], b: &[f64], flow: &mut [f64]) -> Vec<(usize, usize)> {
    let (m, n) = (a.len(), b.len());
    let mut ra = a.to_vec();
    let mut rb = b.to_vec();
    let (mut i, mut j) = (0, 0);
    let mut basis = Vec::with_capacity(m + n - 1);
    loop {
        let f = ra[i].min(rb[j]).max(0.0);
        flow[i * n + j] = f;
        ra[i] -= f;
        rb[j] -= f;
        basis.push((i, j));
        if i == m - 1 && j == n - 1 {
            break;
        }
        if j == n - 1 || (i < m - 1 && ra[i] <= rb[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    basis
}

/// For each node (rows `0..m`, columns `m..m+n`), the incident basis positions.
fn adjacency(m: usize, n: usize, basis: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); m + n];
    for (k, &(i, j)) in basis.iter().enumerate() {
        adj[i].push(k);
        adj[m + j].push(k);
    }
    adj
}

fn other_end(m: usize, cell: (usize, usize), node: usize) -> usize {
    if node < m {
        m + cell.1
    } else {
        cell.0
    }
}

fn potentials(
    m: usize,
    n: usize,
    basis: &[(usize, usize)],
    adj: &[Vec<usize>],
    cost: &[f64],
    u: &mut [f64],
    v: &mut [f64],
) {
    let mut seen = vec![false; m + n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    u[0] = 0.0;
    while let Some(node) = queue.pop_front() {
        for &k in &adj[node] {
            let (i, j) = basis[k];
            let next = other_end(m, (i, j), node);
            if seen[next] {
                continue;
            }
            seen[next] = true;
            if next < m {
                u[i] = cost[i * n + j] - v[j];
            } else {
                v[j] = cost[i * n + j] - u[i];
            }
            queue.push_back(next);
        }
    }
}

/// Basis positions on the tree path from `from` to `to`, in walking order.
fn tree_path(
    m: usize,
    adj: &[Vec<usize>],
    basis: &[(usize, usize)],
    to: usize,
    from: usize,
) -> Vec<usize> {
    let mut via = vec![usize::MAX; adj.len()];
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(node) = queue.pop_front() {
        if node == to {
            break;
        }
        for &k in &adj[node] {
            let next = other_end(m, basis[k], node);
            if !seen[next] {
                seen[next] = true;
                via[next] = k;
                queue.push_back(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = to;
    while node != from {
        let k = via[node];
        path.push(k);
        node = other_end(m, basis[k], node);
    }
    path.reverse();
    path
}

/// Flows of a spanning-tree basis, by repeatedly settling a leaf.
/// Errors if the cells do not form a spanning tree.
pub(crate) fn tree_flows(a: &[f64], b: &[f64], basis: &[(usize, usize)]) -> Result<Vec<f64>> {
    let (m, n) = (a.len(), b.len());
    let mut flow = vec![0.0; m * n];
    let mut rest: Vec<f64> = a.iter().chain(b).copied().collect();
    let adj = adjacency(m, n, basis);
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut used = vec![false; basis.len()];
    let mut stack: Vec<usize> = (0..m + n).filter(|&v| degree[v] == 1).collect();
    let mut settled = 0;
    while let Some(node) = stack.pop() {
        if degree[node] != 1 {
            continue;
        }
        let Some(&k) = adj[node].iter().find(|&&k| !used[k]) else {
            continue;
        };
        used[k] = true;
        settled += 1;
        let (i, j) = basis[k];
        let f = rest[node];
        flow[i * n + j] = f;
        let other = other_end(m, (i, j), node);
        rest[node] = 0.0;
        rest[other] -= f;
        degree[node] -= 1;
        degree[other] -= 1;
        if degree[other] == 1 {
            stack.push(other);
        }
    }
    if settled != basis.len() || basis.len() != m + n - 1 {
        return Err(Error::Precondition("basis is not a spanning tree".into()));
    }
    Ok(flow)
}

//! Minimum-cost circulation with edge lower bounds.
//!
//! Lower bounds are shifted into node imbalances, negative residual cycles
//! are cancelled, and the imbalances are then routed by successive shortest
//! paths from a super source to a super sink. Capacities are integral, so
//! every returned flow is integral. The cost type is generic so the solver
//! can run on scaled integers when they fit and on exact rationals
//! otherwise.

use std::collections::VecDeque;
use std::ops::{Add, Neg, Sub};

use num_traits::Zero;

pub(crate) trait Cost:
    Clone + Ord + Zero + Add<Output = Self> + Sub<Output = Self> + Neg<Output = Self>
{
}

impl<T> Cost for T where
    T: Clone + Ord + Zero + Add<Output = T> + Sub<Output = T> + Neg<Output = T>
{
}

#[derive(Debug, Clone)]
pub(crate) struct NetEdge<C> {
    pub tail: usize,
    pub head: usize,
    pub lower: i64,
    pub upper: i64,
    pub cost: C,
}

#[derive(Debug, Clone)]
struct Arc<C> {
    to: usize,
    cap: i64,
    cost: C,
    rev: usize,
}

struct Residual<C> {
    adj: Vec<Vec<Arc<C>>>,
}

impl<C: Cost> Residual<C> {
    fn new(n: usize) -> Self {
        Residual {
            adj: (0..n).map(|_| Vec::new()).collect(),
        }
    }

    /// Returns (node, arc index) of the forward arc.
    fn add(&mut self, from: usize, to: usize, cap: i64, cost: C) -> (usize, usize) {
        let fwd = self.adj[from].len();
        let bwd = self.adj[to].len() + usize::from(from == to);
        self.adj[from].push(Arc {
            to,
            cap,
            cost: cost.clone(),
            rev: bwd,
        });
        self.adj[to].push(Arc {
            to: from,
            cap: 0,
            cost: -cost,
            rev: fwd,
        });
        (from, fwd)
    }

    fn push(&mut self, node: usize, arc: usize, amount: i64) {
        let (to, rev) = {
            let a = &mut self.adj[node][arc];
            a.cap -= amount;
            (a.to, a.rev)
        };
        self.adj[to][rev].cap += amount;
    }

    /// Finds a negative-cost cycle among arcs with positive capacity.
    fn negative_cycle(&self) -> Option<Vec<(usize, usize)>> {
        let n = self.adj.len();
        let mut dist: Vec<C> = vec![C::zero(); n];
        let mut pred: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut last = None;
        for _ in 0..n {
            last = None;
            for u in 0..n {
                for (i, a) in self.adj[u].iter().enumerate() {
                    if a.cap <= 0 {
                        continue;
                    }
                    let cand = dist[u].clone() + a.cost.clone();
                    if cand < dist[a.to] {
                        dist[a.to] = cand;
                        pred[a.to] = Some((u, i));
                        last = Some(a.to);
                    }
                }
            }
            last?;
        }
        let mut v = last?;
        for _ in 0..n {
            v = pred[v].expect("predecessor").0;
        }
        let start = v;
        let mut cycle = Vec::new();
        loop {
            let (u, i) = pred[v].expect("predecessor");
            cycle.push((u, i));
            v = u;
            if v == start {
                break;
            }
        }
        cycle.reverse();
        Some(cycle)
    }

    fn cancel_negative_cycles(&mut self) {
        while let Some(cycle) = self.negative_cycle() {
            let amount = cycle
                .iter()
                .map(|&(u, i)| self.adj[u][i].cap)
                .min()
                .expect("non-empty cycle");
            for &(u, i) in &cycle {
                self.push(u, i, amount);
            }
        }
    }

    /// Shortest path by label-correcting search; assumes no negative cycle.
    fn shortest_path(&self, from: usize, to: usize) -> Option<Vec<(usize, usize)>> {
        let n = self.adj.len();
        let mut dist: Vec<Option<C>> = vec![None; n];
        let mut pred: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut queued = vec![false; n];
        let mut queue = VecDeque::new();
        dist[from] = Some(C::zero());
        queue.push_back(from);
        queued[from] = true;
        while let Some(u) = queue.pop_front() {
            queued[u] = false;
            let du = dist[u].clone().expect("queued node has distance");
            for (i, a) in self.adj[u].iter().enumerate() {
                if a.cap <= 0 {
                    continue;
                }
                let cand = du.clone() + a.cost.clone();
                let better = match &dist[a.to] {
                    None => true,
                    Some(d) => cand < *d,
                };
                if better {
                    dist[a.to] = Some(cand);
                    pred[a.to] = Some((u, i));
                    if !queued[a.to] {
                        queued[a.to] = true;
                        queue.push_back(a.to);
                    }
                }
            }
        }
        dist[to].as_ref()?;
        let mut path = Vec::new();
        let mut v = to;
        while v != from {
            let (u, i) = pred[v].expect("predecessor on path");
            path.push((u, i));
            v = u;
        }
        path.reverse();
        Some(path)
    }
}

/// Minimum-cost flow that satisfies `lower <= f <= upper` on every edge and
/// flow balance at every node except those listed in `free`. Returns `None`
/// when no such flow exists.
pub(crate) fn min_cost_flow<C: Cost>(
    node_count: usize,
    edges: &[NetEdge<C>],
    free: &[usize],
) -> Option<Vec<i64>> {
    let mut big: i64 = 1;
    for e in edges {
        if e.lower > e.upper || e.lower < 0 {
            return None;
        }
        big = big.saturating_add(e.upper);
    }
    let super_source = node_count;
    let super_sink = node_count + 1;
    let mut net = Residual::new(node_count + 2);
    let mut excess = vec![0i64; node_count];
    let mut handles = Vec::with_capacity(edges.len());
    for e in edges {
        handles.push(net.add(e.tail, e.head, e.upper - e.lower, e.cost.clone()));
        excess[e.head] += e.lower;
        excess[e.tail] -= e.lower;
    }
    if let Some((&hub, rest)) = free.split_first() {
        for &f in rest {
            net.add(f, hub, big, C::zero());
            net.add(hub, f, big, C::zero());
        }
    }
    net.cancel_negative_cycles();

    let mut required = 0i64;
    for (v, &b) in excess.iter().enumerate() {
        if b > 0 {
            net.add(super_source, v, b, C::zero());
            required += b;
        } else if b < 0 {
            net.add(v, super_sink, -b, C::zero());
        }
    }
    let mut routed = 0i64;
    while routed < required {
        let path = net.shortest_path(super_source, super_sink)?;
        let amount = path
            .iter()
            .map(|&(u, i)| net.adj[u][i].cap)
            .min()
            .expect("non-empty path");
        for &(u, i) in &path {
            net.push(u, i, amount);
        }
        routed += amount;
    }

    Some(
        edges
            .iter()
            .zip(&handles)
            .map(|(e, &(u, i))| e.lower + (e.upper - e.lower - net.adj[u][i].cap))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(tail: usize, head: usize, lower: i64, upper: i64, cost: i128) -> NetEdge<i128> {
        NetEdge {
            tail,
            head,
            lower,
            upper,
            cost,
        }
    }

    fn total(edges: &[NetEdge<i128>], flow: &[i64]) -> i128 {
        edges.iter().zip(flow).map(|(e, &f)| e.cost * f as i128).sum()
    }

    #[test]
    fn routes_forced_unit_along_cheapest_path() {
        // 0 = source, 3 = sink; forced unit out of the source.
        let edges = vec![
            edge(0, 1, 1, 1, 0),
            edge(1, 2, 0, 1, 5),
            edge(1, 2, 0, 1, 2),
            edge(2, 3, 0, 2, 0),
        ];
        let flow = min_cost_flow(4, &edges, &[0, 3]).unwrap();
        assert_eq!(flow, vec![1, 0, 1, 1]);
    }

    #[test]
    fn picks_up_profitable_optional_flow() {
        // Optional source->sink flow with negative cost is taken.
        let edges = vec![edge(0, 1, 0, 3, -2), edge(1, 2, 0, 2, 0)];
        let flow = min_cost_flow(3, &edges, &[0, 2]).unwrap();
        assert_eq!(flow, vec![2, 2]);
    }

    #[test]
    fn detects_infeasible_lower_bounds() {
        let edges = vec![edge(0, 1, 2, 2, 0), edge(1, 2, 0, 1, 0)];
        assert!(min_cost_flow(3, &edges, &[0, 2]).is_none());
        assert!(min_cost_flow(2, &[edge(0, 1, 3, 1, 0)], &[0, 1]).is_none());
    }

    #[test]
    fn cancels_negative_cycles() {
        // Cycle 1 -> 2 -> 1 with net cost -1 and no terminals involved.
        let edges = vec![edge(1, 2, 0, 1, -3), edge(2, 1, 0, 1, 2), edge(0, 3, 0, 1, 0)];
        let flow = min_cost_flow(4, &edges, &[0, 3]).unwrap();
        assert_eq!(total(&edges, &flow), -1);
    }

    #[test]
    fn matches_brute_force_on_small_networks() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(3..6);
            let m = rng.gen_range(2..7);
            let edges: Vec<_> = (0..m)
                .map(|_| {
                    let tail = rng.gen_range(0..n);
                    let mut head = rng.gen_range(0..n);
                    if head == tail {
                        head = (head + 1) % n;
                    }
                    let lower = rng.gen_range(0..2);
                    let upper = lower + rng.gen_range(0..2);
                    edge(tail, head, lower, upper, rng.gen_range(-4..5))
                })
                .collect();
            let free = [0, n - 1];
            // Brute force over all integer flows in the box.
            let mut best: Option<i128> = None;
            let mut flow: Vec<i64> = edges.iter().map(|e| e.lower).collect();
            loop {
                let mut bal = vec![0i64; n];
                for (e, &f) in edges.iter().zip(&flow) {
                    bal[e.head] += f;
                    bal[e.tail] -= f;
                }
                if (0..n).filter(|v| !free.contains(v)).all(|v| bal[v] == 0) {
                    let c = total(&edges, &flow);
                    best = Some(best.map_or(c, |b| b.min(c)));
                }
                let mut i = 0;
                while i < m {
                    if flow[i] < edges[i].upper {
                        flow[i] += 1;
                        break;
                    }
                    flow[i] = edges[i].lower;
                    i += 1;
                }
                if i == m {
                    break;
                }
            }
            let got = min_cost_flow(n, &edges, &free).map(|f| total(&edges, &f));
            assert_eq!(got, best, "edges: {edges:?}");
        }
    }
}

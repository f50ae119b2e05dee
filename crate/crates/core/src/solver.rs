//! Welfare maximization over the auxiliary graph.
//!
//! For a fixed departure assignment the problem is a min-cost circulation
//! with integral bounds, solved exactly. The outer search over departure
//! assignments is either exhaustive enumeration or depth-first
//! branch-and-bound whose node bound relaxes every undecided aircraft's
//! departure binaries to `[0, 1]`.
//!
//! Ties are broken deterministically: among optimal allocations the one
//! with the lexicographically smallest departure assignment wins, then the
//! lexicographically smallest menu-key vector (both in flat aircraft order).

use std::time::{Duration, Instant};

use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::graph::{
    build_graph, AuxGraph, AuxVertex, DeltaAssignment, EdgeClass, EdgeKey, FlowSolution,
    GraphError,
};
use crate::mcf::{min_cost_flow, Cost, NetEdge};
use crate::model::{Allocation, BidProfile, Instance, Slot};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    Enumerate,
    #[default]
    BranchAndBound,
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub strategy: Strategy,
    /// Maximum number of search nodes (enumerated assignments or
    /// branch-and-bound nodes) over the whole solve.
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
}

impl SolveOptions {
    pub fn with_strategy(strategy: Strategy) -> Self {
        SolveOptions {
            strategy,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub nodes: u64,
    pub fixed_delta_solves: u64,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub flow: FlowSolution,
    pub objective: Rational,
    pub allocation: Allocation,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolverError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("node limit of {0} exceeded")]
    NodeLimit(u64),
    #[error("time limit of {0:?} exceeded")]
    TimeLimit(Duration),
    #[error("no feasible departure assignment")]
    Infeasible,
}

/// Every departure assignment of the instance in lexicographic order.
pub fn enumerate_deltas(instance: &Instance) -> DeltaIter {
    let slots: Vec<Vec<Slot>> = instance
        .aircraft_refs()
        .iter()
        .map(|&at| instance.aircraft(at).departure_times())
        .collect();
    DeltaIter {
        cursor: Some(vec![0; slots.len()]),
        slots,
    }
}

pub struct DeltaIter {
    slots: Vec<Vec<Slot>>,
    cursor: Option<Vec<usize>>,
}

impl Iterator for DeltaIter {
    type Item = DeltaAssignment;

    fn next(&mut self) -> Option<DeltaAssignment> {
        let cur = self.cursor.as_mut()?;
        let out = DeltaAssignment(
            cur.iter()
                .zip(&self.slots)
                .map(|(&i, s)| s[i])
                .collect(),
        );
        let mut pos = cur.len();
        loop {
            if pos == 0 {
                self.cursor = None;
                break;
            }
            pos -= 1;
            cur[pos] += 1;
            if cur[pos] < self.slots[pos].len() {
                break;
            }
            cur[pos] = 0;
        }
        Some(out)
    }
}

/// Exact optimal flow for one departure assignment, bundles in prefix
/// form. `Ok(None)` when the assignment admits no feasible flow.
pub fn solve_fixed_delta(
    graph: &AuxGraph,
    delta: &DeltaAssignment,
) -> Result<Option<FlowSolution>, SolverError> {
    graph.check_delta(delta)?;
    let search = Search::new(graph, &SolveOptions::default());
    let state = search.state_for_delta(delta);
    Ok(search.relax(&state).map(|relaxed| relaxed.exact.expect("fixed assignment")))
}

pub fn solve(graph: &AuxGraph) -> Result<SolveResult, SolverError> {
    solve_with(graph, &SolveOptions::default())
}

/// Optimal objective and the tie-broken optimal allocation.
pub fn solve_with(graph: &AuxGraph, options: &SolveOptions) -> Result<SolveResult, SolverError> {
    let start = Instant::now();
    let mut search = Search::new(graph, options);
    let root = search.root_state();
    let (objective, mut best) = search.optimize(&root, None)?.ok_or(SolverError::Infeasible)?;

    // Pin departure slots, then menu keys, aircraft by aircraft.
    let mut state = root;
    for a in 0..graph.aircraft_count() {
        let current = best.delta.slot(a);
        for tau in graph.departure_slots(a).filter(|&t| t < current).collect::<Vec<_>>() {
            if !state.tau_allowed(graph, a, tau) {
                continue;
            }
            let trial = state.fix_tau(graph, a, tau);
            if let Some((_, sol)) = search.optimize(&trial, Some(&objective))? {
                state = trial;
                best = sol;
                break;
            }
        }
        state = state.fix_tau(graph, a, best.delta.slot(a));
    }
    let mut keys = graph.flow_to_allocation(&best)?.flat();
    for a in 0..graph.aircraft_count() {
        let current = keys[a];
        let candidates: Vec<usize> = (0..current).filter(|&k| state.keys[a][k]).collect();
        for k in candidates {
            let trial = state.fix_key(graph, a, k);
            if let Some((_, sol)) = search.optimize(&trial, Some(&objective))? {
                state = trial;
                best = sol;
                keys = graph.flow_to_allocation(&best)?.flat();
                break;
            }
        }
        state = state.fix_key(graph, a, keys[a]);
    }

    let allocation = graph.flow_to_allocation(&best)?;
    search.stats.wall_time = start.elapsed();
    Ok(SolveResult {
        objective,
        allocation,
        flow: best,
        stats: search.stats,
    })
}

/// Optimal objective only; skips tie-break refinement.
pub fn solve_value(graph: &AuxGraph, options: &SolveOptions) -> Result<Rational, SolverError> {
    let mut search = Search::new(graph, options);
    let root = search.root_state();
    search
        .optimize(&root, None)?
        .map(|(v, _)| v)
        .ok_or(SolverError::Infeasible)
}

/// Tie-broken welfare-maximizing allocation for `bids`.
pub fn optimal_allocation(instance: &Instance, bids: &BidProfile) -> Result<Allocation, SolverError> {
    let graph = build_graph(instance, bids)?;
    Ok(solve(&graph)?.allocation)
}

enum Costs {
    Scaled(Vec<i128>),
    Exact(Vec<Rational>),
}

impl Costs {
    /// Minimization costs (negated weights), scaled to integers when the
    /// common denominator keeps every entry comfortably inside `i128`.
    fn new(graph: &AuxGraph) -> Self {
        let weights: Vec<&Rational> = graph.edges().iter().map(|e| &e.weight).collect();
        let mut lcm = num_bigint::BigInt::from(1);
        for w in &weights {
            lcm = lcm.lcm(w.denom());
        }
        let limit = num_bigint::BigInt::from(1u64 << 60);
        let scaled: Option<Vec<i128>> = weights
            .iter()
            .map(|w| {
                let v = -(w.numer() * (&lcm / w.denom()));
                if v.abs() > limit {
                    None
                } else {
                    v.to_i128()
                }
            })
            .collect();
        match scaled {
            Some(s) => Costs::Scaled(s),
            None => Costs::Exact(weights.into_iter().map(|w| -w.clone()).collect()),
        }
    }
}

/// Per-aircraft domain at a search node: which departure slots and which
/// menu keys are still allowed.
#[derive(Debug, Clone)]
struct NodeState {
    taus: Vec<Vec<bool>>,
    keys: Vec<Vec<bool>>,
}

impl NodeState {
    fn slot_index(graph: &AuxGraph, a: usize, tau: Slot) -> usize {
        graph
            .departure_slots(a)
            .position(|t| t == tau)
            .expect("known departure slot")
    }

    fn tau_allowed(&self, graph: &AuxGraph, a: usize, tau: Slot) -> bool {
        self.taus[a][Self::slot_index(graph, a, tau)]
    }

    fn decided(&self, a: usize) -> Option<usize> {
        let mut it = self.taus[a].iter().enumerate().filter(|(_, &b)| b);
        match (it.next(), it.next()) {
            (Some((i, _)), None) => Some(i),
            _ => None,
        }
    }

    fn fix_tau(&self, graph: &AuxGraph, a: usize, tau: Slot) -> NodeState {
        let mut next = self.clone();
        let idx = Self::slot_index(graph, a, tau);
        for (i, allowed) in next.taus[a].iter_mut().enumerate() {
            *allowed &= i == idx;
        }
        let menu = &graph.instance().aircraft(graph.instance().aircraft_refs()[a]).menu;
        for (k, allowed) in next.keys[a].iter_mut().enumerate() {
            *allowed &= menu[k].depart_time() == tau;
        }
        next
    }

    fn fix_key(&self, graph: &AuxGraph, a: usize, key: usize) -> NodeState {
        let mut next = self.clone();
        for (k, allowed) in next.keys[a].iter_mut().enumerate() {
            *allowed &= k == key;
        }
        let menu = &graph.instance().aircraft(graph.instance().aircraft_refs()[a]).menu;
        let slots: Vec<Slot> = graph.departure_slots(a).collect();
        for (i, allowed) in next.taus[a].iter_mut().enumerate() {
            *allowed &= menu
                .iter()
                .any(|o| next.keys[a][o.key] && o.depart_time() == slots[i]);
        }
        next
    }
}

struct Relaxed {
    bound: Rational,
    /// Present when the relaxed flow already encodes a single departure slot
    /// per aircraft, i.e. it is feasible for the unrelaxed problem.
    exact: Option<FlowSolution>,
}

struct Search<'g> {
    graph: &'g AuxGraph,
    costs: Costs,
    origin: Vec<usize>,
    /// Per aircraft: for each departure slot index, the var edge (E4, or E7
    /// for the stay).
    var_edges: Vec<Vec<usize>>,
    branch_order: Vec<usize>,
    /// Per aircraft, per slot index: best bid among keys departing there.
    slot_bids: Vec<Vec<Rational>>,
    options: SolveOptions,
    started: Instant,
    stats: SolveStats,
}

impl<'g> Search<'g> {
    fn new(graph: &'g AuxGraph, options: &SolveOptions) -> Self {
        let inst = graph.instance();
        let refs = inst.aircraft_refs();
        let origin: Vec<usize> = refs
            .iter()
            .map(|&at| {
                inst.vertiport_index(&inst.aircraft(at).origin)
                    .expect("validated origin")
            })
            .collect();
        let mut var_edges: Vec<Vec<usize>> = (0..refs.len())
            .map(|a| vec![usize::MAX; graph.departure_slots(a).count()])
            .collect();
        for (id, e) in graph.edges().iter().enumerate() {
            if e.class == EdgeClass::E4 {
                let EdgeKey::Departure { aircraft, depart } = e.key else {
                    unreachable!("E4 keyed by departure");
                };
                let a = refs.binary_search(&aircraft).expect("known aircraft");
                var_edges[a][NodeState::slot_index(graph, a, depart)] = id;
            }
        }
        for (a, vars) in var_edges.iter_mut().enumerate() {
            vars[0] = graph.stay_edges(a).0;
        }
        let bids = graph.bids();
        let slot_bids: Vec<Vec<Rational>> = refs
            .iter()
            .enumerate()
            .map(|(a, &at)| {
                let menu = &inst.aircraft(at).menu;
                graph
                    .departure_slots(a)
                    .map(|tau| {
                        menu.iter()
                            .filter(|o| o.depart_time() == tau)
                            .map(|o| bids.get(at, o.key).clone())
                            .max()
                            .expect("slot has a route")
                    })
                    .collect()
            })
            .collect();
        let spread: Vec<Rational> = refs
            .iter()
            .map(|&at| {
                let v = bids.aircraft_values(at);
                let hi = v.iter().max().cloned().unwrap_or_else(Rational::zero);
                let lo = v.iter().min().cloned().unwrap_or_else(Rational::zero);
                &inst.operators()[at.operator].weight * (hi - lo)
            })
            .collect();
        let mut branch_order: Vec<usize> = (0..refs.len()).collect();
        branch_order.sort_by(|&a, &b| spread[b].cmp(&spread[a]).then(a.cmp(&b)));
        Search {
            graph,
            costs: Costs::new(graph),
            origin,
            var_edges,
            branch_order,
            slot_bids,
            options: options.clone(),
            started: Instant::now(),
            stats: SolveStats::default(),
        }
    }

    fn root_state(&self) -> NodeState {
        let inst = self.graph.instance();
        NodeState {
            taus: (0..self.graph.aircraft_count())
                .map(|a| vec![true; self.graph.departure_slots(a).count()])
                .collect(),
            keys: inst
                .aircraft_refs()
                .iter()
                .map(|&at| vec![true; inst.aircraft(at).menu.len()])
                .collect(),
        }
    }

    fn state_for_delta(&self, delta: &DeltaAssignment) -> NodeState {
        let mut state = self.root_state();
        for a in 0..self.graph.aircraft_count() {
            state = state.fix_tau(self.graph, a, delta.slot(a));
        }
        state
    }

    fn tick(&mut self) -> Result<(), SolverError> {
        self.stats.nodes += 1;
        if let Some(limit) = self.options.node_limit {
            if self.stats.nodes > limit {
                return Err(SolverError::NodeLimit(limit));
            }
        }
        if let Some(limit) = self.options.time_limit {
            if self.started.elapsed() > limit {
                return Err(SolverError::TimeLimit(limit));
            }
        }
        Ok(())
    }

    /// Best `(objective, flow)` within the node's domains. With a `target`,
    /// only solutions reaching it are of interest and the search stops at
    /// the first one.
    fn optimize(
        &mut self,
        state: &NodeState,
        target: Option<&Rational>,
    ) -> Result<Option<(Rational, FlowSolution)>, SolverError> {
        let mut best: Option<(Rational, FlowSolution)> = None;
        match self.options.strategy {
            Strategy::Enumerate => self.enumerate(state, target, &mut best)?,
            Strategy::BranchAndBound => {
                // All-stay is always feasible, so it seeds the incumbent.
                if target.is_none() && state.taus.iter().all(|t| t[0]) {
                    let stay = DeltaAssignment::all_stay(self.graph.aircraft_count());
                    let stay_state = self.fixed_state(state, &stay);
                    self.stats.fixed_delta_solves += 1;
                    if let Some(r) = self.relax(&stay_state) {
                        best = Some((r.bound, r.exact.expect("fixed assignment")));
                    }
                }
                self.branch(state, target, &mut best)?;
            }
        }
        Ok(best.filter(|(v, _)| target.is_none_or(|t| v >= t)))
    }

    fn fixed_state(&self, state: &NodeState, delta: &DeltaAssignment) -> NodeState {
        let mut s = state.clone();
        for a in 0..self.graph.aircraft_count() {
            s = s.fix_tau(self.graph, a, delta.slot(a));
        }
        s
    }

    fn enumerate(
        &mut self,
        state: &NodeState,
        target: Option<&Rational>,
        best: &mut Option<(Rational, FlowSolution)>,
    ) -> Result<(), SolverError> {
        for delta in enumerate_deltas(self.graph.instance()) {
            if (0..delta.0.len()).any(|a| !state.tau_allowed(self.graph, a, delta.slot(a))) {
                continue;
            }
            self.tick()?;
            self.stats.fixed_delta_solves += 1;
            let fixed = self.fixed_state(state, &delta);
            let Some(r) = self.relax(&fixed) else {
                continue;
            };
            if best.as_ref().is_none_or(|(v, _)| r.bound > *v) {
                *best = Some((r.bound, r.exact.expect("fixed assignment")));
                if target.is_some_and(|t| best.as_ref().is_some_and(|(v, _)| v >= t)) {
                    return Ok(());
                }
            }
        }
        Ok(())
    }

    fn branch(
        &mut self,
        state: &NodeState,
        target: Option<&Rational>,
        best: &mut Option<(Rational, FlowSolution)>,
    ) -> Result<(), SolverError> {
        if target.is_some_and(|t| best.as_ref().is_some_and(|(v, _)| v >= t)) {
            return Ok(());
        }
        self.tick()?;
        self.stats.fixed_delta_solves += 1;
        let Some(relaxed) = self.relax(state) else {
            return Ok(());
        };
        if let Some((v, _)) = best.as_ref() {
            if relaxed.bound <= *v {
                return Ok(());
            }
        }
        if target.is_some_and(|t| relaxed.bound < *t) {
            return Ok(());
        }
        if let Some(sol) = relaxed.exact {
            *best = Some((relaxed.bound, sol));
            return Ok(());
        }
        let Some(a) = self
            .branch_order
            .iter()
            .copied()
            .find(|&a| state.decided(a).is_none())
        else {
            // Every aircraft decided, so the relaxation is exact.
            unreachable!("decided node without exact flow");
        };
        let mut children: Vec<usize> = (0..state.taus[a].len())
            .filter(|&i| state.taus[a][i])
            .collect();
        let bids = &self.slot_bids[a];
        children.sort_by(|&x, &y| bids[y].cmp(&bids[x]).then(x.cmp(&y)));
        let slots: Vec<Slot> = self.graph.departure_slots(a).collect();
        for i in children {
            let child = state.fix_tau(self.graph, a, slots[i]);
            self.branch(&child, target, best)?;
        }
        Ok(())
    }

    /// Solves the node relaxation. `None` when infeasible.
    fn relax(&self, state: &NodeState) -> Option<Relaxed> {
        match &self.costs {
            Costs::Scaled(c) => self.relax_with(state, c),
            Costs::Exact(c) => self.relax_with(state, c),
        }
    }

    fn relax_with<C: Cost>(&self, state: &NodeState, costs: &[C]) -> Option<Relaxed> {
        let graph = self.graph;
        let inst = graph.instance();
        let refs = inst.aircraft_refs();
        let nr = inst.vertiports().len();
        let source = graph.source();

        // Per aircraft and slot index: Some(0|1) when fixed, None when free.
        let var_value = |a: usize, i: usize| -> Option<i64> {
            if !state.taus[a][i] {
                Some(0)
            } else if state.decided(a).is_some() {
                Some(1)
            } else {
                None
            }
        };
        let mut free_stays = vec![0usize; nr];
        let mut fixed_stays = vec![0i64; nr];
        for a in 0..refs.len() {
            match var_value(a, 0) {
                None => free_stays[self.origin[a]] += 1,
                Some(v) => fixed_stays[self.origin[a]] += v,
            }
        }
        let mut hub = vec![usize::MAX; nr];
        let mut next_node = graph.vertices().len();
        for r in 0..nr {
            if free_stays[r] > 0 {
                hub[r] = next_node;
                next_node += 1;
            }
        }

        let mut net: Vec<NetEdge<C>> = Vec::with_capacity(graph.edges().len() + nr);
        for (id, e) in graph.edges().iter().enumerate() {
            let dead = e.upper.is_zero();
            let (mut tail, head) = (e.tail, e.head);
            let (lower, upper) = match e.class {
                EdgeClass::E1 | EdgeClass::E2 | EdgeClass::E3 | EdgeClass::E8 => {
                    (e.lower.constant, e.upper.constant)
                }
                EdgeClass::E5 => {
                    let EdgeKey::Route { aircraft, key } = e.key else {
                        unreachable!("E5 keyed by route");
                    };
                    let a = refs.binary_search(&aircraft).expect("known aircraft");
                    (0, if state.keys[a][key] { e.upper.constant } else { 0 })
                }
                EdgeClass::E4 | EdgeClass::E7 | EdgeClass::E9 => {
                    let (a, i) = self.var_of(id, e.class, e.head, e.tail);
                    match var_value(a, i) {
                        Some(v) => (v, if dead { 0 } else { v }),
                        None => {
                            if e.class == EdgeClass::E7 {
                                tail = hub[self.origin[a]];
                            }
                            (0, i64::from(!dead))
                        }
                    }
                }
                EdgeClass::E6 => {
                    let AuxVertex::Park { vertiport: r, .. } = graph.vertices()[e.head] else {
                        unreachable!("E6 ends at parking");
                    };
                    let k = graph.initial_occupancy(r) - fixed_stays[r];
                    if free_stays[r] > 0 {
                        tail = hub[r];
                        (0, if dead { 0 } else { k })
                    } else {
                        (k, if dead { 0 } else { k })
                    }
                }
            };
            net.push(NetEdge {
                tail,
                head,
                lower,
                upper,
                cost: costs[id].clone(),
            });
        }
        let m = net.len();
        for r in 0..nr {
            if free_stays[r] > 0 {
                let k = graph.initial_occupancy(r) - fixed_stays[r];
                net.push(NetEdge {
                    tail: source,
                    head: hub[r],
                    lower: k,
                    upper: k,
                    cost: C::zero(),
                });
            }
        }
        let mut flow = min_cost_flow(next_node, &net, &[source, graph.sink()])?;
        flow.truncate(m);
        graph.canonicalize_bundles(&mut flow);
        let bound = graph.objective(&flow);

        let mut slots = Vec::with_capacity(refs.len());
        for (a, vars) in self.var_edges.iter().enumerate() {
            let used: Vec<usize> = (0..vars.len()).filter(|&i| flow[vars[i]] > 0).collect();
            if used.len() != 1 || flow[vars[used[0]]] != 1 {
                return Some(Relaxed { bound, exact: None });
            }
            slots.push(graph.departure_slots(a).nth(used[0]).expect("slot index"));
        }
        let sol = FlowSolution {
            flow,
            delta: DeltaAssignment(slots),
        };
        debug_assert!(graph.check_flow(&sol).is_ok());
        Some(Relaxed {
            bound,
            exact: Some(sol),
        })
    }

    fn var_of(&self, edge: usize, class: EdgeClass, head: usize, tail: usize) -> (usize, usize) {
        let refs = self.graph.instance().aircraft_refs();
        let v = if class == EdgeClass::E9 { tail } else { head };
        let AuxVertex::AircraftDep { aircraft, depart } = self.graph.vertices()[v] else {
            unreachable!("edge {edge} touches an aircraft vertex");
        };
        let a = refs.binary_search(&aircraft).expect("known aircraft");
        (a, NodeState::slot_index(self.graph, a, depart))
    }
}

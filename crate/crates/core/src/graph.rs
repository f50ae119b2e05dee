//! Time-expanded auxiliary flow network.
//!
//! Every vertiport `r` and slot `t` gets three vertices: a parking vertex
//! `Park(r,t)`, an arrival vertex `Arr(r,t)` and a departure vertex
//! `Dep(r,t)`. Every aircraft gets one vertex per distinct departure slot of
//! its menu (slot 0 is the stay option), plus a global source and sink.
//!
//! | class | edge                                   | bounds                 | weight                 |
//! |-------|----------------------------------------|------------------------|------------------------|
//! | E1    | `Arr(r,t) -> Park(r,t)`                | `[0, A(r,t)]`          | 0                      |
//! | E2    | `Park(r,t) -> Dep(r,t)`                | `[0, D(r,t)]`          | 0                      |
//! | E3    | `Park(r,t) -> Park(r,t+1)`, `q`-th     | `[0, 1]`               | `-λ (g(q) - g(q-1))`   |
//! | E4    | `Dep(o,τ) -> AircraftDep(a,τ)`, `τ>0`  | `[δ_{a,τ}, δ_{a,τ}]`   | 0                      |
//! | E5    | `AircraftDep(a,d_k) -> Arr(f_k,a_k)`   | `[0, 1]`               | `ρ b_k`                |
//! | E6    | `Source -> Park(r,1)`                  | `S̄(r) - Σ δ_{a,0}`     | 0                      |
//! | E7    | `Source -> AircraftDep(a,0)`           | `[δ_{a,0}, δ_{a,0}]`   | `ρ b_stay`             |
//! | E8    | `Park(r,H) -> Sink`, `q`-th            | `[0, 1]`               | `-λ (g(q) - g(q-1))`   |
//! | E9    | `AircraftDep(a,0) -> Park(o,1)`        | `[δ_{a,0}, δ_{a,0}]`   | 0                      |
//!
//! Slot-1 departures are drawn from `Park(r,2)` rather than `Park(r,1)`:
//! occupancy at slot 1 is the initial occupancy regardless of the
//! allocation, so the slot-1 E3 bundle has to carry all of it. With that
//! convention the bundle leaving `Park(r,t)` carries exactly `S(r,t,x)` and
//! the objective `W̄ᵀA` equals the social welfare of the encoded allocation.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use num_traits::Zero;

use crate::model::{
    is_feasible, validate_instance, Allocation, AircraftRef, BidProfile, Instance, ModelError,
    OccupancyTable, Route, Slot, ValidationReport,
};
use crate::rational::{int, render_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("invalid instance:\n{0}")]
    InvalidInstance(ValidationReport),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("allocation is infeasible: {0}")]
    InfeasibleAllocation(String),
    #[error("flow vector has {found} entries, graph has {expected} edges")]
    FlowLength { expected: usize, found: usize },
    #[error("departure assignment: {0}")]
    MalformedDelta(String),
    #[error("inconsistent flow at {vertex}: {detail}")]
    Inconsistent { vertex: AuxVertex, detail: String },
    #[error("edge {edge} ({class}) carries {flow}, outside [{lower}, {upper}]")]
    OutOfBounds {
        edge: usize,
        class: EdgeClass,
        flow: i64,
        lower: i64,
        upper: i64,
    },
    #[error("non-binary flow {flow} on {class} edge {edge}")]
    NonBinary {
        edge: usize,
        class: EdgeClass,
        flow: i64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AuxVertex {
    Source,
    Park { vertiport: usize, slot: Slot },
    Arr { vertiport: usize, slot: Slot },
    Dep { vertiport: usize, slot: Slot },
    AircraftDep { aircraft: AircraftRef, depart: Slot },
    Sink,
}

impl fmt::Display for AuxVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            AuxVertex::Source => write!(f, "source"),
            AuxVertex::Sink => write!(f, "sink"),
            AuxVertex::Park { vertiport, slot } => write!(f, "park({vertiport},{slot})"),
            AuxVertex::Arr { vertiport, slot } => write!(f, "arr({vertiport},{slot})"),
            AuxVertex::Dep { vertiport, slot } => write!(f, "dep({vertiport},{slot})"),
            AuxVertex::AircraftDep { aircraft, depart } => write!(
                f,
                "aircraft({},{},{depart})",
                aircraft.operator, aircraft.aircraft
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeClass {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
    E7,
    E8,
    E9,
}

impl fmt::Display for EdgeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Stable identity of an edge within its class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKey {
    Slot { vertiport: usize, slot: Slot },
    Departure { aircraft: AircraftRef, depart: Slot },
    Route { aircraft: AircraftRef, key: usize },
    Vertiport { vertiport: usize },
    Aircraft { aircraft: AircraftRef },
}

/// Index of a binary departure-slot variable `δ_{a,τ}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeltaVar(pub usize);

/// Integer bound that is affine in the departure-slot binaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineBound {
    pub constant: i64,
    pub terms: Vec<(DeltaVar, i64)>,
}

impl AffineBound {
    pub fn constant(value: i64) -> Self {
        AffineBound {
            constant: value,
            terms: Vec::new(),
        }
    }

    pub fn var(v: DeltaVar) -> Self {
        AffineBound {
            constant: 0,
            terms: vec![(v, 1)],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0 && self.terms.is_empty()
    }

    pub fn eval(&self, value: impl Fn(DeltaVar) -> i64) -> i64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * value(v)).sum::<i64>()
    }
}

impl fmt::Display for AffineBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "{}", self.constant);
        }
        let mut first = true;
        if self.constant != 0 {
            write!(f, "{}", self.constant)?;
            first = false;
        }
        for &(DeltaVar(v), c) in &self.terms {
            match (first, c) {
                (true, 1) => write!(f, "d{v}")?,
                (true, -1) => write!(f, "-d{v}")?,
                (true, _) => write!(f, "{c}*d{v}")?,
                (false, 1) => write!(f, "+d{v}")?,
                (false, -1) => write!(f, "-d{v}")?,
                (false, _) => write!(f, "{c:+}*d{v}")?,
            }
            first = false;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuxEdge {
    pub class: EdgeClass,
    pub tail: usize,
    pub head: usize,
    pub lower: AffineBound,
    pub upper: AffineBound,
    pub weight: Rational,
    pub key: EdgeKey,
    /// Position inside an E3/E8 parallel bundle (1-based).
    pub q: Option<u32>,
}

/// One departure slot chosen per aircraft (flat aircraft order); this is the
/// exactly-one encoding of the departure binaries.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeltaAssignment(pub Vec<Slot>);

impl DeltaAssignment {
    pub fn all_stay(count: usize) -> Self {
        DeltaAssignment(vec![0; count])
    }

    pub fn slot(&self, aircraft: usize) -> Slot {
        self.0[aircraft]
    }

    /// Value of `δ_{aircraft, τ}`.
    pub fn value(&self, aircraft: usize, depart: Slot) -> i64 {
        i64::from(self.0[aircraft] == depart)
    }
}

/// Edge flows plus the departure-slot assignment they were solved under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowSolution {
    pub flow: Vec<i64>,
    pub delta: DeltaAssignment,
}

/// A contiguous run of parallel E3/E8 edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    pub vertiport: usize,
    pub slot: Slot,
    pub edges: std::ops::Range<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    /// Zero the capacity of edges hanging off vertices with no incoming (or
    /// no outgoing) edges, iterated to a fixpoint.
    pub prune_dangling: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            prune_dangling: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AuxGraph {
    instance: Instance,
    bids: BidProfile,
    vertices: Vec<AuxVertex>,
    vertex_index: HashMap<AuxVertex, usize>,
    edges: Vec<AuxEdge>,
    delta_vars: Vec<(usize, Slot)>,
    /// Per flat aircraft: `(τ, var)` sorted by `τ`.
    aircraft_deltas: Vec<Vec<(Slot, DeltaVar)>>,
    /// Per flat aircraft, per menu key: the E5 edge (None for the stay).
    route_edges: Vec<Vec<Option<usize>>>,
    /// Per flat aircraft: (E7 edge, E9 edge).
    stay_edges: Vec<(usize, usize)>,
    /// Per vertiport: E6 edge.
    source_edges: Vec<usize>,
    bundles: Vec<Bundle>,
    initial: Vec<i64>,
    pruned: Vec<usize>,
}

/// Builds the auxiliary graph with default options.
pub fn build_graph(instance: &Instance, bids: &BidProfile) -> Result<AuxGraph, GraphError> {
    AuxGraph::build(instance, bids, BuildOptions::default())
}

struct Builder {
    vertices: Vec<AuxVertex>,
    vertex_index: HashMap<AuxVertex, usize>,
    edges: Vec<AuxEdge>,
}

impl Builder {
    fn vertex(&mut self, v: AuxVertex) -> usize {
        let id = self.vertices.len();
        self.vertices.push(v);
        self.vertex_index.insert(v, id);
        id
    }

    fn at(&self, v: AuxVertex) -> usize {
        self.vertex_index[&v]
    }

    #[allow(clippy::too_many_arguments)]
    fn edge(
        &mut self,
        class: EdgeClass,
        tail: AuxVertex,
        head: AuxVertex,
        lower: AffineBound,
        upper: AffineBound,
        weight: Rational,
        key: EdgeKey,
        q: Option<u32>,
    ) -> usize {
        let id = self.edges.len();
        let (tail, head) = (self.at(tail), self.at(head));
        self.edges.push(AuxEdge {
            class,
            tail,
            head,
            lower,
            upper,
            weight,
            key,
            q,
        });
        id
    }
}

impl AuxGraph {
    pub fn build(
        instance: &Instance,
        bids: &BidProfile,
        options: BuildOptions,
    ) -> Result<Self, GraphError> {
        let report = validate_instance(instance);
        if !report.is_valid() {
            return Err(GraphError::InvalidInstance(report));
        }
        bids.check(instance)?;

        let h = instance.horizon();
        let nr = instance.vertiports().len();
        let refs = instance.aircraft_refs();
        let lambda = instance.lambda().clone();
        let mut b = Builder {
            vertices: Vec::new(),
            vertex_index: HashMap::new(),
            edges: Vec::new(),
        };

        use AuxVertex::*;
        b.vertex(Source);
        for r in 0..nr {
            for t in 1..=h {
                b.vertex(Park { vertiport: r, slot: t });
                b.vertex(Arr { vertiport: r, slot: t });
                b.vertex(Dep { vertiport: r, slot: t });
            }
        }
        let mut delta_vars = Vec::new();
        let mut aircraft_deltas = Vec::with_capacity(refs.len());
        for (flat, &at) in refs.iter().enumerate() {
            let mut vars = Vec::new();
            for tau in instance.aircraft(at).departure_times() {
                b.vertex(AircraftDep {
                    aircraft: at,
                    depart: tau,
                });
                let var = DeltaVar(delta_vars.len());
                delta_vars.push((flat, tau));
                vars.push((tau, var));
            }
            aircraft_deltas.push(vars);
        }
        b.vertex(Sink);

        let origin_of: Vec<usize> = refs
            .iter()
            .map(|&at| {
                instance
                    .vertiport_index(&instance.aircraft(at).origin)
                    .expect("validated origin")
            })
            .collect();
        let stay_var = |flat: usize| aircraft_deltas[flat][0].1;
        let zero = || AffineBound::constant(0);
        let one = || AffineBound::constant(1);

        // E1, E2
        for (r, v) in instance.vertiports().iter().enumerate() {
            for t in 1..=h {
                b.edge(
                    EdgeClass::E1,
                    Arr { vertiport: r, slot: t },
                    Park { vertiport: r, slot: t },
                    zero(),
                    AffineBound::constant(v.arrival_cap[(t - 1) as usize] as i64),
                    Rational::zero(),
                    EdgeKey::Slot { vertiport: r, slot: t },
                    None,
                );
            }
        }
        for (r, v) in instance.vertiports().iter().enumerate() {
            for t in 1..=h {
                let park_slot = if t == 1 { 2.min(h) } else { t };
                b.edge(
                    EdgeClass::E2,
                    Park {
                        vertiport: r,
                        slot: park_slot,
                    },
                    Dep { vertiport: r, slot: t },
                    zero(),
                    AffineBound::constant(v.departure_cap[(t - 1) as usize] as i64),
                    Rational::zero(),
                    EdgeKey::Slot { vertiport: r, slot: t },
                    None,
                );
            }
        }
        // E3
        let mut bundles = Vec::new();
        for (r, v) in instance.vertiports().iter().enumerate() {
            for t in 1..h {
                let start = b.edges.len();
                for q in 1..=v.parking_cap[(t - 1) as usize] {
                    b.edge(
                        EdgeClass::E3,
                        Park { vertiport: r, slot: t },
                        Park {
                            vertiport: r,
                            slot: t + 1,
                        },
                        zero(),
                        one(),
                        -(&lambda * v.marginal_congestion(t, q as u64)),
                        EdgeKey::Slot { vertiport: r, slot: t },
                        Some(q),
                    );
                }
                bundles.push(Bundle {
                    vertiport: r,
                    slot: t,
                    edges: start..b.edges.len(),
                });
            }
        }
        // E4
        for (flat, &at) in refs.iter().enumerate() {
            for &(tau, var) in aircraft_deltas[flat].iter().filter(|(tau, _)| *tau != 0) {
                b.edge(
                    EdgeClass::E4,
                    Dep {
                        vertiport: origin_of[flat],
                        slot: tau,
                    },
                    AircraftDep {
                        aircraft: at,
                        depart: tau,
                    },
                    AffineBound::var(var),
                    AffineBound::var(var),
                    Rational::zero(),
                    EdgeKey::Departure {
                        aircraft: at,
                        depart: tau,
                    },
                    None,
                );
            }
        }
        // E5
        let mut route_edges = Vec::with_capacity(refs.len());
        for &at in refs {
            let ac = instance.aircraft(at);
            let rho = &instance.operators()[at.operator].weight;
            let mut per_key = Vec::with_capacity(ac.menu.len());
            for opt in &ac.menu {
                let Route::Transit {
                    depart,
                    destination,
                    arrive,
                } = &opt.route
                else {
                    per_key.push(None);
                    continue;
                };
                let dest = instance.vertiport_index(destination).expect("validated");
                per_key.push(Some(b.edge(
                    EdgeClass::E5,
                    AircraftDep {
                        aircraft: at,
                        depart: *depart,
                    },
                    Arr {
                        vertiport: dest,
                        slot: *arrive,
                    },
                    zero(),
                    one(),
                    rho * bids.get(at, opt.key),
                    EdgeKey::Route {
                        aircraft: at,
                        key: opt.key,
                    },
                    None,
                )));
            }
            route_edges.push(per_key);
        }
        // E6
        let mut initial = vec![0i64; nr];
        for &r in &origin_of {
            initial[r] += 1;
        }
        let mut source_edges = Vec::with_capacity(nr);
        for (r, &count) in initial.iter().enumerate() {
            let bound = AffineBound {
                constant: count,
                terms: (0..refs.len())
                    .filter(|&flat| origin_of[flat] == r)
                    .map(|flat| (stay_var(flat), -1))
                    .collect(),
            };
            source_edges.push(b.edge(
                EdgeClass::E6,
                Source,
                Park { vertiport: r, slot: 1 },
                bound.clone(),
                bound,
                Rational::zero(),
                EdgeKey::Vertiport { vertiport: r },
                None,
            ));
        }
        // E7
        let mut e7 = Vec::with_capacity(refs.len());
        for (flat, &at) in refs.iter().enumerate() {
            let ac = instance.aircraft(at);
            let stay_key = ac.stay_key().expect("validated stay entry");
            let rho = &instance.operators()[at.operator].weight;
            e7.push(b.edge(
                EdgeClass::E7,
                Source,
                AircraftDep {
                    aircraft: at,
                    depart: 0,
                },
                AffineBound::var(stay_var(flat)),
                AffineBound::var(stay_var(flat)),
                rho * bids.get(at, stay_key),
                EdgeKey::Aircraft { aircraft: at },
                None,
            ));
        }
        // E8
        for (r, v) in instance.vertiports().iter().enumerate() {
            let start = b.edges.len();
            for q in 1..=v.parking_cap[(h - 1) as usize] {
                b.edge(
                    EdgeClass::E8,
                    Park { vertiport: r, slot: h },
                    Sink,
                    zero(),
                    one(),
                    -(&lambda * v.marginal_congestion(h, q as u64)),
                    EdgeKey::Slot { vertiport: r, slot: h },
                    Some(q),
                );
            }
            bundles.push(Bundle {
                vertiport: r,
                slot: h,
                edges: start..b.edges.len(),
            });
        }
        bundles.sort_by_key(|bd| (bd.vertiport, bd.slot));
        // E9
        let mut stay_edges = Vec::with_capacity(refs.len());
        for (flat, &at) in refs.iter().enumerate() {
            let e9 = b.edge(
                EdgeClass::E9,
                AircraftDep {
                    aircraft: at,
                    depart: 0,
                },
                Park {
                    vertiport: origin_of[flat],
                    slot: 1,
                },
                AffineBound::var(stay_var(flat)),
                AffineBound::var(stay_var(flat)),
                Rational::zero(),
                EdgeKey::Aircraft { aircraft: at },
                None,
            );
            stay_edges.push((e7[flat], e9));
        }

        let mut graph = AuxGraph {
            instance: instance.clone(),
            bids: bids.clone(),
            vertices: b.vertices,
            vertex_index: b.vertex_index,
            edges: b.edges,
            delta_vars,
            aircraft_deltas,
            route_edges,
            stay_edges,
            source_edges,
            bundles,
            initial,
            pruned: Vec::new(),
        };
        if options.prune_dangling {
            graph.prune();
        }
        Ok(graph)
    }

    fn prune(&mut self) {
        let n = self.vertices.len();
        loop {
            let mut live_in = vec![false; n];
            let mut live_out = vec![false; n];
            for e in &self.edges {
                if !e.upper.is_zero() {
                    live_out[e.tail] = true;
                    live_in[e.head] = true;
                }
            }
            let mut changed = false;
            for (id, e) in self.edges.iter_mut().enumerate() {
                if e.upper.is_zero() {
                    continue;
                }
                let tail_dead = !self.vertices[e.tail].is_terminal() && !live_in[e.tail];
                let head_dead = !self.vertices[e.head].is_terminal() && !live_out[e.head];
                if tail_dead || head_dead {
                    e.upper = AffineBound::constant(0);
                    self.pruned.push(id);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        self.pruned.sort_unstable();
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn bids(&self) -> &BidProfile {
        &self.bids
    }

    pub fn vertices(&self) -> &[AuxVertex] {
        &self.vertices
    }

    pub fn vertex_id(&self, v: AuxVertex) -> Option<usize> {
        self.vertex_index.get(&v).copied()
    }

    pub fn edges(&self) -> &[AuxEdge] {
        &self.edges
    }

    pub fn bundles(&self) -> &[Bundle] {
        &self.bundles
    }

    /// Edges whose capacity was zeroed by dangling-vertex pruning.
    pub fn pruned_edges(&self) -> &[usize] {
        &self.pruned
    }

    pub fn delta_vars(&self) -> &[(usize, Slot)] {
        &self.delta_vars
    }

    /// Distinct departure slots of a flat aircraft, ascending.
    pub fn departure_slots(&self, aircraft: usize) -> impl Iterator<Item = Slot> + '_ {
        self.aircraft_deltas[aircraft].iter().map(|&(tau, _)| tau)
    }

    pub fn aircraft_count(&self) -> usize {
        self.aircraft_deltas.len()
    }

    pub fn route_edge(&self, aircraft: usize, key: usize) -> Option<usize> {
        self.route_edges[aircraft][key]
    }

    /// (E7, E9) edges of a flat aircraft.
    pub fn stay_edges(&self, aircraft: usize) -> (usize, usize) {
        self.stay_edges[aircraft]
    }

    pub fn source_edge(&self, vertiport: usize) -> usize {
        self.source_edges[vertiport]
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn sink(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn check_delta(&self, delta: &DeltaAssignment) -> Result<(), GraphError> {
        if delta.0.len() != self.aircraft_count() {
            return Err(GraphError::MalformedDelta(format!(
                "expected {} aircraft, found {}",
                self.aircraft_count(),
                delta.0.len()
            )));
        }
        for (a, &tau) in delta.0.iter().enumerate() {
            if !self.aircraft_deltas[a].iter().any(|&(t, _)| t == tau) {
                return Err(GraphError::MalformedDelta(format!(
                    "aircraft {a} has no route departing at slot {tau}"
                )));
            }
        }
        Ok(())
    }

    pub fn delta_value(&self, delta: &DeltaAssignment, var: DeltaVar) -> i64 {
        let (a, tau) = self.delta_vars[var.0];
        delta.value(a, tau)
    }

    /// Concrete `(lower, upper)` of an edge under a departure assignment.
    pub fn bounds(&self, edge: usize, delta: &DeltaAssignment) -> (i64, i64) {
        let e = &self.edges[edge];
        let val = |v| self.delta_value(delta, v);
        (e.lower.eval(val), e.upper.eval(val))
    }

    /// `W̄ᵀA`.
    pub fn objective(&self, flow: &[i64]) -> Rational {
        self.edges
            .iter()
            .zip(flow)
            .filter(|(_, &f)| f != 0)
            .map(|(e, &f)| &e.weight * int(f))
            .sum()
    }

    /// Rewrites every E3/E8 bundle to prefix form (lowest `q` first),
    /// preserving the bundle total.
    pub fn canonicalize_bundles(&self, flow: &mut [i64]) {
        for bundle in &self.bundles {
            let total: i64 = flow[bundle.edges.clone()].iter().sum();
            for (i, e) in bundle.edges.clone().enumerate() {
                flow[e] = i64::from((i as i64) < total);
            }
        }
    }

    /// Verifies bounds under `sol.delta` and balance at every non-terminal
    /// vertex.
    pub fn check_flow(&self, sol: &FlowSolution) -> Result<(), GraphError> {
        if sol.flow.len() != self.edges.len() {
            return Err(GraphError::FlowLength {
                expected: self.edges.len(),
                found: sol.flow.len(),
            });
        }
        self.check_delta(&sol.delta)?;
        for (id, e) in self.edges.iter().enumerate() {
            let (lower, upper) = self.bounds(id, &sol.delta);
            let flow = sol.flow[id];
            if flow < lower || flow > upper {
                return Err(GraphError::OutOfBounds {
                    edge: id,
                    class: e.class,
                    flow,
                    lower,
                    upper,
                });
            }
        }
        let mut balance = vec![0i64; self.vertices.len()];
        for (e, &f) in self.edges.iter().zip(&sol.flow) {
            balance[e.head] += f;
            balance[e.tail] -= f;
        }
        for (v, &bal) in balance.iter().enumerate() {
            if bal != 0 && !self.vertices[v].is_terminal() {
                return Err(GraphError::Inconsistent {
                    vertex: self.vertices[v],
                    detail: format!("net inflow {bal}"),
                });
            }
        }
        Ok(())
    }

    /// Departure assignment encoded by an allocation.
    pub fn delta_of(&self, x: &Allocation) -> DeltaAssignment {
        DeltaAssignment(
            self.instance
                .aircraft_refs()
                .iter()
                .map(|&at| x.route(&self.instance, at).depart_time())
                .collect(),
        )
    }

    /// Encodes a feasible allocation as a flow: E5 flows are the route
    /// indicators, the `q`-th E3/E8 edge carries `1(q <= S(r,t,x))`, and the
    /// remaining edges follow from [`AuxGraph::complete_flow`].
    pub fn allocation_to_flow(&self, x: &Allocation) -> Result<FlowSolution, GraphError> {
        x.check(&self.instance)?;
        let report = is_feasible(&self.instance, x);
        if !report.is_feasible() {
            let msg = report
                .violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            return Err(GraphError::InfeasibleAllocation(msg));
        }
        let mut partial = vec![0i64; self.edges.len()];
        for (flat, &at) in self.instance.aircraft_refs().iter().enumerate() {
            if let Some(e) = self.route_edges[flat][x.key(at)] {
                partial[e] = 1;
            }
        }
        let occ = OccupancyTable::compute(&self.instance, x);
        for bundle in &self.bundles {
            let s = occ.occupancy[bundle.vertiport][(bundle.slot - 1) as usize] as i64;
            for (i, e) in bundle.edges.clone().enumerate() {
                partial[e] = i64::from((i as i64) < s);
            }
        }
        self.complete_flow(&partial)
    }

    /// Recovers the unique feasible flow from its E3, E5 and E8 entries
    /// (other entries of `partial` are ignored). Arrival balance fixes E1,
    /// aircraft-departure balance fixes E4 and hence the departure slots,
    /// departure balance fixes E2, the slots fix E6/E7/E9, and parking
    /// balance is then checked.
    pub fn complete_flow(&self, partial: &[i64]) -> Result<FlowSolution, GraphError> {
        if partial.len() != self.edges.len() {
            return Err(GraphError::FlowLength {
                expected: self.edges.len(),
                found: partial.len(),
            });
        }
        let mut flow = vec![0i64; self.edges.len()];
        let mut inflow = vec![0i64; self.vertices.len()];
        let mut outflow = vec![0i64; self.vertices.len()];
        for (id, e) in self.edges.iter().enumerate() {
            if matches!(e.class, EdgeClass::E3 | EdgeClass::E5 | EdgeClass::E8) {
                let f = partial[id];
                if !(0..=1).contains(&f) {
                    return Err(GraphError::OutOfBounds {
                        edge: id,
                        class: e.class,
                        flow: f,
                        lower: 0,
                        upper: 1,
                    });
                }
                flow[id] = f;
                inflow[e.head] += f;
                outflow[e.tail] += f;
            }
        }
        // E1 from arrival balance.
        for (id, e) in self.edges.iter().enumerate() {
            if e.class == EdgeClass::E1 {
                flow[id] = inflow[e.tail];
            }
        }
        // E4 from aircraft-departure balance; this determines the slots.
        let mut slots: Vec<Option<Slot>> = vec![None; self.aircraft_count()];
        let refs = self.instance.aircraft_refs();
        for (id, e) in self.edges.iter().enumerate() {
            if e.class != EdgeClass::E4 {
                continue;
            }
            let f = outflow[e.head];
            flow[id] = f;
            let AuxVertex::AircraftDep { aircraft, depart } = self.vertices[e.head] else {
                unreachable!("E4 ends at an aircraft-departure vertex");
            };
            let flat = refs.binary_search(&aircraft).expect("known aircraft");
            match f {
                0 => {}
                1 if slots[flat].is_none() => slots[flat] = Some(depart),
                _ => {
                    return Err(GraphError::Inconsistent {
                        vertex: self.vertices[e.head],
                        detail: format!("departure flow {f} cannot encode a single route"),
                    })
                }
            }
        }
        let delta = DeltaAssignment(slots.into_iter().map(|s| s.unwrap_or(0)).collect());
        // E2 from departure balance.
        let mut dep_out = vec![0i64; self.vertices.len()];
        for (id, e) in self.edges.iter().enumerate() {
            if e.class == EdgeClass::E4 {
                dep_out[e.tail] += flow[id];
            }
        }
        for (id, e) in self.edges.iter().enumerate() {
            if e.class == EdgeClass::E2 {
                flow[id] = dep_out[e.head];
            }
        }
        // E6, E7, E9 are pinned by the slots.
        for (id, e) in self.edges.iter().enumerate() {
            if matches!(e.class, EdgeClass::E6 | EdgeClass::E7 | EdgeClass::E9) {
                flow[id] = self.bounds(id, &delta).0;
            }
        }
        let sol = FlowSolution { flow, delta };
        self.check_flow(&sol)?;
        Ok(sol)
    }

    /// Decodes a flow into the allocation it encodes. The flow must satisfy
    /// bounds and balance.
    pub fn flow_to_allocation(&self, sol: &FlowSolution) -> Result<Allocation, GraphError> {
        self.check_flow(sol)?;
        let mut flat_keys = Vec::with_capacity(self.aircraft_count());
        for (flat, &at) in self.instance.aircraft_refs().iter().enumerate() {
            let ac = self.instance.aircraft(at);
            let (_, e9) = self.stay_edges[flat];
            let mut chosen = Vec::new();
            for (e, key) in std::iter::once((e9, ac.stay_key().expect("stay"))).chain(
                self.route_edges[flat]
                    .iter()
                    .enumerate()
                    .filter_map(|(k, e)| e.map(|e| (e, k))),
            ) {
                match sol.flow[e] {
                    0 => {}
                    1 => chosen.push(key),
                    f => {
                        return Err(GraphError::NonBinary {
                            edge: e,
                            class: self.edges[e].class,
                            flow: f,
                        })
                    }
                }
            }
            if chosen.len() != 1 {
                return Err(GraphError::Inconsistent {
                    vertex: AuxVertex::AircraftDep {
                        aircraft: at,
                        depart: 0,
                    },
                    detail: format!("aircraft selects {} routes", chosen.len()),
                });
            }
            flat_keys.push(chosen[0]);
        }
        Ok(Allocation::from_flat(&self.instance, &flat_keys)?)
    }

    pub fn incidence(&self) -> SignedMatrix {
        let mut m = SignedMatrix::zeros(self.vertices.len(), self.edges.len());
        for (j, e) in self.edges.iter().enumerate() {
            m.set(e.head, j, 1);
            m.set(e.tail, j, -1);
        }
        m
    }

    /// Incidence matrix without the source and sink rows.
    pub fn truncated_incidence(&self) -> SignedMatrix {
        let full = self.incidence();
        let keep: Vec<usize> = (0..self.vertices.len())
            .filter(|&v| !self.vertices[v].is_terminal())
            .collect();
        let mut m = SignedMatrix::zeros(keep.len(), full.cols);
        for (i, &v) in keep.iter().enumerate() {
            for j in 0..full.cols {
                m.set(i, j, full.get(v, j));
            }
        }
        m
    }

    /// Graphviz rendering with class, bounds and weight on every edge.
    pub fn to_dot(&self) -> String {
        let names: Vec<String> = self
            .vertices
            .iter()
            .map(|v| self.vertex_label(v))
            .collect();
        let mut out = String::from("digraph aux {\n  rankdir=LR;\n");
        for (i, name) in names.iter().enumerate() {
            let _ = writeln!(out, "  n{i} [label=\"{name}\"];");
        }
        for e in &self.edges {
            let q = e.q.map(|q| format!(" q={q}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "  n{} -> n{} [label=\"{}{q} [{}, {}] w={}\"];",
                e.tail,
                e.head,
                e.class,
                e.lower,
                e.upper,
                render_rational(&e.weight)
            );
        }
        out.push_str("}\n");
        out
    }

    fn vertex_label(&self, v: &AuxVertex) -> String {
        let port = |r: usize| self.instance.vertiports()[r].id.as_str();
        match *v {
            AuxVertex::Source => "source".into(),
            AuxVertex::Sink => "sink".into(),
            AuxVertex::Park { vertiport, slot } => format!("park {} t={slot}", port(vertiport)),
            AuxVertex::Arr { vertiport, slot } => format!("arr {} t={slot}", port(vertiport)),
            AuxVertex::Dep { vertiport, slot } => format!("dep {} t={slot}", port(vertiport)),
            AuxVertex::AircraftDep { aircraft, depart } => {
                let op = &self.instance.operators()[aircraft.operator];
                format!("{}/{} τ={depart}", op.id, op.fleet[aircraft.aircraft].id)
            }
        }
    }

    pub(crate) fn initial_occupancy(&self, vertiport: usize) -> i64 {
        self.initial[vertiport]
    }
}

impl AuxVertex {
    pub fn is_terminal(&self) -> bool {
        matches!(self, AuxVertex::Source | AuxVertex::Sink)
    }
}

/// Dense matrix with entries in {-1, 0, 1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<i8>,
}

impl SignedMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SignedMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> i8 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: i8) {
        self.data[r * self.cols + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec<i8> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Exact determinant of the square submatrix on `rows` x `cols`
    /// (fraction-free Bareiss elimination).
    pub fn minor(&self, rows: &[usize], cols: &[usize]) -> i64 {
        assert_eq!(rows.len(), cols.len(), "minor must be square");
        let n = rows.len();
        if n == 0 {
            return 1;
        }
        let mut a: Vec<Vec<i128>> = rows
            .iter()
            .map(|&r| cols.iter().map(|&c| self.get(r, c) as i128).collect())
            .collect();
        let mut sign = 1i128;
        let mut prev = 1i128;
        for k in 0..n - 1 {
            if a[k][k] == 0 {
                let Some(swap) = (k + 1..n).find(|&i| a[i][k] != 0) else {
                    return 0;
                };
                a.swap(k, swap);
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
                }
            }
            prev = a[k][k];
        }
        (sign * a[n - 1][n - 1]) as i64
    }
}

//! Domain model: vertiports, operators, route menus, allocations, and the
//! welfare/occupancy functionals evaluated on them.
//!
//! Slots are 1-based (`1..=H`). The stay option has departure time 0 and
//! consumes parking only; it is never counted against arrival or departure
//! capacity. A transit route departing at slot `d` leaves origin parking from
//! slot `max(d, 2)` onward and occupies destination parking from its arrival
//! slot onward.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_traits::{Signed, Zero};

use crate::rational::{int, Rational};

pub type Slot = u32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown vertiport {0:?}")]
    UnknownVertiport(String),
    #[error("unknown operator {0:?}")]
    UnknownOperator(String),
    #[error("slot {slot} outside 1..={horizon}")]
    SlotOutOfRange { slot: Slot, horizon: Slot },
    #[error("malformed allocation: {0}")]
    MalformedAllocation(String),
    #[error("malformed value profile: {0}")]
    MalformedProfile(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vertiport {
    pub id: String,
    pub arrival_cap: Vec<u32>,
    pub departure_cap: Vec<u32>,
    pub parking_cap: Vec<u32>,
    /// `congestion_cost[t - 1][q]` is the congestion cost of `q` parked
    /// aircraft at slot `t`, for `q` in `0..=parking_cap[t - 1]`.
    pub congestion_cost: Vec<Vec<Rational>>,
}

impl Vertiport {
    /// Vertiport with the same capacities in every slot and the congestion
    /// cost `g(q)` sampled from `cost` up to the parking capacity.
    pub fn uniform(
        id: impl Into<String>,
        horizon: Slot,
        arrival: u32,
        departure: u32,
        parking: u32,
        cost: impl Fn(u32) -> Rational,
    ) -> Self {
        let h = horizon as usize;
        let table: Vec<Rational> = (0..=parking).map(&cost).collect();
        Vertiport {
            id: id.into(),
            arrival_cap: vec![arrival; h],
            departure_cap: vec![departure; h],
            parking_cap: vec![parking; h],
            congestion_cost: vec![table; h],
        }
    }

    /// Congestion cost at slot `t` with `q` parked aircraft. Beyond the table
    /// the cost is extended linearly with the last increment.
    pub fn congestion(&self, t: Slot, q: u64) -> Rational {
        let table = &self.congestion_cost[(t - 1) as usize];
        let last = table.len() - 1;
        if (q as usize) <= last {
            return table[q as usize].clone();
        }
        let step = if last == 0 {
            Rational::zero()
        } else {
            &table[last] - &table[last - 1]
        };
        &table[last] + step * int((q as usize - last) as i64)
    }

    /// Marginal cost `g(q) - g(q - 1)` for `q >= 1`.
    pub fn marginal_congestion(&self, t: Slot, q: u64) -> Rational {
        self.congestion(t, q) - self.congestion(t, q - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Route {
    Stay,
    Transit {
        depart: Slot,
        destination: String,
        arrive: Slot,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RouteOption {
    pub key: usize,
    pub route: Route,
}

impl RouteOption {
    pub fn stay(key: usize) -> Self {
        RouteOption {
            key,
            route: Route::Stay,
        }
    }

    pub fn transit(key: usize, depart: Slot, destination: impl Into<String>, arrive: Slot) -> Self {
        RouteOption {
            key,
            route: Route::Transit {
                depart,
                destination: destination.into(),
                arrive,
            },
        }
    }

    pub fn is_stay(&self) -> bool {
        matches!(self.route, Route::Stay)
    }

    /// Departure slot; 0 for the stay option.
    pub fn depart_time(&self) -> Slot {
        match self.route {
            Route::Stay => 0,
            Route::Transit { depart, .. } => depart,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aircraft {
    pub id: String,
    pub origin: String,
    pub menu: Vec<RouteOption>,
}

impl Aircraft {
    pub fn stay_key(&self) -> Option<usize> {
        self.menu.iter().find(|o| o.is_stay()).map(|o| o.key)
    }

    /// Distinct departure slots over the menu, ascending (0 for the stay).
    pub fn departure_times(&self) -> Vec<Slot> {
        self.menu
            .iter()
            .map(RouteOption::depart_time)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Operator {
    pub id: String,
    pub weight: Rational,
    pub fleet: Vec<Aircraft>,
}

/// Position of an aircraft inside an [`Instance`]: operator index and
/// aircraft index within that operator's (sorted) fleet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AircraftRef {
    pub operator: usize,
    pub aircraft: usize,
}

/// Full auction input. Immutable after construction; operators, fleets,
/// vertiports and menus are kept sorted by id / key.
#[derive(Debug, Clone)]
pub struct Instance {
    horizon: Slot,
    lambda: Rational,
    vertiports: Vec<Vertiport>,
    operators: Vec<Operator>,
    vertiport_lookup: HashMap<String, usize>,
    aircraft: Vec<AircraftRef>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.horizon == other.horizon
            && self.lambda == other.lambda
            && self.vertiports == other.vertiports
            && self.operators == other.operators
    }
}

impl Eq for Instance {}

impl Instance {
    pub fn new(
        horizon: Slot,
        lambda: Rational,
        mut vertiports: Vec<Vertiport>,
        mut operators: Vec<Operator>,
    ) -> Self {
        vertiports.sort_by(|a, b| a.id.cmp(&b.id));
        operators.sort_by(|a, b| a.id.cmp(&b.id));
        for op in &mut operators {
            op.fleet.sort_by(|a, b| a.id.cmp(&b.id));
            for ac in &mut op.fleet {
                ac.menu.sort_by_key(|o| o.key);
            }
        }
        let vertiport_lookup = vertiports
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id.clone(), i))
            .collect();
        let aircraft = operators
            .iter()
            .enumerate()
            .flat_map(|(o, op)| {
                (0..op.fleet.len()).map(move |a| AircraftRef {
                    operator: o,
                    aircraft: a,
                })
            })
            .collect();
        Instance {
            horizon,
            lambda,
            vertiports,
            operators,
            vertiport_lookup,
            aircraft,
        }
    }

    pub fn horizon(&self) -> Slot {
        self.horizon
    }

    pub fn lambda(&self) -> &Rational {
        &self.lambda
    }

    pub fn vertiports(&self) -> &[Vertiport] {
        &self.vertiports
    }

    pub fn operators(&self) -> &[Operator] {
        &self.operators
    }

    pub fn vertiport_index(&self, id: &str) -> Option<usize> {
        self.vertiport_lookup.get(id).copied()
    }

    pub fn operator_index(&self, id: &str) -> Option<usize> {
        self.operators.iter().position(|o| o.id == id)
    }

    /// All aircraft in deterministic (operator, aircraft) order.
    pub fn aircraft_refs(&self) -> &[AircraftRef] {
        &self.aircraft
    }

    pub fn aircraft_count(&self) -> usize {
        self.aircraft.len()
    }

    pub fn aircraft(&self, at: AircraftRef) -> &Aircraft {
        &self.operators[at.operator].fleet[at.aircraft]
    }

    /// Size of the unrestricted allocation space, saturating.
    pub fn candidate_space(&self) -> u128 {
        self.aircraft
            .iter()
            .map(|&a| self.aircraft(a).menu.len() as u128)
            .fold(1u128, |acc, m| acc.saturating_mul(m))
    }

    fn resolve(&self, id: &str) -> Result<usize, ModelError> {
        self.vertiport_index(id)
            .ok_or_else(|| ModelError::UnknownVertiport(id.to_string()))
    }

    fn check_slot(&self, t: Slot) -> Result<(), ModelError> {
        if t == 0 || t > self.horizon {
            return Err(ModelError::SlotOutOfRange {
                slot: t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }
}

/// A value per menu entry of every aircraft: used for both bids and
/// valuations. Indexed `[operator][aircraft][key]` in instance order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueProfile {
    values: Vec<Vec<Vec<Rational>>>,
}

pub type BidProfile = ValueProfile;
pub type ValuationProfile = ValueProfile;

impl ValueProfile {
    pub fn zeros(instance: &Instance) -> Self {
        Self::from_fn(instance, |_, _, _| Rational::zero())
    }

    pub fn from_fn(
        instance: &Instance,
        mut f: impl FnMut(AircraftRef, &Aircraft, &RouteOption) -> Rational,
    ) -> Self {
        let values = instance
            .operators()
            .iter()
            .enumerate()
            .map(|(o, op)| {
                op.fleet
                    .iter()
                    .enumerate()
                    .map(|(a, ac)| {
                        let at = AircraftRef {
                            operator: o,
                            aircraft: a,
                        };
                        ac.menu.iter().map(|opt| f(at, ac, opt)).collect()
                    })
                    .collect()
            })
            .collect();
        ValueProfile { values }
    }

    /// Wraps nested values, checking they are dense over the instance menus
    /// and non-negative.
    pub fn from_nested(
        instance: &Instance,
        values: Vec<Vec<Vec<Rational>>>,
    ) -> Result<Self, ModelError> {
        let profile = ValueProfile { values };
        profile.check(instance)?;
        Ok(profile)
    }

    pub fn check(&self, instance: &Instance) -> Result<(), ModelError> {
        let ops = instance.operators();
        if self.values.len() != ops.len() {
            return Err(ModelError::MalformedProfile(format!(
                "expected {} operators, found {}",
                ops.len(),
                self.values.len()
            )));
        }
        for (op, row) in ops.iter().zip(&self.values) {
            if row.len() != op.fleet.len() {
                return Err(ModelError::MalformedProfile(format!(
                    "operator {:?}: expected {} aircraft, found {}",
                    op.id,
                    op.fleet.len(),
                    row.len()
                )));
            }
            for (ac, entries) in op.fleet.iter().zip(row) {
                if entries.len() != ac.menu.len() {
                    return Err(ModelError::MalformedProfile(format!(
                        "aircraft {}/{}: expected {} menu values, found {}",
                        op.id,
                        ac.id,
                        ac.menu.len(),
                        entries.len()
                    )));
                }
                if let Some(k) = entries.iter().position(|v| v.is_negative()) {
                    return Err(ModelError::MalformedProfile(format!(
                        "aircraft {}/{}: value for key {k} is negative",
                        op.id, ac.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, at: AircraftRef, key: usize) -> &Rational {
        &self.values[at.operator][at.aircraft][key]
    }

    pub fn set(&mut self, at: AircraftRef, key: usize, value: Rational) {
        self.values[at.operator][at.aircraft][key] = value;
    }

    pub fn aircraft_values(&self, at: AircraftRef) -> &[Rational] {
        &self.values[at.operator][at.aircraft]
    }

    pub fn operator_values(&self, operator: usize) -> &[Vec<Rational>] {
        &self.values[operator]
    }

    /// Replaces one operator's values wholesale (shape must match).
    pub fn with_operator(&self, operator: usize, values: Vec<Vec<Rational>>) -> Self {
        let mut next = self.clone();
        assert_eq!(next.values[operator].len(), values.len());
        next.values[operator] = values;
        next
    }

    pub fn nested(&self) -> &[Vec<Vec<Rational>>] {
        &self.values
    }
}

/// One selected menu key per aircraft, `[operator][aircraft]`. Canonical
/// form: an aircraft without a granted transit route holds its stay key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Allocation {
    keys: Vec<Vec<usize>>,
}

impl Allocation {
    pub fn from_keys(instance: &Instance, keys: Vec<Vec<usize>>) -> Result<Self, ModelError> {
        let alloc = Allocation { keys };
        alloc.check(instance)?;
        Ok(alloc)
    }

    pub fn all_stay(instance: &Instance) -> Self {
        let keys = instance
            .operators()
            .iter()
            .map(|op| {
                op.fleet
                    .iter()
                    .map(|ac| ac.stay_key().expect("menu without stay entry"))
                    .collect()
            })
            .collect();
        Allocation { keys }
    }

    /// Builds from a flat key list in [`Instance::aircraft_refs`] order.
    pub fn from_flat(instance: &Instance, flat: &[usize]) -> Result<Self, ModelError> {
        if flat.len() != instance.aircraft_count() {
            return Err(ModelError::MalformedAllocation(format!(
                "expected {} keys, found {}",
                instance.aircraft_count(),
                flat.len()
            )));
        }
        let mut keys: Vec<Vec<usize>> = instance
            .operators()
            .iter()
            .map(|op| vec![0; op.fleet.len()])
            .collect();
        for (at, &k) in instance.aircraft_refs().iter().zip(flat) {
            keys[at.operator][at.aircraft] = k;
        }
        Self::from_keys(instance, keys)
    }

    pub fn check(&self, instance: &Instance) -> Result<(), ModelError> {
        let ops = instance.operators();
        if self.keys.len() != ops.len() {
            return Err(ModelError::MalformedAllocation(format!(
                "expected {} operators, found {}",
                ops.len(),
                self.keys.len()
            )));
        }
        for (op, row) in ops.iter().zip(&self.keys) {
            if row.len() != op.fleet.len() {
                return Err(ModelError::MalformedAllocation(format!(
                    "operator {:?}: expected {} aircraft, found {}",
                    op.id,
                    op.fleet.len(),
                    row.len()
                )));
            }
            for (ac, &k) in op.fleet.iter().zip(row) {
                if k >= ac.menu.len() {
                    return Err(ModelError::MalformedAllocation(format!(
                        "aircraft {}/{}: key {k} not in menu",
                        op.id, ac.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn key(&self, at: AircraftRef) -> usize {
        self.keys[at.operator][at.aircraft]
    }

    pub fn keys(&self) -> &[Vec<usize>] {
        &self.keys
    }

    pub fn flat(&self) -> Vec<usize> {
        self.keys.iter().flatten().copied().collect()
    }

    pub fn route<'a>(&self, instance: &'a Instance, at: AircraftRef) -> &'a RouteOption {
        &instance.aircraft(at).menu[self.key(at)]
    }
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationIssue {
    ZeroHorizon,
    NegativeLambda,
    DuplicateId {
        kind: &'static str,
        id: String,
    },
    TableLength {
        vertiport: String,
        table: &'static str,
        len: usize,
        horizon: Slot,
    },
    CongestionTableSize {
        vertiport: String,
        slot: Slot,
        len: usize,
        expected: usize,
    },
    CongestionOrigin {
        vertiport: String,
        slot: Slot,
    },
    CongestionNegative {
        vertiport: String,
        slot: Slot,
        q: usize,
    },
    CongestionNotConvex {
        vertiport: String,
        slot: Slot,
        q: usize,
    },
    SlackCondition {
        vertiport: String,
        slot: Slot,
        capacity: u32,
        initial: u64,
    },
    NonPositiveWeight {
        operator: String,
    },
    UnknownOrigin {
        operator: String,
        aircraft: String,
        origin: String,
    },
    UnknownDestination {
        operator: String,
        aircraft: String,
        key: usize,
        destination: String,
    },
    StayCount {
        operator: String,
        aircraft: String,
        count: usize,
    },
    MenuKeys {
        operator: String,
        aircraft: String,
    },
    TransitTimes {
        operator: String,
        aircraft: String,
        key: usize,
        depart: Slot,
        arrive: Slot,
    },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ValidationIssue::*;
        match self {
            ZeroHorizon => write!(f, "horizon must be at least 1"),
            NegativeLambda => write!(f, "lambda must be non-negative"),
            DuplicateId { kind, id } => write!(f, "duplicate {kind} id {id:?}"),
            TableLength {
                vertiport,
                table,
                len,
                horizon,
            } => write!(
                f,
                "vertiport {vertiport:?}: {table} has {len} entries, expected {horizon}"
            ),
            CongestionTableSize {
                vertiport,
                slot,
                len,
                expected,
            } => write!(
                f,
                "vertiport {vertiport:?} slot {slot}: congestion_cost has {len} entries, expected {expected}"
            ),
            CongestionOrigin { vertiport, slot } => write!(
                f,
                "vertiport {vertiport:?} slot {slot}: congestion_cost(0) must be 0"
            ),
            CongestionNegative { vertiport, slot, q } => write!(
                f,
                "vertiport {vertiport:?} slot {slot}: congestion_cost({q}) is negative"
            ),
            CongestionNotConvex { vertiport, slot, q } => write!(
                f,
                "vertiport {vertiport:?} slot {slot}: congestion_cost not discrete convex at q={q}"
            ),
            SlackCondition {
                vertiport,
                slot,
                capacity,
                initial,
            } => write!(
                f,
                "vertiport {vertiport:?} slot {slot}: slack condition violated (parking capacity {capacity} < initial occupancy {initial})"
            ),
            NonPositiveWeight { operator } => {
                write!(f, "operator {operator:?}: weight must be positive")
            }
            UnknownOrigin {
                operator,
                aircraft,
                origin,
            } => write!(
                f,
                "aircraft {operator}/{aircraft}: unknown origin vertiport {origin:?}"
            ),
            UnknownDestination {
                operator,
                aircraft,
                key,
                destination,
            } => write!(
                f,
                "aircraft {operator}/{aircraft} route {key}: unknown destination vertiport {destination:?}"
            ),
            StayCount {
                operator,
                aircraft,
                count,
            } => write!(
                f,
                "aircraft {operator}/{aircraft}: menu must contain exactly one stay entry, found {count}"
            ),
            MenuKeys { operator, aircraft } => write!(
                f,
                "aircraft {operator}/{aircraft}: menu keys must be unique and contiguous from 0"
            ),
            TransitTimes {
                operator,
                aircraft,
                key,
                depart,
                arrive,
            } => write!(
                f,
                "aircraft {operator}/{aircraft} route {key}: transit needs 1 <= depart ({depart}) < arrive ({arrive}) <= horizon"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "valid");
        }
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

fn push_duplicates<'a>(
    issues: &mut Vec<ValidationIssue>,
    kind: &'static str,
    ids: impl Iterator<Item = &'a String>,
) {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            issues.push(ValidationIssue::DuplicateId {
                kind,
                id: id.clone(),
            });
        }
    }
}

/// Lists every violated instance invariant; an empty report means the
/// instance is admissible to every other operation.
pub fn validate_instance(instance: &Instance) -> ValidationReport {
    use ValidationIssue::*;
    let mut issues = Vec::new();
    let h = instance.horizon();
    if h == 0 {
        issues.push(ZeroHorizon);
    }
    if instance.lambda().is_negative() {
        issues.push(NegativeLambda);
    }
    push_duplicates(
        &mut issues,
        "vertiport",
        instance.vertiports().iter().map(|v| &v.id),
    );
    push_duplicates(
        &mut issues,
        "operator",
        instance.operators().iter().map(|o| &o.id),
    );
    for op in instance.operators() {
        push_duplicates(&mut issues, "aircraft", op.fleet.iter().map(|a| &a.id));
    }

    let mut tables_ok = vec![true; instance.vertiports().len()];
    for (vi, v) in instance.vertiports().iter().enumerate() {
        for (table, len) in [
            ("arrival_cap", v.arrival_cap.len()),
            ("departure_cap", v.departure_cap.len()),
            ("parking_cap", v.parking_cap.len()),
            ("congestion_cost", v.congestion_cost.len()),
        ] {
            if len != h as usize {
                tables_ok[vi] = false;
                issues.push(TableLength {
                    vertiport: v.id.clone(),
                    table,
                    len,
                    horizon: h,
                });
            }
        }
        if !tables_ok[vi] {
            continue;
        }
        for t in 1..=h {
            let table = &v.congestion_cost[(t - 1) as usize];
            let expected = v.parking_cap[(t - 1) as usize] as usize + 1;
            if table.len() != expected {
                tables_ok[vi] = false;
                issues.push(CongestionTableSize {
                    vertiport: v.id.clone(),
                    slot: t,
                    len: table.len(),
                    expected,
                });
                continue;
            }
            if !table[0].is_zero() {
                issues.push(CongestionOrigin {
                    vertiport: v.id.clone(),
                    slot: t,
                });
            }
            for (q, g) in table.iter().enumerate() {
                if g.is_negative() {
                    issues.push(CongestionNegative {
                        vertiport: v.id.clone(),
                        slot: t,
                        q,
                    });
                }
            }
            for q in 1..table.len().saturating_sub(1) {
                let left = &table[q] - &table[q - 1];
                let right = &table[q + 1] - &table[q];
                if right < left {
                    issues.push(CongestionNotConvex {
                        vertiport: v.id.clone(),
                        slot: t,
                        q,
                    });
                }
            }
        }
    }

    let mut initial = vec![0u64; instance.vertiports().len()];
    for op in instance.operators() {
        if !op.weight.is_positive() {
            issues.push(NonPositiveWeight {
                operator: op.id.clone(),
            });
        }
        for ac in &op.fleet {
            match instance.vertiport_index(&ac.origin) {
                Some(r) => initial[r] += 1,
                None => issues.push(UnknownOrigin {
                    operator: op.id.clone(),
                    aircraft: ac.id.clone(),
                    origin: ac.origin.clone(),
                }),
            }
            let stays = ac.menu.iter().filter(|o| o.is_stay()).count();
            if stays != 1 {
                issues.push(StayCount {
                    operator: op.id.clone(),
                    aircraft: ac.id.clone(),
                    count: stays,
                });
            }
            if ac.menu.iter().enumerate().any(|(i, o)| o.key != i) {
                issues.push(MenuKeys {
                    operator: op.id.clone(),
                    aircraft: ac.id.clone(),
                });
            }
            for opt in &ac.menu {
                if let Route::Transit {
                    depart,
                    destination,
                    arrive,
                } = &opt.route
                {
                    if !(1 <= *depart && depart < arrive && *arrive <= h) {
                        issues.push(TransitTimes {
                            operator: op.id.clone(),
                            aircraft: ac.id.clone(),
                            key: opt.key,
                            depart: *depart,
                            arrive: *arrive,
                        });
                    }
                    if instance.vertiport_index(destination).is_none() {
                        issues.push(UnknownDestination {
                            operator: op.id.clone(),
                            aircraft: ac.id.clone(),
                            key: opt.key,
                            destination: destination.clone(),
                        });
                    }
                }
            }
        }
    }

    for (vi, v) in instance.vertiports().iter().enumerate() {
        if v.parking_cap.len() != h as usize {
            continue;
        }
        for (t, &cap) in v.parking_cap.iter().enumerate() {
            if (cap as u64) < initial[vi] {
                issues.push(SlackCondition {
                    vertiport: v.id.clone(),
                    slot: t as Slot + 1,
                    capacity: cap,
                    initial: initial[vi],
                });
            }
        }
    }
    ValidationReport { issues }
}

// ---------------------------------------------------------------------------
// Occupancy and feasibility

/// Per-vertiport, per-slot arrival/departure counts and parking occupancy
/// for one allocation. Tables are indexed `[vertiport][slot - 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyTable {
    pub arrivals: Vec<Vec<u64>>,
    pub departures: Vec<Vec<u64>>,
    pub occupancy: Vec<Vec<u64>>,
}

impl OccupancyTable {
    /// Evaluates the state recursion: `S(r,1) = S̄(r)`, and for `t >= 2`,
    /// `S(r,t) = S(r,t-1) + arrivals(r,t) - leaving(r,t)`, where a departure
    /// at slot `d` is counted as leaving at `max(d, 2)`.
    ///
    /// Requires an instance whose vertiport references resolve.
    pub fn compute(instance: &Instance, x: &Allocation) -> Self {
        let h = instance.horizon() as usize;
        let nr = instance.vertiports().len();
        let mut arrivals = vec![vec![0u64; h]; nr];
        let mut departures = vec![vec![0u64; h]; nr];
        let mut leaving = vec![vec![0u64; h]; nr];
        let mut initial = vec![0u64; nr];
        for &at in instance.aircraft_refs() {
            let ac = instance.aircraft(at);
            let origin = instance.vertiport_index(&ac.origin).expect("origin");
            initial[origin] += 1;
            if let Route::Transit {
                depart,
                destination,
                arrive,
            } = &x.route(instance, at).route
            {
                let dest = instance.vertiport_index(destination).expect("destination");
                departures[origin][*depart as usize - 1] += 1;
                leaving[origin][(*depart).max(2) as usize - 1] += 1;
                arrivals[dest][*arrive as usize - 1] += 1;
            }
        }
        let mut occupancy = vec![vec![0u64; h]; nr];
        for r in 0..nr {
            if h == 0 {
                continue;
            }
            occupancy[r][0] = initial[r];
            for t in 1..h {
                occupancy[r][t] = occupancy[r][t - 1] + arrivals[r][t] - leaving[r][t];
            }
        }
        OccupancyTable {
            arrivals,
            departures,
            occupancy,
        }
    }
}

/// `S̄(r)`: number of aircraft whose origin is `r`.
pub fn initial_occupancy(instance: &Instance, r: &str) -> Result<u64, ModelError> {
    instance.resolve(r)?;
    Ok(instance
        .aircraft_refs()
        .iter()
        .filter(|&&at| instance.aircraft(at).origin == r)
        .count() as u64)
}

/// `S(r, t, x)`.
pub fn occupancy(instance: &Instance, x: &Allocation, r: &str, t: Slot) -> Result<u64, ModelError> {
    let ri = instance.resolve(r)?;
    instance.check_slot(t)?;
    x.check(instance)?;
    Ok(OccupancyTable::compute(instance, x).occupancy[ri][(t - 1) as usize])
}

/// `C(r, t) - S(r, t, x)`; negative values signal a parking violation.
pub fn residual_capacity(
    instance: &Instance,
    x: &Allocation,
    r: &str,
    t: Slot,
) -> Result<i64, ModelError> {
    let ri = instance.resolve(r)?;
    let s = occupancy(instance, x, r, t)?;
    Ok(instance.vertiports()[ri].parking_cap[(t - 1) as usize] as i64 - s as i64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintViolation {
    /// The allocation does not assign exactly one menu key per aircraft.
    Assignment(String),
    /// Too many arrivals in one slot.
    Arrival {
        vertiport: String,
        slot: Slot,
        count: u64,
        capacity: u32,
    },
    /// Too many departures in one slot.
    Departure {
        vertiport: String,
        slot: Slot,
        count: u64,
        capacity: u32,
    },
    /// Parking occupancy above capacity.
    Parking {
        vertiport: String,
        slot: Slot,
        occupancy: u64,
        capacity: u32,
    },
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintViolation::Assignment(msg) => write!(f, "(C1) {msg}"),
            ConstraintViolation::Arrival {
                vertiport,
                slot,
                count,
                capacity,
            } => write!(
                f,
                "(C2) arrival at ({vertiport}, {slot}): {count} > {capacity}"
            ),
            ConstraintViolation::Departure {
                vertiport,
                slot,
                count,
                capacity,
            } => write!(
                f,
                "(C2) departure at ({vertiport}, {slot}): {count} > {capacity}"
            ),
            ConstraintViolation::Parking {
                vertiport,
                slot,
                occupancy,
                capacity,
            } => write!(
                f,
                "(C3) parking at ({vertiport}, {slot}): {occupancy} > {capacity}"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub violations: Vec<ConstraintViolation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn is_feasible(instance: &Instance, x: &Allocation) -> FeasibilityReport {
    if let Err(e) = x.check(instance) {
        return FeasibilityReport {
            violations: vec![ConstraintViolation::Assignment(e.to_string())],
        };
    }
    let table = OccupancyTable::compute(instance, x);
    let mut violations = Vec::new();
    for (r, v) in instance.vertiports().iter().enumerate() {
        for t in 0..instance.horizon() as usize {
            let slot = t as Slot + 1;
            if table.arrivals[r][t] > v.arrival_cap[t] as u64 {
                violations.push(ConstraintViolation::Arrival {
                    vertiport: v.id.clone(),
                    slot,
                    count: table.arrivals[r][t],
                    capacity: v.arrival_cap[t],
                });
            }
            if table.departures[r][t] > v.departure_cap[t] as u64 {
                violations.push(ConstraintViolation::Departure {
                    vertiport: v.id.clone(),
                    slot,
                    count: table.departures[r][t],
                    capacity: v.departure_cap[t],
                });
            }
            if table.occupancy[r][t] > v.parking_cap[t] as u64 {
                violations.push(ConstraintViolation::Parking {
                    vertiport: v.id.clone(),
                    slot,
                    occupancy: table.occupancy[r][t],
                    capacity: v.parking_cap[t],
                });
            }
        }
    }
    FeasibilityReport { violations }
}

// ---------------------------------------------------------------------------
// Welfare

/// `Σ_{r,t} g_{r,t}(S(r,t,x))`, unscaled by lambda.
pub fn congestion_total(instance: &Instance, x: &Allocation) -> Rational {
    let table = OccupancyTable::compute(instance, x);
    let mut total = Rational::zero();
    for (r, v) in instance.vertiports().iter().enumerate() {
        for (t, &s) in table.occupancy[r].iter().enumerate() {
            total += v.congestion(t as Slot + 1, s);
        }
    }
    total
}

/// Unweighted value operator `operator` derives from `x`: `Σ_{j,k} v x`.
pub fn operator_value(
    instance: &Instance,
    x: &Allocation,
    values: &ValueProfile,
    operator: usize,
) -> Rational {
    (0..instance.operators()[operator].fleet.len())
        .map(|a| {
            let at = AircraftRef {
                operator,
                aircraft: a,
            };
            values.get(at, x.key(at)).clone()
        })
        .sum()
}

/// `SW(x; V) = Σ_i ρ_i Σ_{j,k} v_{i,j,k} x_{i,j,k} - λ Σ_{r,t} g_{r,t}(S(r,t,x))`.
///
/// Defined for every canonical `x`, feasible or not. Panics if `x` or
/// `values` do not match the instance shape.
pub fn social_welfare(instance: &Instance, x: &Allocation, values: &ValueProfile) -> Rational {
    let value: Rational = instance
        .operators()
        .iter()
        .enumerate()
        .map(|(i, op)| &op.weight * operator_value(instance, x, values, i))
        .sum();
    value - instance.lambda() * congestion_total(instance, x)
}

/// Unweighted value of the granted entries minus payment.
pub fn utility(
    instance: &Instance,
    x: &Allocation,
    payment: &Rational,
    operator: &str,
    values: &ValueProfile,
) -> Result<Rational, ModelError> {
    let i = instance
        .operator_index(operator)
        .ok_or_else(|| ModelError::UnknownOperator(operator.to_string()))?;
    Ok(operator_value(instance, x, values, i) - payment)
}

/// Number of aircraft in the air at slot `t` (departed by `max(d, 2)`, not
/// yet arrived).
pub fn airborne(instance: &Instance, x: &Allocation, t: Slot) -> u64 {
    instance
        .aircraft_refs()
        .iter()
        .filter(|&&at| match &x.route(instance, at).route {
            Route::Stay => false,
            Route::Transit { depart, arrive, .. } => (*depart).max(2) <= t && t < *arrive,
        })
        .count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn port(id: &str, h: Slot, cap: u32) -> Vertiport {
        Vertiport::uniform(id, h, cap, cap, cap, |q| int(q as i64))
    }

    fn aircraft(id: &str, origin: &str, routes: Vec<RouteOption>) -> Aircraft {
        Aircraft {
            id: id.into(),
            origin: origin.into(),
            menu: routes,
        }
    }

    fn operator(id: &str, fleet: Vec<Aircraft>) -> Operator {
        Operator {
            id: id.into(),
            weight: int(1),
            fleet,
        }
    }

    fn single_mover(h: Slot, depart: Slot, arrive: Slot) -> Instance {
        Instance::new(
            h,
            int(0),
            vec![port("v1", h, 2), port("v2", h, 2)],
            vec![operator(
                "op",
                vec![aircraft(
                    "a",
                    "v1",
                    vec![RouteOption::stay(0), RouteOption::transit(1, depart, "v2", arrive)],
                )],
            )],
        )
    }

    #[test]
    fn convex_table_is_valid() {
        let mut v = port("r", 1, 2);
        v.congestion_cost = vec![vec![int(0), int(1), int(3)]];
        let inst = Instance::new(1, int(1), vec![v], vec![]);
        assert!(validate_instance(&inst).is_valid());
    }

    #[test]
    fn non_convex_table_is_reported() {
        let mut v = port("r", 1, 3);
        v.congestion_cost = vec![vec![int(0), int(2), int(3), ratio(7, 2)]];
        let inst = Instance::new(1, int(1), vec![v], vec![]);
        let report = validate_instance(&inst);
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, ValidationIssue::CongestionNotConvex { .. })));
        assert!(report.to_string().contains("congestion_cost not discrete convex"));
    }

    #[test]
    fn slack_condition_is_reported() {
        let mut v = port("r", 3, 2);
        v.parking_cap[1] = 1;
        v.congestion_cost[1] = vec![int(0), int(1)];
        let inst = Instance::new(
            3,
            int(0),
            vec![v],
            vec![
                operator("a", vec![aircraft("x", "r", vec![RouteOption::stay(0)])]),
                operator("b", vec![aircraft("y", "r", vec![RouteOption::stay(0)])]),
            ],
        );
        let report = validate_instance(&inst);
        assert_eq!(
            report.issues,
            vec![ValidationIssue::SlackCondition {
                vertiport: "r".into(),
                slot: 2,
                capacity: 1,
                initial: 2
            }]
        );
        assert!(report.to_string().contains("slack condition"));
    }

    #[test]
    fn menu_shape_is_checked() {
        let inst = Instance::new(
            2,
            int(0),
            vec![port("r", 2, 2)],
            vec![operator(
                "o",
                vec![
                    aircraft("none", "r", vec![RouteOption::transit(0, 1, "r", 2)]),
                    aircraft(
                        "gap",
                        "r",
                        vec![RouteOption::stay(0), RouteOption::transit(2, 1, "zz", 1)],
                    ),
                ],
            )],
        );
        let issues = validate_instance(&inst).issues;
        assert!(issues.iter().any(|i| matches!(i, ValidationIssue::StayCount { count: 0, .. })));
        assert!(issues.iter().any(|i| matches!(i, ValidationIssue::MenuKeys { .. })));
        assert!(issues.iter().any(|i| matches!(i, ValidationIssue::TransitTimes { .. })));
        assert!(issues.iter().any(|i| matches!(i, ValidationIssue::UnknownDestination { .. })));
    }

    #[test]
    fn initial_occupancy_counts_origins() {
        let inst = single_mover(3, 1, 2);
        assert_eq!(initial_occupancy(&inst, "v1").unwrap(), 1);
        assert_eq!(initial_occupancy(&inst, "v2").unwrap(), 0);
        assert!(initial_occupancy(&inst, "nope").is_err());

        let two = Instance::new(
            1,
            int(0),
            vec![port("r", 1, 2)],
            vec![
                operator("a", vec![aircraft("x", "r", vec![RouteOption::stay(0)])]),
                operator("b", vec![aircraft("y", "r", vec![RouteOption::stay(0)])]),
            ],
        );
        assert_eq!(initial_occupancy(&two, "r").unwrap(), 2);
    }

    #[test]
    fn slot_one_departure_leaves_from_slot_two() {
        let inst = single_mover(3, 1, 2);
        let x = Allocation::from_flat(&inst, &[1]).unwrap();
        let s1: Vec<u64> = (1..=3).map(|t| occupancy(&inst, &x, "v1", t).unwrap()).collect();
        let s2: Vec<u64> = (1..=3).map(|t| occupancy(&inst, &x, "v2", t).unwrap()).collect();
        assert_eq!(s1, vec![1, 0, 0]);
        assert_eq!(s2, vec![0, 1, 1]);
    }

    #[test]
    fn occupancy_errors() {
        let inst = single_mover(3, 1, 2);
        let x = Allocation::all_stay(&inst);
        assert!(matches!(
            occupancy(&inst, &x, "v1", 0),
            Err(ModelError::SlotOutOfRange { .. })
        ));
        assert!(matches!(
            occupancy(&inst, &x, "v1", 4),
            Err(ModelError::SlotOutOfRange { .. })
        ));
        assert!(matches!(
            occupancy(&inst, &x, "v9", 1),
            Err(ModelError::UnknownVertiport(_))
        ));
    }

    fn swap_instance(cap: u32) -> Instance {
        let ports = vec![
            Vertiport::uniform("v1", 3, 1, 1, cap, |q| int(q as i64)),
            Vertiport::uniform("v2", 3, 1, 1, cap, |q| int(q as i64)),
        ];
        Instance::new(
            3,
            int(0),
            ports,
            vec![
                operator(
                    "a",
                    vec![aircraft(
                        "x",
                        "v1",
                        vec![RouteOption::stay(0), RouteOption::transit(1, 2, "v2", 3)],
                    )],
                ),
                operator(
                    "b",
                    vec![aircraft(
                        "y",
                        "v2",
                        vec![RouteOption::stay(0), RouteOption::transit(1, 2, "v1", 3)],
                    )],
                ),
            ],
        )
    }

    #[test]
    fn simultaneous_swap_occupancy_and_feasibility() {
        let inst = swap_instance(1);
        let x = Allocation::from_flat(&inst, &[1, 1]).unwrap();
        for r in ["v1", "v2"] {
            let s: Vec<u64> = (1..=3).map(|t| occupancy(&inst, &x, r, t).unwrap()).collect();
            assert_eq!(s, vec![1, 0, 1]);
        }
        assert!(is_feasible(&inst, &x).is_feasible());
        let one_sided = Allocation::from_flat(&inst, &[1, 0]).unwrap();
        let report = is_feasible(&inst, &one_sided);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, ConstraintViolation::Parking { slot: 3, .. })));
        assert_eq!(residual_capacity(&inst, &one_sided, "v2", 3).unwrap(), -1);
    }

    #[test]
    fn residual_capacity_subtracts() {
        let inst = swap_instance(3);
        let x = Allocation::all_stay(&inst);
        assert_eq!(residual_capacity(&inst, &x, "v1", 1).unwrap(), 2);
        let tight = swap_instance(1);
        assert_eq!(residual_capacity(&tight, &Allocation::all_stay(&tight), "v1", 2).unwrap(), 0);
    }

    #[test]
    fn arrival_capacity_violation() {
        let ports = vec![
            Vertiport::uniform("a", 2, 5, 5, 5, |_| int(0)),
            Vertiport::uniform("b", 2, 1, 5, 5, |_| int(0)),
        ];
        let inst = Instance::new(
            2,
            int(0),
            ports,
            vec![operator(
                "o",
                vec![
                    aircraft("p", "a", vec![RouteOption::stay(0), RouteOption::transit(1, 1, "b", 2)]),
                    aircraft("q", "a", vec![RouteOption::stay(0), RouteOption::transit(1, 1, "b", 2)]),
                ],
            )],
        );
        let x = Allocation::from_flat(&inst, &[1, 1]).unwrap();
        let report = is_feasible(&inst, &x);
        assert_eq!(
            report.violations,
            vec![ConstraintViolation::Arrival {
                vertiport: "b".into(),
                slot: 2,
                count: 2,
                capacity: 1
            }]
        );
        assert!(report.violations[0].to_string().starts_with("(C2) arrival at (b, 2)"));
    }

    #[test]
    fn welfare_examples() {
        let empty = Instance::new(1, int(1), vec![], vec![]);
        assert_eq!(
            social_welfare(&empty, &Allocation::all_stay(&empty), &ValueProfile::zeros(&empty)),
            int(0)
        );

        let mut inst = single_mover(3, 1, 2);
        inst.operators[0].weight = int(2);
        let bids = ValueProfile::from_fn(&inst, |_, _, o| if o.is_stay() { int(0) } else { int(5) });
        let x = Allocation::from_flat(&inst, &[1]).unwrap();
        assert_eq!(social_welfare(&inst, &x, &bids), int(10));

        let stay = Instance::new(
            2,
            int(1),
            vec![Vertiport::uniform("r", 2, 1, 1, 1, |q| int(q as i64))],
            vec![operator("o", vec![aircraft("a", "r", vec![RouteOption::stay(0)])])],
        );
        assert_eq!(
            social_welfare(&stay, &Allocation::all_stay(&stay), &ValueProfile::zeros(&stay)),
            int(-2)
        );
    }

    #[test]
    fn congestion_extends_linearly() {
        let v = Vertiport::uniform("r", 1, 0, 0, 2, |q| int((q * q) as i64));
        assert_eq!(v.congestion(1, 2), int(4));
        assert_eq!(v.congestion(1, 4), int(10));
        let flat = Vertiport::uniform("z", 1, 0, 0, 0, |_| int(0));
        assert_eq!(flat.congestion(1, 3), int(0));
    }

    #[test]
    fn utility_examples() {
        let inst = single_mover(3, 1, 2);
        let zeros = ValueProfile::zeros(&inst);
        let stay = Allocation::all_stay(&inst);
        assert_eq!(utility(&inst, &stay, &int(0), "op", &zeros).unwrap(), int(0));
        let values = ValueProfile::from_fn(&inst, |_, _, o| if o.is_stay() { int(0) } else { int(7) });
        let moved = Allocation::from_flat(&inst, &[1]).unwrap();
        assert_eq!(utility(&inst, &moved, &int(3), "op", &values).unwrap(), int(4));
        assert!(utility(&inst, &moved, &int(3), "ghost", &values).is_err());
    }

    #[test]
    fn profile_shape_is_checked() {
        let inst = single_mover(3, 1, 2);
        assert!(ValueProfile::from_nested(&inst, vec![vec![vec![int(1)]]]).is_err());
        assert!(ValueProfile::from_nested(&inst, vec![vec![vec![int(1), int(-1)]]]).is_err());
        assert!(ValueProfile::from_nested(&inst, vec![vec![vec![int(1), int(2)]]]).is_ok());
    }
}

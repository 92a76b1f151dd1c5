//! Problem data, solutions, forward schedule evaluation and the feasibility
//! checker.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown customer id {0}")]
    UnknownCustomer(usize),
    #[error("route is empty")]
    EmptyRoute,
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn distance(&self, other: &Location) -> f64 {
        euclid(*self, *other)
    }
}

/// Plain Euclidean distance, no rounding.
#[inline]
pub fn euclid(a: Location, b: Location) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub earliest: f64,
    pub latest: f64,
}

impl TimeWindow {
    pub const fn new(earliest: f64, latest: f64) -> Self {
        Self { earliest, latest }
    }

    pub fn length(&self) -> f64 {
        self.latest - self.earliest
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.earliest + self.latest)
    }

    pub fn contains_window(&self, other: &TimeWindow) -> bool {
        self.earliest <= other.earliest && other.latest <= self.latest
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub id: usize,
    pub location: Location,
    pub demand: f64,
    pub service_duration: f64,
    pub window: TimeWindow,
}

/// A VRPTW instance. Depot demand and service duration are implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    name: String,
    depot: Location,
    horizon: TimeWindow,
    fleet_size: usize,
    capacity: f64,
    customers: Vec<Customer>,
    slots: HashMap<usize, usize>,
}

impl Instance {
    pub fn new(
        name: impl Into<String>,
        depot: Location,
        horizon: TimeWindow,
        fleet_size: usize,
        capacity: f64,
        customers: Vec<Customer>,
    ) -> Result<Self, ModelError> {
        let invalid = |msg: String| Err(ModelError::InvalidInstance(msg));
        if !(depot.x.is_finite() && depot.y.is_finite()) {
            return invalid("depot location is not finite".into());
        }
        if !(horizon.earliest.is_finite() && horizon.latest.is_finite())
            || horizon.earliest > horizon.latest
        {
            return invalid(format!("bad horizon [{}, {}]", horizon.earliest, horizon.latest));
        }
        if fleet_size == 0 {
            return invalid("fleet size must be positive".into());
        }
        if !(capacity.is_finite() && capacity > 0.0) {
            return invalid(format!("capacity must be positive, got {capacity}"));
        }
        let mut slots = HashMap::with_capacity(customers.len());
        for (pos, c) in customers.iter().enumerate() {
            if c.id == 0 {
                return invalid("customer id 0 is reserved for the depot".into());
            }
            if slots.insert(c.id, pos).is_some() {
                return invalid(format!("duplicate customer id {}", c.id));
            }
            let finite = [
                c.location.x,
                c.location.y,
                c.demand,
                c.service_duration,
                c.window.earliest,
                c.window.latest,
            ]
            .iter()
            .all(|v| v.is_finite());
            if !finite {
                return invalid(format!("customer {} has non-finite data", c.id));
            }
            if c.demand < 0.0 || c.service_duration < 0.0 {
                return invalid(format!("customer {} has negative demand or service", c.id));
            }
            if c.demand > capacity {
                return invalid(format!(
                    "customer {} demand {} exceeds capacity {}",
                    c.id, c.demand, capacity
                ));
            }
            if c.window.earliest > c.window.latest {
                return invalid(format!("customer {} has an inverted time window", c.id));
            }
            if !horizon.contains_window(&c.window) {
                return invalid(format!("customer {} window lies outside the horizon", c.id));
            }
        }
        Ok(Self {
            name: name.into(),
            depot,
            horizon,
            fleet_size,
            capacity,
            customers,
            slots,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn depot(&self) -> Location {
        self.depot
    }

    pub fn horizon(&self) -> TimeWindow {
        self.horizon
    }

    pub fn fleet_size(&self) -> usize {
        self.fleet_size
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn customers(&self) -> &[Customer] {
        &self.customers
    }

    pub fn len(&self) -> usize {
        self.customers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.customers.is_empty()
    }

    pub fn customer(&self, id: usize) -> Option<&Customer> {
        self.slots.get(&id).map(|&pos| &self.customers[pos])
    }

    pub fn try_customer(&self, id: usize) -> Result<&Customer, ModelError> {
        self.customer(id).ok_or(ModelError::UnknownCustomer(id))
    }

    /// Location of a node; id 0 is the depot.
    pub fn location_of(&self, id: usize) -> Result<Location, ModelError> {
        if id == 0 {
            Ok(self.depot)
        } else {
            self.try_customer(id).map(|c| c.location)
        }
    }

    /// Copy of this instance with a different name, fleet size and customer set.
    pub fn derive(
        &self,
        name: impl Into<String>,
        fleet_size: usize,
        customers: Vec<Customer>,
    ) -> Result<Self, ModelError> {
        Self::new(name, self.depot, self.horizon, fleet_size, self.capacity, customers)
    }
}

/// Ordered customer ids; the depot start and end are implicit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Route(pub Vec<usize>);

impl Route {
    pub fn new(ids: Vec<usize>) -> Self {
        Self(ids)
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<usize>> for Route {
    fn from(ids: Vec<usize>) -> Self {
        Self(ids)
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for id in &self.0 {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{id}")?;
            first = false;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Solution {
    pub routes: Vec<Route>,
}

impl Solution {
    pub fn new(routes: Vec<Route>) -> Self {
        Self { routes }
    }

    pub fn customer_count(&self) -> usize {
        self.routes.iter().map(Route::len).sum()
    }

    pub fn nonempty_route_count(&self) -> usize {
        self.routes.iter().filter(|r| !r.is_empty()).count()
    }

    pub fn drop_empty_routes(&mut self) {
        self.routes.retain(|r| !r.is_empty());
    }

    /// One line per route, space-separated customer ids.
    pub fn to_route_lines(&self) -> String {
        let mut out = String::new();
        for r in self.routes.iter().filter(|r| !r.is_empty()) {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_route_lines(text: &str) -> Result<Self, String> {
        let mut routes = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let ids = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>()
                        .map_err(|_| format!("line {}: bad customer id {tok:?}", n + 1))
                })
                .collect::<Result<Vec<_>, _>>()?;
            routes.push(Route(ids));
        }
        Ok(Self { routes })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Visit {
    pub customer_id: usize,
    pub arrival: f64,
    /// Start of service, the MIP time variable.
    pub service_start: f64,
    pub departure: f64,
    /// Load on board after this visit, the MIP cumulative-demand variable.
    pub cumulative_load: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RouteSchedule {
    pub visits: Vec<Visit>,
    pub travel_distance: f64,
    pub waiting_total: f64,
    pub service_total: f64,
    pub return_arrival: f64,
}

impl RouteSchedule {
    pub fn load(&self) -> f64 {
        self.visits.last().map_or(0.0, |v| v.cumulative_load)
    }

    pub fn duration(&self) -> f64 {
        self.travel_distance + self.waiting_total + self.service_total
    }
}

/// Forward simulation from the depot at the horizon start. Vehicles wait
/// for window openings; window closings are not enforced here.
pub fn compute_schedule(instance: &Instance, route: &Route) -> Result<RouteSchedule, ModelError> {
    let start = instance.horizon().earliest;
    let mut visits = Vec::with_capacity(route.len());
    let mut travel = 0.0;
    let mut waiting = 0.0;
    let mut service = 0.0;
    let mut load = 0.0;
    let mut here = instance.depot();
    let mut clock = start;
    for &id in route.ids() {
        let c = instance.try_customer(id)?;
        let leg = euclid(here, c.location);
        travel += leg;
        let arrival = clock + leg;
        let service_start = arrival.max(c.window.earliest);
        waiting += service_start - arrival;
        let departure = service_start + c.service_duration;
        service += c.service_duration;
        load += c.demand;
        visits.push(Visit {
            customer_id: id,
            arrival,
            service_start,
            departure,
            cumulative_load: load,
        });
        here = c.location;
        clock = departure;
    }
    let back = if visits.is_empty() {
        0.0
    } else {
        euclid(here, instance.depot())
    };
    travel += back;
    Ok(RouteSchedule {
        visits,
        travel_distance: travel,
        waiting_total: waiting,
        service_total: service,
        return_arrival: clock + back,
    })
}

pub fn compute_schedules(
    instance: &Instance,
    solution: &Solution,
) -> Result<Vec<RouteSchedule>, ModelError> {
    solution
        .routes
        .iter()
        .map(|r| compute_schedule(instance, r))
        .collect()
}

/// Total travel distance (depot to depot) over all routes.
pub fn solution_cost(instance: &Instance, solution: &Solution) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for r in &solution.routes {
        total += route_cost(instance, r.ids())?;
    }
    Ok(total)
}

/// Travel distance of a single route given as customer ids.
pub fn route_cost(instance: &Instance, ids: &[usize]) -> Result<f64, ModelError> {
    let mut here = instance.depot();
    let mut total = 0.0;
    for &id in ids {
        let loc = instance.try_customer(id)?.location;
        total += euclid(here, loc);
        here = loc;
    }
    if !ids.is_empty() {
        total += euclid(here, instance.depot());
    }
    Ok(total)
}

/// Arithmetic mean of the route's customer locations.
pub fn route_centroid(instance: &Instance, route: &Route) -> Result<Location, ModelError> {
    if route.is_empty() {
        return Err(ModelError::EmptyRoute);
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    for &id in route.ids() {
        let loc = instance.try_customer(id)?.location;
        sx += loc.x;
        sy += loc.y;
    }
    let n = route.len() as f64;
    Ok(Location::new(sx / n, sy / n))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateVisit { customer_id: usize, occurrences: usize },
    MissingCustomer { customer_id: usize },
    UnknownCustomer { route: usize, customer_id: usize },
    FleetExceeded { used: usize, fleet_size: usize },
    CapacityExceeded { route: usize, load: f64, capacity: f64 },
    TimeWindowViolated { route: usize, customer_id: usize, service_start: f64, latest: f64 },
    HorizonViolated { route: usize, return_arrival: f64, horizon_end: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    DuplicateVisit,
    MissingCustomer,
    UnknownCustomer,
    FleetExceeded,
    CapacityExceeded,
    TimeWindowViolated,
    HorizonViolated,
}

impl Violation {
    pub fn kind(&self) -> ViolationKind {
        match self {
            Violation::DuplicateVisit { .. } => ViolationKind::DuplicateVisit,
            Violation::MissingCustomer { .. } => ViolationKind::MissingCustomer,
            Violation::UnknownCustomer { .. } => ViolationKind::UnknownCustomer,
            Violation::FleetExceeded { .. } => ViolationKind::FleetExceeded,
            Violation::CapacityExceeded { .. } => ViolationKind::CapacityExceeded,
            Violation::TimeWindowViolated { .. } => ViolationKind::TimeWindowViolated,
            Violation::HorizonViolated { .. } => ViolationKind::HorizonViolated,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateVisit { customer_id, occurrences } => {
                write!(f, "customer {customer_id} visited {occurrences} times")
            }
            Violation::MissingCustomer { customer_id } => {
                write!(f, "customer {customer_id} is not visited")
            }
            Violation::UnknownCustomer { route, customer_id } => {
                write!(f, "route {route} visits unknown customer {customer_id}")
            }
            Violation::FleetExceeded { used, fleet_size } => {
                write!(f, "{used} vehicles used, fleet has {fleet_size}")
            }
            Violation::CapacityExceeded { route, load, capacity } => {
                write!(f, "route {route} carries {load} > capacity {capacity}")
            }
            Violation::TimeWindowViolated { route, customer_id, service_start, latest } => write!(
                f,
                "route {route}: service at customer {customer_id} starts at {service_start} > {latest}"
            ),
            Violation::HorizonViolated { route, return_arrival, horizon_end } => write!(
                f,
                "route {route} returns at {return_arrival} > horizon end {horizon_end}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind() == kind).count()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.count(kind) > 0
    }
}

/// Lists every violated constraint; an empty report means feasible.
pub fn check_feasibility(instance: &Instance, solution: &Solution) -> FeasibilityReport {
    let mut violations = Vec::new();
    let mut seen: HashMap<usize, usize> = HashMap::new();
    for (ri, route) in solution.routes.iter().enumerate() {
        for &id in route.ids() {
            if instance.customer(id).is_none() {
                violations.push(Violation::UnknownCustomer { route: ri, customer_id: id });
            } else {
                *seen.entry(id).or_default() += 1;
            }
        }
    }
    for c in instance.customers() {
        match seen.get(&c.id).copied().unwrap_or(0) {
            0 => violations.push(Violation::MissingCustomer { customer_id: c.id }),
            1 => {}
            k => violations.push(Violation::DuplicateVisit { customer_id: c.id, occurrences: k }),
        }
    }
    let used = solution.nonempty_route_count();
    if used > instance.fleet_size() {
        violations.push(Violation::FleetExceeded { used, fleet_size: instance.fleet_size() });
    }
    let horizon_end = instance.horizon().latest;
    for (ri, route) in solution.routes.iter().enumerate() {
        let known: Vec<usize> = route
            .ids()
            .iter()
            .copied()
            .filter(|id| instance.customer(*id).is_some())
            .collect();
        let Ok(schedule) = compute_schedule(instance, &Route(known)) else {
            continue;
        };
        let load = schedule.load();
        if load > instance.capacity() {
            violations.push(Violation::CapacityExceeded {
                route: ri,
                load,
                capacity: instance.capacity(),
            });
        }
        for v in &schedule.visits {
            let latest = instance.customer(v.customer_id).map_or(f64::INFINITY, |c| c.window.latest);
            if v.service_start > latest {
                violations.push(Violation::TimeWindowViolated {
                    route: ri,
                    customer_id: v.customer_id,
                    service_start: v.service_start,
                    latest,
                });
            }
        }
        if schedule.return_arrival > horizon_end {
            violations.push(Violation::HorizonViolated {
                route: ri,
                return_arrival: schedule.return_arrival,
                horizon_end,
            });
        }
    }
    FeasibilityReport { violations }
}

/// Whether a single route respects capacity, windows and the horizon.
pub fn route_is_feasible(instance: &Instance, ids: &[usize]) -> bool {
    let horizon = instance.horizon();
    let mut here = instance.depot();
    let mut clock = horizon.earliest;
    let mut load = 0.0;
    for &id in ids {
        let Some(c) = instance.customer(id) else {
            return false;
        };
        load += c.demand;
        if load > instance.capacity() {
            return false;
        }
        let start = (clock + euclid(here, c.location)).max(c.window.earliest);
        if start > c.window.latest {
            return false;
        }
        clock = start + c.service_duration;
        here = c.location;
    }
    ids.is_empty() || clock + euclid(here, instance.depot()) <= horizon.latest
}

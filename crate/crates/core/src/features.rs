//! Hand-crafted features describing the improvement potential of a
//! neighborhood: per-customer and per-route properties aggregated five ways,
//! plus the pairwise route distances inside the neighborhood.

use thiserror::Error;

use crate::model::{euclid, Customer, Instance, Location, ModelError, Route, RouteSchedule};
use crate::neighborhood::{context_route_distance, Neighborhood, NeighborhoodError, SelectorConfig, SolutionContext};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("customer {0} is not on a neighborhood route")]
    NotInNeighborhood(usize),
    #[error("route {0} is empty")]
    EmptyRoute(usize),
    #[error("cannot aggregate an empty sequence")]
    EmptySequence,
    #[error("neighborhood has {actual} routes, expected {expected}")]
    WrongSize { actual: usize, expected: usize },
    #[error(transparent)]
    Neighborhood(#[from] NeighborhoodError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub const CUSTOMER_PROPERTY_NAMES: [&str; 11] = [
    "waiting_time",
    "closeness",
    "temporal_closeness",
    "centroid_closeness",
    "distance_contribution",
    "tw_length",
    "depot_distance",
    "load",
    "min_greedy_addition_cost",
    "max_gain",
    "possible_delay",
];

pub const ROUTE_PROPERTY_NAMES: [&str; 10] = [
    "route_distance",
    "avg_route_distance",
    "empty_distance",
    "worst_case_fraction",
    "route_duration",
    "avg_route_duration",
    "idle_time",
    "free_capacity",
    "fitting_candidates",
    "expected_fitting_candidates",
];

pub const AGGREGATE_NAMES: [&str; 5] = ["avg", "max", "min", "sum", "std"];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CustomerProperties {
    pub waiting_time: f64,
    pub closeness: f64,
    pub temporal_closeness: f64,
    pub centroid_closeness: f64,
    pub distance_contribution: f64,
    pub tw_length: f64,
    pub depot_distance: f64,
    pub load: f64,
    pub min_greedy_addition_cost: f64,
    pub max_gain: f64,
    pub possible_delay: f64,
}

impl CustomerProperties {
    pub fn values(&self) -> [f64; 11] {
        [
            self.waiting_time,
            self.closeness,
            self.temporal_closeness,
            self.centroid_closeness,
            self.distance_contribution,
            self.tw_length,
            self.depot_distance,
            self.load,
            self.min_greedy_addition_cost,
            self.max_gain,
            self.possible_delay,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RouteProperties {
    pub route_distance: f64,
    pub avg_route_distance: f64,
    pub empty_distance: f64,
    pub worst_case_fraction: f64,
    pub route_duration: f64,
    pub avg_route_duration: f64,
    pub idle_time: f64,
    pub free_capacity: f64,
    pub fitting_candidates: f64,
    pub expected_fitting_candidates: f64,
}

impl RouteProperties {
    pub fn values(&self) -> [f64; 10] {
        [
            self.route_distance,
            self.avg_route_distance,
            self.empty_distance,
            self.worst_case_fraction,
            self.route_duration,
            self.avg_route_duration,
            self.idle_time,
            self.free_capacity,
            self.fitting_candidates,
            self.expected_fitting_candidates,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub avg: f64,
    pub max: f64,
    pub min: f64,
    pub sum: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Aggregate {
    pub fn values(&self) -> [f64; 5] {
        [self.avg, self.max, self.min, self.sum, self.std]
    }
}

pub fn aggregate(values: &[f64]) -> Result<Aggregate, FeatureError> {
    if values.is_empty() {
        return Err(FeatureError::EmptySequence);
    }
    let n = values.len() as f64;
    let sum: f64 = values.iter().sum();
    let avg = sum / n;
    let var = values.iter().map(|v| (v - avg) * (v - avg)).sum::<f64>() / n;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    // keep min <= avg <= max under rounding
    Ok(Aggregate { avg: avg.clamp(min, max), max, min, sum, std: var.sqrt() })
}

/// Least waiting caused by serving `a` and `b` back to back, in either
/// order, with service at the first one starting at its window opening.
/// `penalty` when neither order is feasible.
pub fn time_window_difference(a: &Customer, b: &Customer, penalty: f64) -> f64 {
    let one_way = |x: &Customer, y: &Customer| {
        let arrival = x.window.earliest + x.service_duration + euclid(x.location, y.location);
        (arrival <= y.window.latest).then(|| (y.window.earliest - arrival).max(0.0))
    };
    match (one_way(a, b), one_way(b, a)) {
        (Some(x), Some(y)) => x.min(y),
        (Some(x), None) | (None, Some(x)) => x,
        (None, None) => penalty,
    }
}

fn min_or_zero(it: impl Iterator<Item = f64>) -> f64 {
    let m = it.fold(f64::INFINITY, f64::min);
    if m.is_finite() {
        m
    } else {
        0.0
    }
}

/// Neighborhood data shared by all property computations.
struct View<'a> {
    instance: &'a Instance,
    ctx: &'a SolutionContext,
    members: &'a [usize],
    customers: Vec<Vec<&'a Customer>>,
}

impl<'a> View<'a> {
    fn new(instance: &'a Instance, ctx: &'a SolutionContext, nb: &'a Neighborhood) -> Result<Self, FeatureError> {
        let mut customers = Vec::with_capacity(nb.len());
        for &r in &nb.ordered_members {
            let route = ctx.solution.routes.get(r).ok_or(FeatureError::EmptyRoute(r))?;
            if route.is_empty() {
                return Err(FeatureError::EmptyRoute(r));
            }
            customers.push(route.ids().iter().map(|&id| instance.try_customer(id)).collect::<Result<Vec<_>, _>>()?);
        }
        Ok(Self { instance, ctx, members: &nb.ordered_members, customers })
    }

    fn route(&self, slot: usize) -> &Route {
        self.ctx.route(self.members[slot])
    }

    fn schedule(&self, slot: usize) -> &RouteSchedule {
        &self.ctx.schedules[self.members[slot]]
    }

    fn centroid(&self, slot: usize) -> Location {
        self.ctx.centroids[self.members[slot]].expect("neighborhood routes are nonempty")
    }

    fn others(&self, slot: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.members.len()).filter(move |&s| s != slot)
    }

    fn locate(&self, id: usize) -> Option<(usize, usize)> {
        self.customers
            .iter()
            .enumerate()
            .find_map(|(s, cs)| cs.iter().position(|c| c.id == id).map(|p| (s, p)))
    }

    fn neighbour_locations(&self, slot: usize, pos: usize) -> (Location, Location) {
        let cs = &self.customers[slot];
        let depot = self.instance.depot();
        let prev = if pos == 0 { depot } else { cs[pos - 1].location };
        let next = cs.get(pos + 1).map_or(depot, |c| c.location);
        (prev, next)
    }

    /// Cost of inserting `c` into route `slot` just before the first
    /// customer whose window opens later than that of `c`.
    fn greedy_addition_cost(&self, c: &Customer, slot: usize) -> f64 {
        let cs = &self.customers[slot];
        let depot = self.instance.depot();
        let pos = cs.iter().position(|o| o.window.earliest > c.window.earliest).unwrap_or(cs.len());
        let prev = if pos == 0 { depot } else { cs[pos - 1].location };
        let next = cs.get(pos).map_or(depot, |o| o.location);
        euclid(prev, c.location) + euclid(c.location, next) - euclid(prev, next)
    }

    fn customer(&self, slot: usize, pos: usize, config: &SelectorConfig) -> CustomerProperties {
        let c = self.customers[slot][pos];
        let visit = &self.schedule(slot).visits[pos];
        let others_customers = || self.others(slot).flat_map(|s| self.customers[s].iter().copied());
        let closeness = min_or_zero(others_customers().map(|o| euclid(c.location, o.location)));
        let temporal_closeness = min_or_zero(
            others_customers()
                .map(|o| euclid(c.location, o.location) + time_window_difference(c, o, config.twd_penalty)),
        );
        let centroid_closeness = min_or_zero(self.others(slot).map(|s| euclid(c.location, self.centroid(s))));
        let (prev, next) = self.neighbour_locations(slot, pos);
        let distance_contribution = euclid(prev, c.location) + euclid(c.location, next) - euclid(prev, next);
        let min_greedy = min_or_zero(self.others(slot).map(|s| self.greedy_addition_cost(c, s)));
        CustomerProperties {
            waiting_time: visit.service_start - visit.arrival,
            closeness,
            temporal_closeness,
            centroid_closeness,
            distance_contribution,
            tw_length: c.window.length(),
            depot_distance: euclid(c.location, self.instance.depot()),
            load: c.demand,
            min_greedy_addition_cost: min_greedy,
            max_gain: distance_contribution - min_greedy,
            possible_delay: c.window.latest - visit.arrival,
        }
    }

    fn route_props(&self, slot: usize) -> RouteProperties {
        let cs = &self.customers[slot];
        let schedule = self.schedule(slot);
        let depot = self.instance.depot();
        let n = cs.len() as f64;
        let worst: f64 = cs.iter().map(|c| 2.0 * euclid(depot, c.location)).sum();
        let last = cs.last().expect("nonempty route").location;
        let free = self.instance.capacity() - cs.iter().map(|c| c.demand).sum::<f64>();
        let other_demands: Vec<f64> =
            self.others(slot).flat_map(|s| self.customers[s].iter().map(|c| c.demand)).collect();
        let fitting = other_demands.iter().filter(|&&d| d < free).count() as f64;
        let mean_demand = if other_demands.is_empty() {
            0.0
        } else {
            other_demands.iter().sum::<f64>() / other_demands.len() as f64
        };
        let duration = schedule.duration();
        RouteProperties {
            route_distance: schedule.travel_distance,
            avg_route_distance: schedule.travel_distance / n,
            empty_distance: euclid(last, depot),
            worst_case_fraction: if worst > 0.0 { schedule.travel_distance / worst } else { 0.0 },
            route_duration: duration,
            avg_route_duration: duration / n,
            idle_time: schedule.waiting_total,
            free_capacity: free,
            fitting_candidates: fitting,
            expected_fitting_candidates: if mean_demand > 0.0 { free / mean_demand } else { 0.0 },
        }
    }
}

pub fn customer_properties(
    instance: &Instance,
    ctx: &SolutionContext,
    neighborhood: &Neighborhood,
    customer_id: usize,
    config: &SelectorConfig,
) -> Result<CustomerProperties, FeatureError> {
    let view = View::new(instance, ctx, neighborhood)?;
    let (slot, pos) = view.locate(customer_id).ok_or(FeatureError::NotInNeighborhood(customer_id))?;
    Ok(view.customer(slot, pos, config))
}

/// Properties of route `route` (an index into the solution), which must
/// belong to the neighborhood.
pub fn route_properties(
    instance: &Instance,
    ctx: &SolutionContext,
    neighborhood: &Neighborhood,
    route: usize,
) -> Result<RouteProperties, FeatureError> {
    let view = View::new(instance, ctx, neighborhood)?;
    let slot = neighborhood
        .ordered_members
        .iter()
        .position(|&r| r == route)
        .ok_or(FeatureError::EmptyRoute(route))?;
    debug_assert!(!view.route(slot).is_empty());
    Ok(view.route_props(slot))
}

pub fn feature_len(config: &SelectorConfig) -> usize {
    let k = config.neighborhood_size();
    1 + CUSTOMER_PROPERTY_NAMES.len() * 5 + ROUTE_PROPERTY_NAMES.len() * 5 + k * (k - 1)
}

/// Column names in feature-vector order.
pub fn feature_names(config: &SelectorConfig) -> Vec<String> {
    let mut names = vec!["customer_count".to_string()];
    for prop in CUSTOMER_PROPERTY_NAMES.iter().chain(ROUTE_PROPERTY_NAMES.iter()) {
        names.extend(AGGREGATE_NAMES.iter().map(|a| format!("{prop}_{a}")));
    }
    let k = config.neighborhood_size();
    for i in 0..k {
        for j in (0..k).filter(|&j| j != i) {
            names.push(format!("dtilde_{i}_{j}"));
        }
    }
    names
}

pub fn extract_features(
    instance: &Instance,
    ctx: &SolutionContext,
    neighborhood: &Neighborhood,
    config: &SelectorConfig,
) -> Result<Vec<f64>, FeatureError> {
    let k = config.neighborhood_size();
    if neighborhood.len() != k {
        return Err(FeatureError::WrongSize { actual: neighborhood.len(), expected: k });
    }
    let view = View::new(instance, ctx, neighborhood)?;
    let mut out = Vec::with_capacity(feature_len(config));

    let customer_rows: Vec<[f64; 11]> = (0..k)
        .flat_map(|s| (0..view.customers[s].len()).map(move |p| (s, p)))
        .map(|(s, p)| view.customer(s, p, config).values())
        .collect();
    out.push(customer_rows.len() as f64);
    for f in 0..CUSTOMER_PROPERTY_NAMES.len() {
        let column: Vec<f64> = customer_rows.iter().map(|row| row[f]).collect();
        out.extend(aggregate(&column)?.values());
    }
    let route_rows: Vec<[f64; 10]> = (0..k).map(|s| view.route_props(s).values()).collect();
    for f in 0..ROUTE_PROPERTY_NAMES.len() {
        let column: Vec<f64> = route_rows.iter().map(|row| row[f]).collect();
        out.extend(aggregate(&column)?.values());
    }
    for &a in &neighborhood.ordered_members {
        for &b in neighborhood.ordered_members.iter().filter(|&&b| b != a) {
            out.push(context_route_distance(instance, ctx, a, b, config)?);
        }
    }
    Ok(out)
}

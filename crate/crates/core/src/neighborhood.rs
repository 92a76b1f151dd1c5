//! Route-based neighborhoods: an anchor route plus companion routes drawn
//! with rank-based probabilities over a time-window-aware route distance.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    compute_schedule, euclid, route_centroid, Customer, Instance, Location, ModelError, Route,
    RouteSchedule, Solution,
};
use crate::rng::Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeighborhoodError {
    #[error("need at least {required} nonempty routes, solution has {available}")]
    TooFewRoutes { available: usize, required: usize },
    #[error("rank-based probabilities need at least 2 ranks, got {0}")]
    DegenerateCount(usize),
    #[error("route is empty")]
    EmptyRoute,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectorConfig {
    /// Companion routes added to the anchor.
    pub n2: usize,
    /// Exponent of the rank-based probabilities.
    pub rbp_exponent: f64,
    /// A window is tight when its length is at most this fraction of the horizon.
    pub tight_fraction: f64,
    /// Time-window difference assigned to customer pairs that cannot be
    /// served back to back in either order.
    pub twd_penalty: f64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self { n2: 4, rbp_exponent: 4.0, tight_fraction: 0.05, twd_penalty: 10_000.0 }
    }
}

impl SelectorConfig {
    pub fn neighborhood_size(&self) -> usize {
        self.n2 + 1
    }
}

/// Schedules and centroids of every route, computed once per solution.
#[derive(Debug, Clone)]
pub struct SolutionContext {
    pub solution: Solution,
    pub schedules: Vec<RouteSchedule>,
    pub centroids: Vec<Option<Location>>,
    pub cost: f64,
}

impl SolutionContext {
    pub fn new(instance: &Instance, solution: Solution) -> Result<Self, ModelError> {
        let schedules = solution
            .routes
            .iter()
            .map(|r| compute_schedule(instance, r))
            .collect::<Result<Vec<_>, _>>()?;
        let centroids = solution
            .routes
            .iter()
            .map(|r| if r.is_empty() { Ok(None) } else { route_centroid(instance, r).map(Some) })
            .collect::<Result<Vec<_>, _>>()?;
        let cost = schedules.iter().map(|s| s.travel_distance).sum();
        Ok(Self { solution, schedules, centroids, cost })
    }

    pub fn route(&self, index: usize) -> &Route {
        &self.solution.routes[index]
    }

    pub fn nonempty_routes(&self) -> Vec<usize> {
        (0..self.solution.routes.len())
            .filter(|&i| !self.solution.routes[i].is_empty())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub anchor: usize,
    /// Anchor first, then the sampled routes in ascending distance rank.
    pub ordered_members: Vec<usize>,
}

impl Neighborhood {
    pub fn members(&self) -> Vec<usize> {
        let mut m = self.ordered_members.clone();
        m.sort_unstable();
        m
    }

    pub fn len(&self) -> usize {
        self.ordered_members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordered_members.is_empty()
    }

    pub fn contains(&self, route: usize) -> bool {
        self.ordered_members.contains(&route)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Successor {
    /// Position within the route.
    Visit(usize),
    EndingDepot,
}

/// First visit whose arrival is strictly later than `midpoint`.
pub fn successor_node(schedule: &RouteSchedule, midpoint: f64) -> Successor {
    schedule
        .visits
        .iter()
        .position(|v| v.arrival > midpoint)
        .map_or(Successor::EndingDepot, Successor::Visit)
}

pub fn is_tight(instance: &Instance, c: &Customer, config: &SelectorConfig) -> bool {
    c.window.length() <= config.tight_fraction * instance.horizon().length()
}

/// Distance from a customer to a route: to its predicted successor when the
/// customer's window is tight, to the route centroid otherwise.
pub fn point_route_distance(
    instance: &Instance,
    u: &Customer,
    route: &Route,
    schedule: &RouteSchedule,
    config: &SelectorConfig,
) -> Result<f64, NeighborhoodError> {
    if route.is_empty() {
        return Err(NeighborhoodError::EmptyRoute);
    }
    let centroid = route_centroid(instance, route)?;
    point_distance_with(instance, u, route, schedule, centroid, config)
}

fn point_distance_with(
    instance: &Instance,
    u: &Customer,
    route: &Route,
    schedule: &RouteSchedule,
    centroid: Location,
    config: &SelectorConfig,
) -> Result<f64, NeighborhoodError> {
    if !is_tight(instance, u, config) {
        return Ok(euclid(u.location, centroid));
    }
    let target = match successor_node(schedule, u.window.midpoint()) {
        Successor::Visit(pos) => instance.location_of(route.ids()[pos])?,
        Successor::EndingDepot => instance.depot(),
    };
    Ok(euclid(u.location, target))
}

/// `min` over customers `u` of `from` of the point-to-route distance to `to`.
pub fn route_distance(
    instance: &Instance,
    from: &Route,
    to: &Route,
    to_schedule: &RouteSchedule,
    config: &SelectorConfig,
) -> Result<f64, NeighborhoodError> {
    if from.is_empty() || to.is_empty() {
        return Err(NeighborhoodError::EmptyRoute);
    }
    let centroid = route_centroid(instance, to)?;
    route_distance_with(instance, from, to, to_schedule, centroid, config)
}

fn route_distance_with(
    instance: &Instance,
    from: &Route,
    to: &Route,
    to_schedule: &RouteSchedule,
    to_centroid: Location,
    config: &SelectorConfig,
) -> Result<f64, NeighborhoodError> {
    let mut best = f64::INFINITY;
    for &id in from.ids() {
        let u = instance.try_customer(id)?;
        best = best.min(point_distance_with(instance, u, to, to_schedule, to_centroid, config)?);
    }
    Ok(best)
}

/// Route distance between two routes of a solution context.
pub fn context_route_distance(
    instance: &Instance,
    ctx: &SolutionContext,
    from: usize,
    to: usize,
    config: &SelectorConfig,
) -> Result<f64, NeighborhoodError> {
    let centroid = ctx.centroids[to].ok_or(NeighborhoodError::EmptyRoute)?;
    if ctx.route(from).is_empty() {
        return Err(NeighborhoodError::EmptyRoute);
    }
    route_distance_with(instance, ctx.route(from), ctx.route(to), &ctx.schedules[to], centroid, config)
}

/// `p_i ∝ (count - i)^D` for ranks `i = 1..=count`.
pub fn rbp_probabilities(count: usize, exponent: f64) -> Result<Vec<f64>, NeighborhoodError> {
    if count < 2 {
        return Err(NeighborhoodError::DegenerateCount(count));
    }
    let raw: Vec<f64> = (1..=count).map(|i| ((count - i) as f64).powf(exponent)).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Draws `k` distinct ranks, renormalizing over the remaining ranks after
/// each draw. Zero-mass ranks are only taken once no positive mass is left.
pub fn sample_ranks(weights: &[f64], k: usize, rng: &mut Rng) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..weights.len()).collect();
    let mut picked = Vec::with_capacity(k);
    while picked.len() < k && !remaining.is_empty() {
        let total: f64 = remaining.iter().map(|&i| weights[i]).sum();
        let slot = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (slot, &i) in remaining.iter().enumerate() {
                if weights[i] <= 0.0 {
                    continue;
                }
                acc += weights[i];
                chosen = Some(slot);
                if target < acc {
                    break;
                }
            }
            chosen.expect("positive mass has a positive entry")
        } else {
            0
        };
        picked.push(remaining.remove(slot));
    }
    picked
}

pub fn create_neighborhood(
    instance: &Instance,
    ctx: &SolutionContext,
    config: &SelectorConfig,
    rng: &mut Rng,
) -> Result<Neighborhood, NeighborhoodError> {
    let nonempty = ctx.nonempty_routes();
    let required = config.n2 + 1;
    if nonempty.len() < required {
        return Err(NeighborhoodError::TooFewRoutes { available: nonempty.len(), required });
    }
    let anchor = nonempty[rng.random_range(0..nonempty.len())];
    let mut others = Vec::with_capacity(nonempty.len() - 1);
    for &r in nonempty.iter().filter(|&&r| r != anchor) {
        others.push((context_route_distance(instance, ctx, anchor, r, config)?, r));
    }
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let weights = if others.len() >= 2 {
        rbp_probabilities(others.len(), config.rbp_exponent)?
    } else {
        vec![1.0; others.len()]
    };
    let mut ranks = sample_ranks(&weights, config.n2, rng);
    ranks.sort_unstable();
    let mut ordered_members = Vec::with_capacity(required);
    ordered_members.push(anchor);
    ordered_members.extend(ranks.into_iter().map(|k| others[k].1));
    Ok(Neighborhood { anchor, ordered_members })
}

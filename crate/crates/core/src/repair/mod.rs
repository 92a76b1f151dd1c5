//! Repair of a destroyed neighborhood as a VRPTW sub-problem in its own
//! right, warm-started from the routes that were destroyed.

mod external;
mod insertion;
mod local_search;

use std::time::Duration;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use external::{decode_response, encode_request, external_repair, WARM_START_MARKER};
pub use insertion::{regret_insert, sequential_insert};
pub use local_search::{local_search, MoveSet};

use crate::model::{check_feasibility, route_cost, Instance, ModelError, Route, Solution};
use crate::neighborhood::Neighborhood;
use crate::rng::Rng;

/// A candidate must beat the warm start by more than this to replace it.
pub const MIN_IMPROVEMENT: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RepairError {
    #[error("warm start is infeasible for the sub-problem: {0}")]
    WarmStartInfeasible(String),
    #[error("external solver failed: {0}")]
    ExternalFailure(String),
    #[error("could not build a feasible solution with {fleet} vehicles")]
    ConstructionFailed { fleet: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepairConfig {
    pub regret_k: usize,
    pub moves: MoveSet,
    /// Upper bound on local-search sweeps per round.
    pub max_passes: usize,
    /// Ruin-and-recreate rounds; each starts from the best plan so far.
    pub rounds: usize,
    /// Upper bound on the share of sub-problem customers removed by a ruin step.
    pub ruin_fraction: f64,
    /// Relative slack for accepting a worse intermediate plan; shrinks to 0
    /// over the rounds.
    pub acceptance_tolerance: f64,
    pub external_command: Option<String>,
    pub external_timeout_secs: u64,
}

impl Default for RepairConfig {
    fn default() -> Self {
        Self {
            regret_k: 2,
            moves: MoveSet::default(),
            max_passes: 50,
            rounds: 16,
            ruin_fraction: 1.0,
            acceptance_tolerance: 0.1,
            external_command: None,
            external_timeout_secs: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubProblem {
    /// Parent depot, horizon and capacity; only the neighborhood customers;
    /// one vehicle per destroyed route.
    pub instance: Instance,
    /// Indices of the destroyed routes in the parent solution.
    pub route_indices: Vec<usize>,
}

pub fn extract_subproblem(
    instance: &Instance,
    solution: &Solution,
    neighborhood: &Neighborhood,
) -> Result<(SubProblem, Vec<Route>), ModelError> {
    let mut customers = Vec::new();
    let mut warm = Vec::with_capacity(neighborhood.len());
    for &r in &neighborhood.ordered_members {
        let route = &solution.routes[r];
        for &id in route.ids() {
            customers.push(instance.try_customer(id)?.clone());
        }
        warm.push(route.clone());
    }
    let sub = instance.derive(format!("{}-sub", instance.name()), neighborhood.len().max(1), customers)?;
    Ok((SubProblem { instance: sub, route_indices: neighborhood.ordered_members.clone() }, warm))
}

pub fn improvement(cost_before: f64, cost_after: f64) -> f64 {
    (cost_before - cost_after).max(0.0)
}

fn plan_cost(instance: &Instance, routes: &[Vec<usize>]) -> f64 {
    routes.iter().map(|r| route_cost(instance, r).expect("known ids")).sum()
}

/// Built-in ruin-and-recreate repair. Never returns a plan that costs more
/// than the warm start.
pub fn repair(
    sub: &SubProblem,
    warm_start: &[Route],
    config: &RepairConfig,
    rng: &mut Rng,
) -> Result<Vec<Route>, RepairError> {
    let inst = &sub.instance;
    let report = check_feasibility(inst, &Solution::new(warm_start.to_vec()));
    if !report.is_feasible() {
        let first = report.violations.first().map(ToString::to_string).unwrap_or_default();
        return Err(RepairError::WarmStartInfeasible(first));
    }
    let fleet = inst.fleet_size().max(warm_start.len());
    let mut best: Vec<Vec<usize>> = warm_start.iter().map(|r| r.0.clone()).collect();
    best.resize(fleet, Vec::new());
    let warm_cost = plan_cost(inst, &best);
    let mut best_cost = warm_cost;

    let n = inst.len();
    let ruin_count = if n == 0 { 0 } else { ((config.ruin_fraction * n as f64).round() as usize).clamp(1, n) };
    let mut current = best.clone();
    let mut current_cost = best_cost;
    for round in 0..config.rounds {
        let mut plan = current.clone();
        let all: Vec<usize> = plan.iter().flatten().copied().collect();
        let count = if round == 0 { all.len() } else { rng.random_range(1..=ruin_count.max(1)).min(all.len()) };
        let removed: Vec<usize> = index::sample(rng, all.len(), count)
            .into_iter()
            .map(|i| all[i])
            .collect();
        for r in plan.iter_mut() {
            r.retain(|id| !removed.contains(id));
        }
        // odd rounds diversify with a shuffled greedy reinsertion
        let inserted = if round % 2 == 1 {
            let mut order = removed.clone();
            order.shuffle(rng);
            sequential_insert(inst, &mut plan, &order)
        } else {
            regret_insert(inst, &mut plan, &removed, config.regret_k)
        };
        if !inserted {
            continue;
        }
        local_search(inst, &mut plan, config.moves, config.max_passes);
        let cost = plan_cost(inst, &plan);
        // record-to-record acceptance with a linearly shrinking tolerance
        let tolerance = config.acceptance_tolerance * (1.0 - (round + 1) as f64 / config.rounds as f64);
        if cost < current_cost * (1.0 + tolerance) - MIN_IMPROVEMENT {
            current = plan.clone();
            current_cost = cost;
        }
        if cost < best_cost - MIN_IMPROVEMENT {
            best = plan;
            best_cost = cost;
        }
    }
    if best_cost < warm_cost - MIN_IMPROVEMENT {
        Ok(best.into_iter().map(Route).collect())
    } else {
        Ok(warm_start.to_vec())
    }
}

/// Dispatches to the external command when one is configured.
pub fn repair_with_config(
    sub: &SubProblem,
    warm_start: &[Route],
    config: &RepairConfig,
    rng: &mut Rng,
) -> Result<Vec<Route>, RepairError> {
    match &config.external_command {
        Some(cmd) => external_repair(sub, warm_start, cmd, Duration::from_secs(config.external_timeout_secs)),
        None => repair(sub, warm_start, config, rng),
    }
}

/// Replaces the neighborhood routes by the repaired ones and drops routes
/// that became empty.
pub fn apply_repair(solution: &Solution, sub: &SubProblem, repaired: &[Route]) -> Solution {
    let mut routes = solution.routes.clone();
    let mut slots = sub.route_indices.clone();
    slots.sort_unstable();
    let mut fresh = repaired.iter().filter(|r| !r.is_empty());
    for &s in &slots {
        routes[s] = fresh.next().cloned().unwrap_or_default();
    }
    routes.extend(fresh.cloned());
    let mut out = Solution::new(routes);
    out.drop_empty_routes();
    out
}

/// Initial solution: regret insertion of every customer into an empty fleet.
pub fn construct_initial(instance: &Instance, config: &RepairConfig) -> Result<Solution, RepairError> {
    let mut routes = vec![Vec::new(); instance.fleet_size()];
    let ids: Vec<usize> = instance.customers().iter().map(|c| c.id).collect();
    if !regret_insert(instance, &mut routes, &ids, config.regret_k) {
        return Err(RepairError::ConstructionFailed { fleet: instance.fleet_size() });
    }
    let mut sol = Solution::new(routes.into_iter().map(Route).collect());
    sol.drop_empty_routes();
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{customer, instance};
    use crate::model::solution_cost;
    use crate::rng::rng_from;

    fn two_singletons() -> (Instance, Solution) {
        let inst = instance(
            vec![customer(1, 0.0, 5.0, 1.0, 0.0, 100.0, 0.0), customer(2, 0.0, 6.0, 1.0, 0.0, 100.0, 0.0)],
            2,
            10.0,
            100.0,
        );
        (inst, Solution::new(vec![Route(vec![1]), Route(vec![2])]))
    }

    #[test]
    fn extraction_counts_and_partition() {
        let (inst, sol) = two_singletons();
        let nb = Neighborhood { anchor: 1, ordered_members: vec![1, 0] };
        let (sub, warm) = extract_subproblem(&inst, &sol, &nb).unwrap();
        assert_eq!(sub.instance.fleet_size(), 2);
        assert_eq!(sub.instance.len(), 2);
        assert_eq!(warm, vec![Route(vec![2]), Route(vec![1])]);
        let single = Neighborhood { anchor: 0, ordered_members: vec![0] };
        let (sub, _) = extract_subproblem(&inst, &sol, &single).unwrap();
        assert_eq!(sub.instance.fleet_size(), 1);
        assert!(sub.instance.customer(2).is_none());
    }

    #[test]
    fn merges_two_singletons() {
        let (inst, sol) = two_singletons();
        let nb = Neighborhood { anchor: 0, ordered_members: vec![0, 1] };
        let (sub, warm) = extract_subproblem(&inst, &sol, &nb).unwrap();
        let routes = repair(&sub, &warm, &RepairConfig::default(), &mut rng_from(1, &[])).unwrap();
        let after = solution_cost(&sub.instance, &Solution::new(routes.clone())).unwrap();
        assert_eq!(after, 12.0);
        assert_eq!(improvement(22.0, after), 10.0);
        let merged = apply_repair(&sol, &sub, &routes);
        assert_eq!(merged.routes.len(), 1);
        assert!(check_feasibility(&inst, &merged).is_feasible());
    }

    #[test]
    fn optimal_singleton_unchanged() {
        let (inst, sol) = two_singletons();
        let nb = Neighborhood { anchor: 0, ordered_members: vec![0] };
        let (sub, warm) = extract_subproblem(&inst, &sol, &nb).unwrap();
        let routes = repair(&sub, &warm, &RepairConfig::default(), &mut rng_from(3, &[])).unwrap();
        assert_eq!(routes, warm);
    }

    #[test]
    fn infeasible_warm_start_is_rejected() {
        let inst = instance(
            vec![customer(1, 0.0, 5.0, 6.0, 0.0, 100.0, 0.0), customer(2, 0.0, 6.0, 6.0, 0.0, 100.0, 0.0)],
            1,
            10.0,
            100.0,
        );
        let sol = Solution::new(vec![Route(vec![1, 2])]);
        let nb = Neighborhood { anchor: 0, ordered_members: vec![0] };
        let (sub, warm) = extract_subproblem(&inst, &sol, &nb).unwrap();
        assert!(matches!(
            repair(&sub, &warm, &RepairConfig::default(), &mut rng_from(0, &[])),
            Err(RepairError::WarmStartInfeasible(_))
        ));
    }

    #[test]
    fn improvement_clamps() {
        assert_eq!(improvement(22.0, 12.0), 10.0);
        assert_eq!(improvement(10.0, 10.0), 0.0);
        assert_eq!(improvement(10.0, 11.0), 0.0);
    }

    #[test]
    fn repair_is_deterministic() {
        let inst = instance(
            (1..=10)
                .map(|i| customer(i, (i * 37 % 17) as f64, (i * 11 % 19) as f64, 3.0, 0.0, 300.0, 1.0))
                .collect(),
            4,
            12.0,
            300.0,
        );
        let sol = Solution::new(vec![
            Route(vec![1, 5, 9]),
            Route(vec![2, 6, 10]),
            Route(vec![3, 7]),
            Route(vec![4, 8]),
        ]);
        let nb = Neighborhood { anchor: 0, ordered_members: vec![0, 1, 2, 3] };
        let (sub, warm) = extract_subproblem(&inst, &sol, &nb).unwrap();
        let a = repair(&sub, &warm, &RepairConfig::default(), &mut rng_from(9, &[])).unwrap();
        let b = repair(&sub, &warm, &RepairConfig::default(), &mut rng_from(9, &[])).unwrap();
        assert_eq!(a, b);
        let before = solution_cost(&sub.instance, &Solution::new(warm)).unwrap();
        let after = solution_cost(&sub.instance, &Solution::new(a)).unwrap();
        assert!(after < before);
    }

    #[test]
    fn construction_covers_everyone() {
        let inst = crate::instance_io::synthetic_base("c", 40, 20, 3);
        let sol = construct_initial(&inst, &RepairConfig::default()).unwrap();
        assert!(check_feasibility(&inst, &sol).is_feasible());
    }

    #[test]
    fn external_identity_and_failures() {
        let (inst, sol) = two_singletons();
        let nb = Neighborhood { anchor: 0, ordered_members: vec![0, 1] };
        let (sub, warm) = extract_subproblem(&inst, &sol, &nb).unwrap();
        let t = Duration::from_secs(10);
        assert_eq!(external_repair(&sub, &warm, "cat", t).unwrap(), warm);
        // a plan that drops a customer is replaced by the warm start
        assert_eq!(external_repair(&sub, &warm, "cat >/dev/null; echo 1", t).unwrap(), warm);
        let merged = external_repair(&sub, &warm, "cat >/dev/null; echo '1 2'", t).unwrap();
        assert_eq!(merged, vec![Route(vec![1, 2])]);
        assert!(matches!(
            external_repair(&sub, &warm, "/nonexistent/solver-binary", t),
            Err(RepairError::ExternalFailure(_))
        ));
        assert!(matches!(
            external_repair(&sub, &warm, "cat >/dev/null; echo 'x y'", t),
            Err(RepairError::ExternalFailure(_))
        ));
        assert!(matches!(
            external_repair(&sub, &warm, "sleep 5", Duration::from_millis(200)),
            Err(RepairError::ExternalFailure(_))
        ));
    }
}

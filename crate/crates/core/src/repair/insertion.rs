//! Regret-k cheapest insertion with O(1) position checks backed by forward
//! departure times and backward latest-start slacks.

use crate::model::{euclid, route_is_feasible, Instance, Location};

/// Forward/backward timing of one route, for constant-time insertion checks.
#[derive(Debug, Clone)]
struct RouteTiming {
    /// `locs[k]` for k in `0..=len+1`; both ends are the depot.
    locs: Vec<Location>,
    /// Departure from node k (k = 0 is the depot at horizon start).
    departure: Vec<f64>,
    /// Latest service start at node k that keeps the remainder feasible.
    latest: Vec<f64>,
    load: f64,
}

impl RouteTiming {
    fn new(instance: &Instance, ids: &[usize]) -> Self {
        let h = instance.horizon();
        let n = ids.len();
        let mut locs = Vec::with_capacity(n + 2);
        locs.push(instance.depot());
        let customers: Vec<_> = ids
            .iter()
            .map(|id| instance.customer(*id).expect("route ids belong to the instance"))
            .collect();
        locs.extend(customers.iter().map(|c| c.location));
        locs.push(instance.depot());

        let mut departure = vec![h.earliest; n + 2];
        let mut load = 0.0;
        for (k, c) in customers.iter().enumerate() {
            let arrival = departure[k] + euclid(locs[k], locs[k + 1]);
            departure[k + 1] = arrival.max(c.window.earliest) + c.service_duration;
            load += c.demand;
        }
        let mut latest = vec![h.latest; n + 2];
        for k in (0..n).rev() {
            let c = customers[k];
            let via_next = latest[k + 2] - c.service_duration - euclid(locs[k + 1], locs[k + 2]);
            latest[k + 1] = c.window.latest.min(via_next);
        }
        Self { locs, departure, latest, load }
    }

    /// Cost delta of inserting before position `pos` (0..=len), if feasible.
    fn insertion(&self, instance: &Instance, id: usize, pos: usize) -> Option<f64> {
        let c = instance.customer(id)?;
        if self.load + c.demand > instance.capacity() {
            return None;
        }
        let prev = self.locs[pos];
        let next = self.locs[pos + 1];
        let d_in = euclid(prev, c.location);
        let start = (self.departure[pos] + d_in).max(c.window.earliest);
        if start > c.window.latest {
            return None;
        }
        let d_out = euclid(c.location, next);
        if start + c.service_duration + d_out > self.latest[pos + 1] {
            return None;
        }
        Some(d_in + d_out - euclid(prev, next))
    }
}

const MISSING_OPTION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Placement {
    route: usize,
    pos: usize,
    delta: f64,
}

/// Best feasible position of `id` in one route. The constant-time check is
/// confirmed by a full schedule pass before it is trusted.
fn best_in_route(instance: &Instance, ids: &[usize], timing: &RouteTiming, id: usize) -> Option<(usize, f64)> {
    let mut cands: Vec<(usize, f64)> = (0..=ids.len())
        .filter_map(|pos| timing.insertion(instance, id, pos).map(|d| (pos, d)))
        .collect();
    cands.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut buf = Vec::with_capacity(ids.len() + 1);
    for (pos, delta) in cands {
        buf.clear();
        buf.extend_from_slice(&ids[..pos]);
        buf.push(id);
        buf.extend_from_slice(&ids[pos..]);
        if route_is_feasible(instance, &buf) {
            return Some((pos, delta));
        }
    }
    None
}

/// Inserts the ids of `pending` one by one, in the given order, each at its
/// cheapest feasible position. Returns false when some id cannot be placed.
pub fn sequential_insert(instance: &Instance, routes: &mut [Vec<usize>], pending: &[usize]) -> bool {
    for &id in pending {
        let first_empty = routes.iter().position(|r| r.is_empty());
        let mut top: Option<Placement> = None;
        for (r, ids) in routes.iter().enumerate() {
            if ids.is_empty() && Some(r) != first_empty {
                continue;
            }
            let timing = RouteTiming::new(instance, ids);
            if let Some((pos, delta)) = best_in_route(instance, ids, &timing, id) {
                if top.is_none_or(|t| delta < t.delta) {
                    top = Some(Placement { route: r, pos, delta });
                }
            }
        }
        match top {
            Some(p) => routes[p.route].insert(p.pos, id),
            None => return false,
        }
    }
    true
}

/// Inserts every id of `pending` into `routes` by regret-k. Returns false
/// (leaving `routes` partially filled) when some customer has no feasible
/// position left.
pub fn regret_insert(instance: &Instance, routes: &mut [Vec<usize>], pending: &[usize], k: usize) -> bool {
    let k = k.max(1);
    let mut timings: Vec<RouteTiming> = routes.iter().map(|r| RouteTiming::new(instance, r)).collect();
    let mut pending: Vec<usize> = pending.to_vec();
    // best[p][r]: best position of pending[p] in route r
    let mut best: Vec<Vec<Option<(usize, f64)>>> = pending
        .iter()
        .map(|&id| {
            routes
                .iter()
                .zip(&timings)
                .map(|(r, t)| best_in_route(instance, r, t, id))
                .collect()
        })
        .collect();

    while !pending.is_empty() {
        let first_empty = routes.iter().position(|r| r.is_empty());
        // (pending slot, regret, cheapest delta, customer id, option)
        let mut chosen: Option<(usize, f64, f64, usize, Placement)> = None;
        for (p, &id) in pending.iter().enumerate() {
            let mut opts: Vec<Placement> = best[p]
                .iter()
                .enumerate()
                .filter(|(r, _)| !routes[*r].is_empty() || Some(*r) == first_empty)
                .filter_map(|(r, b)| b.map(|(pos, delta)| Placement { route: r, pos, delta }))
                .collect();
            if opts.is_empty() {
                return false;
            }
            opts.sort_by(|a, b| a.delta.total_cmp(&b.delta).then(a.route.cmp(&b.route)));
            let top = opts[0];
            // a missing alternative counts as a very expensive one
            let regret: f64 = (1..k)
                .map(|h| opts.get(h).map_or(MISSING_OPTION, |o| o.delta - top.delta))
                .sum();
            let better = match &chosen {
                None => true,
                Some((_, r, d, cid, _)) => regret
                    .total_cmp(r)
                    .reverse()
                    .then(top.delta.total_cmp(d))
                    .then(id.cmp(cid))
                    .is_lt(),
            };
            if better {
                chosen = Some((p, regret, top.delta, id, top));
            }
        }
        let (p, _, _, _, opt) = chosen.expect("pending is nonempty");
        let id = pending.swap_remove(p);
        best.swap_remove(p);
        routes[opt.route].insert(opt.pos, id);
        timings[opt.route] = RouteTiming::new(instance, &routes[opt.route]);
        for (q, &other) in pending.iter().enumerate() {
            best[q][opt.route] = best_in_route(instance, &routes[opt.route], &timings[opt.route], other);
        }
    }
    true
}

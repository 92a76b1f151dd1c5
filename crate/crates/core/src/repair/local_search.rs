//! First-improvement local search over relocate, swap, intra-route 2-opt
//! and 2-opt* moves.
//! Moves are screened on their distance delta and only then checked for
//! feasibility.

use serde::{Deserialize, Serialize};

use crate::model::{euclid, route_cost, route_is_feasible, Instance, Location};

const MIN_GAIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveSet {
    pub relocate: bool,
    pub swap: bool,
    /// Reversal of a segment inside one route.
    pub two_opt: bool,
    pub two_opt_star: bool,
}

impl Default for MoveSet {
    fn default() -> Self {
        Self { relocate: true, swap: true, two_opt: true, two_opt_star: true }
    }
}

struct Ctx<'a> {
    instance: &'a Instance,
}

impl Ctx<'_> {
    fn loc(&self, id: usize) -> Location {
        self.instance.customer(id).expect("route ids belong to the instance").location
    }

    /// Location of the node before position `i` (depot for i = 0).
    fn before(&self, r: &[usize], i: usize) -> Location {
        if i == 0 {
            self.instance.depot()
        } else {
            self.loc(r[i - 1])
        }
    }

    /// Location of position `i`, depot past the end.
    fn at(&self, r: &[usize], i: usize) -> Location {
        if i >= r.len() {
            self.instance.depot()
        } else {
            self.loc(r[i])
        }
    }
}

/// Runs sweeps until no move improves or `max_passes` sweeps are done.
/// Returns the number of applied moves.
pub fn local_search(instance: &Instance, routes: &mut [Vec<usize>], moves: MoveSet, max_passes: usize) -> usize {
    let ctx = Ctx { instance };
    let mut applied = 0;
    for _ in 0..max_passes {
        let mut n = 0;
        if moves.relocate {
            n += relocate_sweep(&ctx, routes);
        }
        if moves.swap {
            n += swap_sweep(&ctx, routes);
        }
        if moves.two_opt {
            n += two_opt_sweep(&ctx, routes);
        }
        if moves.two_opt_star {
            n += two_opt_star_sweep(&ctx, routes);
        }
        applied += n;
        if n == 0 {
            break;
        }
    }
    applied
}

fn relocate_sweep(ctx: &Ctx, routes: &mut [Vec<usize>]) -> usize {
    let mut applied = 0;
    for r1 in 0..routes.len() {
        let mut i = 0;
        'customer: while i < routes[r1].len() {
            let c = routes[r1][i];
            let cl = ctx.loc(c);
            let p = ctx.before(&routes[r1], i);
            let n = ctx.at(&routes[r1], i + 1);
            let gain = euclid(p, cl) + euclid(cl, n) - euclid(p, n);
            for r2 in 0..routes.len() {
                if r2 == r1 {
                    let mut reduced = routes[r1].clone();
                    reduced.remove(i);
                    for j in 0..=reduced.len() {
                        if j == i {
                            continue;
                        }
                        let a = ctx.before(&reduced, j);
                        let b = ctx.at(&reduced, j);
                        let add = euclid(a, cl) + euclid(cl, b) - euclid(a, b);
                        if add - gain < -MIN_GAIN {
                            let mut cand = reduced.clone();
                            cand.insert(j, c);
                            if route_is_feasible(ctx.instance, &cand) {
                                routes[r1] = cand;
                                applied += 1;
                                continue 'customer;
                            }
                        }
                    }
                } else {
                    for j in 0..=routes[r2].len() {
                        let a = ctx.before(&routes[r2], j);
                        let b = ctx.at(&routes[r2], j);
                        let add = euclid(a, cl) + euclid(cl, b) - euclid(a, b);
                        if add - gain < -MIN_GAIN {
                            let mut target = routes[r2].clone();
                            target.insert(j, c);
                            if route_is_feasible(ctx.instance, &target) {
                                routes[r2] = target;
                                routes[r1].remove(i);
                                applied += 1;
                                continue 'customer;
                            }
                        }
                    }
                }
            }
            i += 1;
        }
    }
    applied
}

fn swap_sweep(ctx: &Ctx, routes: &mut [Vec<usize>]) -> usize {
    let mut applied = 0;
    for r1 in 0..routes.len() {
        for i in 0..routes[r1].len() {
            for r2 in r1..routes.len() {
                let start = if r2 == r1 { i + 1 } else { 0 };
                for j in start..routes[r2].len() {
                    if r1 == r2 {
                        let before = route_cost(ctx.instance, &routes[r1]).unwrap_or(f64::INFINITY);
                        let mut cand = routes[r1].clone();
                        cand.swap(i, j);
                        let after = route_cost(ctx.instance, &cand).unwrap_or(f64::INFINITY);
                        if after - before < -MIN_GAIN && route_is_feasible(ctx.instance, &cand) {
                            routes[r1] = cand;
                            applied += 1;
                        }
                        continue;
                    }
                    let (c1, c2) = (routes[r1][i], routes[r2][j]);
                    let (l1, l2) = (ctx.loc(c1), ctx.loc(c2));
                    let (p1, n1) = (ctx.before(&routes[r1], i), ctx.at(&routes[r1], i + 1));
                    let (p2, n2) = (ctx.before(&routes[r2], j), ctx.at(&routes[r2], j + 1));
                    let delta = euclid(p1, l2) + euclid(l2, n1) - euclid(p1, l1) - euclid(l1, n1)
                        + euclid(p2, l1)
                        + euclid(l1, n2)
                        - euclid(p2, l2)
                        - euclid(l2, n2);
                    if delta < -MIN_GAIN {
                        let mut a = routes[r1].clone();
                        let mut b = routes[r2].clone();
                        a[i] = c2;
                        b[j] = c1;
                        if route_is_feasible(ctx.instance, &a) && route_is_feasible(ctx.instance, &b) {
                            routes[r1] = a;
                            routes[r2] = b;
                            applied += 1;
                        }
                    }
                }
            }
        }
    }
    applied
}

/// Reverses `r[i..=j]` when that shortens the route.
fn two_opt_sweep(ctx: &Ctx, routes: &mut [Vec<usize>]) -> usize {
    let mut applied = 0;
    for r in routes.iter_mut() {
        for i in 0..r.len() {
            for j in (i + 1)..r.len() {
                let (a, b) = (ctx.before(r, i), ctx.at(r, i));
                let (c, d) = (ctx.at(r, j), ctx.at(r, j + 1));
                let delta = euclid(a, c) + euclid(b, d) - euclid(a, b) - euclid(c, d);
                if delta < -MIN_GAIN {
                    let mut cand = r.clone();
                    cand[i..=j].reverse();
                    if route_is_feasible(ctx.instance, &cand) {
                        *r = cand;
                        applied += 1;
                    }
                }
            }
        }
    }
    applied
}

/// Exchanges route tails: `r1[..a] + r2[b..]` and `r2[..b] + r1[a..]`.
fn two_opt_star_sweep(ctx: &Ctx, routes: &mut [Vec<usize>]) -> usize {
    let mut applied = 0;
    for r1 in 0..routes.len() {
        for r2 in (r1 + 1)..routes.len() {
            let mut a = 0;
            while a <= routes[r1].len() {
                let mut b = 0;
                while b <= routes[r2].len() {
                    let (x, y) = (&routes[r1], &routes[r2]);
                    let trivial = (a == 0 && b == 0) || (a == x.len() && b == y.len());
                    if !trivial {
                        let (a1, b1) = (ctx.before(x, a), ctx.at(x, a));
                        let (a2, b2) = (ctx.before(y, b), ctx.at(y, b));
                        let delta = euclid(a1, b2) + euclid(a2, b1) - euclid(a1, b1) - euclid(a2, b2);
                        if delta < -MIN_GAIN {
                            let mut nx: Vec<usize> = x[..a].to_vec();
                            nx.extend_from_slice(&y[b..]);
                            let mut ny: Vec<usize> = y[..b].to_vec();
                            ny.extend_from_slice(&x[a..]);
                            if route_is_feasible(ctx.instance, &nx) && route_is_feasible(ctx.instance, &ny) {
                                routes[r1] = nx;
                                routes[r2] = ny;
                                applied += 1;
                            }
                        }
                    }
                    b += 1;
                }
                a += 1;
            }
        }
    }
    applied
}

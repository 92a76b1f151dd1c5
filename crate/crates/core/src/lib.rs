//! Large neighborhood search for the vehicle routing problem with time
//! windows, with a learned classifier choosing which routes to destroy.

pub mod evaluation;
pub mod features;
pub mod instance_io;
pub mod learning;
pub mod model;
pub mod neighborhood;
pub mod pipeline;
pub mod repair;
pub mod rng;

pub use model::{
    check_feasibility, compute_schedule, euclid, route_centroid, solution_cost, Customer,
    FeasibilityReport, Instance, Location, ModelError, Route, RouteSchedule, Solution, TimeWindow,
    Violation, ViolationKind,
};

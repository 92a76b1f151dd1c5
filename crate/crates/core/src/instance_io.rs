//! Benchmark instance files (Solomon / Gehring-Homberger layout) and the
//! training-instance batch generator.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::model::{euclid, Customer, Instance, Location, ModelError, TimeWindow};
use crate::rng::rng_from;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceIoError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("depot row must have zero demand and zero service time")]
    InconsistentDepot,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("customer {0} cannot be served within the horizon")]
    InfeasibleCustomer(usize),
    #[error("invalid batch spec: {0}")]
    InvalidSpec(String),
}

fn parse_err(line: usize, message: impl Into<String>) -> InstanceIoError {
    InstanceIoError::Parse { line, message: message.into() }
}

/// Parses the line-oriented benchmark layout. Row 0 is the depot and its
/// window becomes the planning horizon.
pub fn parse_instance(text: &str) -> Result<Instance, InstanceIoError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| parse_err(text.lines().count() + 1, format!("unexpected end of file, expected {what}")))
    };

    let (_, name) = next("instance name")?;
    let name = name.to_string();
    let (ln, kw) = next("VEHICLE")?;
    if !kw.eq_ignore_ascii_case("VEHICLE") {
        return Err(parse_err(ln, format!("expected VEHICLE, found {kw:?}")));
    }
    next("vehicle header")?;
    let (ln, fleet_line) = next("fleet size and capacity")?;
    let fields: Vec<&str> = fleet_line.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(parse_err(ln, "expected `<vehicles> <capacity>`"));
    }
    let fleet_size: usize = fields[0]
        .parse()
        .map_err(|_| parse_err(ln, format!("bad vehicle count {:?}", fields[0])))?;
    let capacity: f64 = parse_real(fields[1], ln, "capacity")?;
    let (ln, kw) = next("CUSTOMER")?;
    if !kw.eq_ignore_ascii_case("CUSTOMER") {
        return Err(parse_err(ln, format!("expected CUSTOMER, found {kw:?}")));
    }
    next("customer header")?;

    let mut depot: Option<(Location, TimeWindow)> = None;
    let mut customers = Vec::new();
    for (ln, row) in lines {
        let fields: Vec<&str> = row.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(parse_err(ln, format!("expected 7 columns, found {}", fields.len())));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(ln, format!("bad customer id {:?}", fields[0])))?;
        let x = parse_real(fields[1], ln, "x coordinate")?;
        let y = parse_real(fields[2], ln, "y coordinate")?;
        let demand = parse_real(fields[3], ln, "demand")?;
        let ready = parse_real(fields[4], ln, "ready time")?;
        let due = parse_real(fields[5], ln, "due date")?;
        let service = parse_real(fields[6], ln, "service time")?;
        let location = Location::new(x, y);
        let window = TimeWindow::new(ready, due);
        if depot.is_none() {
            if id != 0 {
                return Err(parse_err(ln, "first row must be the depot (id 0)"));
            }
            if demand != 0.0 || service != 0.0 {
                return Err(InstanceIoError::InconsistentDepot);
            }
            depot = Some((location, window));
            continue;
        }
        customers.push(Customer { id, location, demand, service_duration: service, window });
    }
    let (depot, horizon) = depot.ok_or_else(|| parse_err(text.lines().count() + 1, "missing depot row"))?;
    Ok(Instance::new(name, depot, horizon, fleet_size, capacity, customers)?)
}

fn parse_real(tok: &str, line: usize, what: &str) -> Result<f64, InstanceIoError> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_err(line, format!("bad {what} {tok:?}"))),
    }
}

/// Fixed-point with at most six decimals, trailing zeros trimmed.
pub fn format_number(v: f64) -> String {
    let mut s = format!("{v:.6}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

pub fn write_instance(instance: &Instance) -> String {
    let mut out = String::new();
    let h = instance.horizon();
    let d = instance.depot();
    let _ = writeln!(out, "{}", instance.name());
    out.push('\n');
    out.push_str("VEHICLE\nNUMBER     CAPACITY\n");
    let _ = writeln!(out, "{} {}", instance.fleet_size(), format_number(instance.capacity()));
    out.push('\n');
    out.push_str("CUSTOMER\n");
    out.push_str("CUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE TIME\n");
    out.push('\n');
    let row = |out: &mut String, id: usize, loc: Location, q: f64, w: TimeWindow, tau: f64| {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            id,
            format_number(loc.x),
            format_number(loc.y),
            format_number(q),
            format_number(w.earliest),
            format_number(w.latest),
            format_number(tau)
        );
    };
    row(&mut out, 0, d, 0.0, h, 0.0);
    for c in instance.customers() {
        row(&mut out, c.id, c.location, c.demand, c.window, c.service_duration);
    }
    out
}

const GRID: f64 = 1e6;

fn grid_up(v: f64) -> f64 {
    (v * GRID).ceil() / GRID
}

fn grid_down(v: f64) -> f64 {
    (v * GRID).floor() / GRID
}

/// Interval of admissible service starts for a customer served alone:
/// leave the depot at the horizon start, be back by its end.
pub fn service_bounds(instance: &Instance, c: &Customer) -> (f64, f64) {
    let h = instance.horizon();
    let d = euclid(instance.depot(), c.location);
    (h.earliest + d, h.latest - d - c.service_duration)
}

const MIDPOINT_STREAM: u64 = 0x6d69_6470;
const INSTANCE_STREAM: u64 = 0x696e_7374;

/// Samples one window midpoint per customer, uniformly over the service
/// starts that still allow a return to the depot.
pub fn sample_midpoints(base: &Instance, seed: u64) -> Result<BTreeMap<usize, f64>, InstanceIoError> {
    let mut rng = rng_from(seed, &[MIDPOINT_STREAM]);
    let mut out = BTreeMap::new();
    for c in base.customers() {
        let (lo, hi) = service_bounds(base, c);
        if lo > hi {
            return Err(InstanceIoError::InfeasibleCustomer(c.id));
        }
        let mid = if lo == hi { lo } else { rng.random_range(lo..=hi) };
        out.insert(c.id, mid);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LengthRule {
    Fixed(f64),
    Normal { mean: f64, stddev: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenEntry {
    pub length_rule: LengthRule,
    pub fraction: f64,
}

impl GenEntry {
    pub const fn fixed(length: f64, fraction: f64) -> Self {
        Self { length_rule: LengthRule::Fixed(length), fraction }
    }

    pub const fn normal(mean: f64, stddev: f64, fraction: f64) -> Self {
        Self { length_rule: LengthRule::Normal { mean, stddev }, fraction }
    }

    fn validate(&self) -> Result<(), InstanceIoError> {
        let ok_rule = match self.length_rule {
            LengthRule::Fixed(l) => l > 0.0,
            LengthRule::Normal { mean, stddev } => mean > 0.0 && stddev > 0.0,
        };
        if !ok_rule {
            return Err(InstanceIoError::InvalidSpec(format!("bad length rule {:?}", self.length_rule)));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(InstanceIoError::InvalidSpec(format!("fraction {} outside (0, 1]", self.fraction)));
        }
        Ok(())
    }

    /// Number of restrictive customers, rounded half up.
    pub fn restrictive_count(&self, n: usize) -> usize {
        (self.fraction * n as f64 + 0.5).floor() as usize
    }
}

/// Window length / fraction grid used for every batch.
pub const TABLE1: [GenEntry; 10] = [
    GenEntry::fixed(10.0, 1.0),
    GenEntry::fixed(10.0, 0.75),
    GenEntry::fixed(10.0, 0.5),
    GenEntry::fixed(10.0, 0.25),
    GenEntry::fixed(30.0, 1.0),
    GenEntry::fixed(30.0, 0.75),
    GenEntry::fixed(30.0, 0.5),
    GenEntry::fixed(30.0, 0.25),
    GenEntry::normal(60.0, 20.0, 1.0),
    GenEntry::normal(120.0, 30.0, 1.0),
];

#[derive(Debug, Clone)]
pub struct BatchSpec {
    pub base_instance: Instance,
    pub entries: Vec<GenEntry>,
    pub seed: u64,
}

impl BatchSpec {
    pub fn table1(base_instance: Instance, seed: u64) -> Self {
        Self { base_instance, entries: TABLE1.to_vec(), seed }
    }

    pub fn validate(&self) -> Result<(), InstanceIoError> {
        if self.entries.len() != 10 {
            return Err(InstanceIoError::InvalidSpec(format!(
                "a batch has 10 entries, got {}",
                self.entries.len()
            )));
        }
        self.entries.iter().try_for_each(GenEntry::validate)
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub instance: Instance,
    pub entry: GenEntry,
    /// Customers that received a restrictive window.
    pub restrictive: BTreeSet<usize>,
}

/// Builds the 10 instances of a batch. They share locations, demands,
/// service times and window midpoints; they differ in which customers get a
/// restrictive window and how long it is.
pub fn generate_batch(spec: &BatchSpec) -> Result<Vec<GeneratedInstance>, InstanceIoError> {
    spec.validate()?;
    let base = &spec.base_instance;
    let midpoints = sample_midpoints(base, spec.seed)?;
    let horizon = base.horizon();
    let n = base.len();
    let mut batch = Vec::with_capacity(spec.entries.len());
    for (k, entry) in spec.entries.iter().enumerate() {
        let mut rng = rng_from(spec.seed, &[INSTANCE_STREAM, k as u64]);
        let count = entry.restrictive_count(n).min(n);
        let picked: BTreeSet<usize> = index::sample(&mut rng, n, count).into_iter().collect();
        let normal = match entry.length_rule {
            LengthRule::Normal { mean, stddev } => Some(
                Normal::new(mean, stddev)
                    .map_err(|e| InstanceIoError::InvalidSpec(e.to_string()))?,
            ),
            LengthRule::Fixed(_) => None,
        };
        let mut restrictive = BTreeSet::new();
        let mut customers = Vec::with_capacity(n);
        for (pos, c) in base.customers().iter().enumerate() {
            let mut c = c.clone();
            if picked.contains(&pos) {
                let length = match (entry.length_rule, &normal) {
                    (LengthRule::Fixed(l), _) => l,
                    (_, Some(dist)) => dist.sample(&mut rng).clamp(1.0, horizon.length().max(1.0)),
                    _ => unreachable!(),
                };
                let mid = midpoints[&c.id];
                let (lo, hi) = service_bounds(base, &c);
                c.window = restrictive_window(mid, length, lo, hi);
                restrictive.insert(c.id);
            } else {
                c.window = horizon;
            }
            customers.push(c);
        }
        let name = format!("{}_g{:02}", base.name(), k + 1);
        let instance = base.derive(name, base.fleet_size(), customers)?;
        batch.push(GeneratedInstance { instance, entry: *entry, restrictive });
    }
    Ok(batch)
}

/// `[mid - L/2, mid + L/2]` clipped to `[lo, hi]` and rounded inward to the
/// six-decimal grid the writer uses.
fn restrictive_window(mid: f64, length: f64, lo: f64, hi: f64) -> TimeWindow {
    let e = grid_up((mid - 0.5 * length).max(lo));
    let l = grid_down((mid + 0.5 * length).min(hi));
    if e <= l {
        TimeWindow::new(e, l)
    } else {
        // Only reachable when [lo, hi] is narrower than the grid step.
        TimeWindow::new(lo, lo)
    }
}

/// Random uniform-geometry instance with full-horizon windows, laid out like
/// the 100-customer R1 benchmarks (70x70 grid, central depot, horizon 230,
/// capacity 200, service time 10). Used as a base for batch generation when
/// no benchmark file is at hand.
pub fn synthetic_base(name: &str, customers: usize, fleet_size: usize, seed: u64) -> Instance {
    let mut rng = rng_from(seed, &[0x7379_6e74]);
    let horizon = TimeWindow::new(0.0, 230.0);
    let depot = Location::new(35.0, 35.0);
    let list = (1..=customers)
        .map(|id| Customer {
            id,
            location: Location::new(
                f64::from(rng.random_range(0..=70u32)),
                f64::from(rng.random_range(0..=70u32)),
            ),
            demand: f64::from(rng.random_range(1..=40u32)),
            service_duration: 10.0,
            window: horizon,
        })
        .collect();
    Instance::new(name, depot, horizon, fleet_size, 200.0, list).expect("synthetic instance is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_feasibility, Route, Solution};

    const SMALL: &str = "tiny\n\nVEHICLE\nNUMBER     CAPACITY\n  2         50\n\nCUSTOMER\nCUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE   TIME\n\n    0      0         0          0          0        100          0\n    1      3         4         10         10         20          2\n";

    #[test]
    fn parses_minimal_document() {
        let inst = parse_instance(SMALL).unwrap();
        assert_eq!(inst.name(), "tiny");
        assert_eq!(inst.len(), 1);
        assert_eq!(inst.fleet_size(), 2);
        assert_eq!(inst.capacity(), 50.0);
        assert_eq!(inst.horizon(), TimeWindow::new(0.0, 100.0));
        let c = inst.customer(1).unwrap();
        assert_eq!(c.window, TimeWindow::new(10.0, 20.0));
        assert_eq!(c.service_duration, 2.0);
    }

    #[test]
    fn non_numeric_demand_reports_line() {
        let bad = SMALL.replace("3         4         10", "3         4         ten");
        match parse_instance(&bad) {
            Err(InstanceIoError::Parse { line, .. }) => assert_eq!(line, 11),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn depot_with_demand_is_rejected() {
        let bad = SMALL.replace("0      0         0          0          0        100          0", "0 0 0 5 0 100 0");
        assert_eq!(parse_instance(&bad), Err(InstanceIoError::InconsistentDepot));
    }

    #[test]
    fn truncated_header_is_a_parse_error() {
        assert!(matches!(parse_instance("name\nVEHICLE\n"), Err(InstanceIoError::Parse { .. })));
        assert!(matches!(parse_instance(""), Err(InstanceIoError::Parse { .. })));
    }

    #[test]
    fn writer_row_counts() {
        let base = synthetic_base("b", 2, 2, 1);
        let text = write_instance(&base);
        let rows = text.lines().skip_while(|l| !l.starts_with("CUST NO.")).skip(1).filter(|l| !l.is_empty()).count();
        assert_eq!(rows, 3);
        let empty = base.derive("e", 1, vec![]).unwrap();
        let text = write_instance(&empty);
        let rows = text.lines().skip_while(|l| !l.starts_with("CUST NO.")).skip(1).filter(|l| !l.is_empty()).count();
        assert_eq!(rows, 1);
        assert_eq!(parse_instance(&text).unwrap(), empty);
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(10.0), "10");
        assert_eq!(format_number(0.5), "0.5");
        assert_eq!(format_number(1.234_567_89), "1.234568");
        assert_eq!(format_number(-0.0), "0");
    }

    #[test]
    fn midpoint_bounds() {
        let inst = Instance::new(
            "m",
            Location::new(0.0, 0.0),
            TimeWindow::new(0.0, 100.0),
            1,
            10.0,
            vec![
                Customer { id: 1, location: Location::new(0.0, 0.0), demand: 1.0, service_duration: 0.0, window: TimeWindow::new(0.0, 100.0) },
                Customer { id: 2, location: Location::new(0.0, 40.0), demand: 1.0, service_duration: 10.0, window: TimeWindow::new(0.0, 100.0) },
            ],
        )
        .unwrap();
        for seed in 0..50 {
            let m = sample_midpoints(&inst, seed).unwrap();
            assert!((0.0..=100.0).contains(&m[&1]));
            assert!((40.0..=50.0).contains(&m[&2]));
            assert_eq!(m, sample_midpoints(&inst, seed).unwrap());
        }
    }

    #[test]
    fn unreachable_customer_is_reported() {
        let inst = Instance::new(
            "u",
            Location::new(0.0, 0.0),
            TimeWindow::new(0.0, 100.0),
            1,
            10.0,
            vec![Customer { id: 3, location: Location::new(0.0, 60.0), demand: 1.0, service_duration: 0.0, window: TimeWindow::new(0.0, 100.0) }],
        )
        .unwrap();
        assert_eq!(sample_midpoints(&inst, 1), Err(InstanceIoError::InfeasibleCustomer(3)));
    }

    #[test]
    fn batch_follows_entry_grid() {
        let base = synthetic_base("base", 1000, 100, 5);
        let batch = generate_batch(&BatchSpec::table1(base.clone(), 9)).unwrap();
        assert_eq!(batch.len(), 10);
        assert_eq!(batch[2].restrictive.len(), 500);
        for c in batch[0].instance.customers() {
            assert!(c.window.length() <= 10.0);
        }
        for g in &batch {
            for (a, b) in g.instance.customers().iter().zip(base.customers()) {
                assert_eq!((a.id, a.location, a.demand, a.service_duration), (b.id, b.location, b.demand, b.service_duration));
            }
            for c in g.instance.customers() {
                let sol = Solution::new(vec![Route(vec![c.id])]);
                let sub = g.instance.derive("single", 1, vec![c.clone()]).unwrap();
                assert!(check_feasibility(&sub, &sol).is_feasible(), "customer {} of {}", c.id, g.instance.name());
            }
        }
    }

    #[test]
    fn batch_is_deterministic_and_round_trips() {
        let base = synthetic_base("base", 60, 20, 2);
        let a = generate_batch(&BatchSpec::table1(base.clone(), 4)).unwrap();
        let b = generate_batch(&BatchSpec::table1(base.clone(), 4)).unwrap();
        let c = generate_batch(&BatchSpec::table1(base, 5)).unwrap();
        for ((x, y), z) in a.iter().zip(&b).zip(&c) {
            let tx = write_instance(&x.instance);
            assert_eq!(tx, write_instance(&y.instance));
            assert_ne!(tx, write_instance(&z.instance));
            assert_eq!(parse_instance(&tx).unwrap(), x.instance);
        }
    }

    #[test]
    fn rejects_wrong_entry_count() {
        let base = synthetic_base("base", 5, 2, 2);
        let spec = BatchSpec { base_instance: base, entries: TABLE1[..9].to_vec(), seed: 1 };
        assert!(matches!(generate_batch(&spec), Err(InstanceIoError::InvalidSpec(_))));
    }
}

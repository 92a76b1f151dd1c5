//! Adapter for an external VRPTW solver process.
//!
//! The child receives the sub-problem in the instance file layout followed
//! by a `WARM_START` line and the warm-start routes (one line per route,
//! space-separated customer ids). It answers with route lines on standard
//! output. If its output contains a `WARM_START` marker only the lines after
//! the last marker are read, so `cat` acts as an identity solver.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::Duration;

use wait_timeout::ChildExt;

use super::{RepairError, SubProblem};
use crate::instance_io::write_instance;
use crate::model::{check_feasibility, solution_cost, Route, Solution};

pub const WARM_START_MARKER: &str = "WARM_START";

pub fn encode_request(sub: &SubProblem, warm_start: &[Route]) -> String {
    let mut text = write_instance(&sub.instance);
    text.push_str(WARM_START_MARKER);
    text.push('\n');
    text.push_str(&Solution::new(warm_start.to_vec()).to_route_lines());
    text
}

pub fn decode_response(text: &str) -> Result<Vec<Route>, String> {
    let lines: Vec<&str> = text.lines().collect();
    let start = lines.iter().rposition(|l| l.trim() == WARM_START_MARKER).map_or(0, |p| p + 1);
    let body = lines[start..].join("\n");
    Solution::from_route_lines(&body).map(|s| s.routes)
}

fn run(command: &str, input: String, timeout: Duration) -> Result<String, RepairError> {
    let fail = |msg: String| RepairError::ExternalFailure(msg);
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| fail(format!("cannot start `{command}`: {e}")))?;
    let mut stdin = child.stdin.take().expect("stdin is piped");
    let writer = thread::spawn(move || {
        // a solver may exit without reading everything; that is its call
        let _ = stdin.write_all(input.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("stdout is piped");
    let reader = thread::spawn(move || {
        let mut buf = String::new();
        stdout.read_to_string(&mut buf).map(|_| buf)
    });
    let status = match child.wait_timeout(timeout).map_err(|e| fail(e.to_string()))? {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(fail(format!("`{command}` timed out after {timeout:?}")));
        }
    };
    let _ = writer.join();
    let output = reader
        .join()
        .map_err(|_| fail("output reader panicked".into()))?
        .map_err(|e| fail(format!("unreadable output: {e}")))?;
    if !status.success() {
        return Err(fail(format!("`{command}` exited with {status}")));
    }
    Ok(output)
}

/// Solves the sub-problem with an external command. Process failures are
/// errors; a plan that is infeasible or worse than the warm start is
/// discarded in favour of the warm start.
pub fn external_repair(
    sub: &SubProblem,
    warm_start: &[Route],
    command: &str,
    timeout: Duration,
) -> Result<Vec<Route>, RepairError> {
    let output = run(command, encode_request(sub, warm_start), timeout)?;
    let routes = decode_response(&output).map_err(RepairError::ExternalFailure)?;
    let plan = Solution::new(routes);
    let report = check_feasibility(&sub.instance, &plan);
    if !report.is_feasible() {
        log::warn!(
            "external solver returned an infeasible plan ({} violations), keeping warm start",
            report.violations.len()
        );
        return Ok(warm_start.to_vec());
    }
    let warm_cost = solution_cost(&sub.instance, &Solution::new(warm_start.to_vec()))?;
    let cost = solution_cost(&sub.instance, &plan)?;
    if cost > warm_cost {
        log::warn!("external solver plan costs {cost} > warm start {warm_cost}, keeping warm start");
        return Ok(warm_start.to_vec());
    }
    Ok(plan.routes)
}

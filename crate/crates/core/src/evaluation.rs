//! Gap measure, offline selector validation and result tables.

use std::fmt::Write as _;

use thiserror::Error;

use crate::learning::{ForestModel, LearningError, Sample};
use crate::pipeline::{select_oracle, RunTrace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("random and oracle averages coincide ({0}); gap is undefined")]
    DegenerateBaseline(f64),
    #[error("no iteration has an improving neighborhood")]
    NoImprovingIterations,
    #[error("traces have different lengths: {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("no traces given")]
    Empty,
    #[error("row {row}: expected {expected} model columns, found {found}")]
    InconsistentRows { row: String, expected: usize, found: usize },
    #[error(transparent)]
    Learning(#[from] LearningError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapInput {
    pub alg_avg: f64,
    pub oracle_avg: f64,
    pub random_avg: f64,
}

/// `100 (alg - oracle) / (random - oracle)`, not clamped.
pub fn gap(input: GapInput) -> Result<f64, EvalError> {
    let span = input.random_avg - input.oracle_avg;
    if span == 0.0 {
        return Err(EvalError::DegenerateBaseline(input.oracle_avg));
    }
    Ok(100.0 * (input.alg_avg - input.oracle_avg) / span)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    pub avg_true_rank: f64,
    pub fraction_improving: f64,
    pub avg_improvement: f64,
    /// Iterations that entered the averages.
    pub iterations: usize,
}

/// Scores a selector on logged iterations. `groups[i]` holds the
/// improvements of iteration `i`; `pick` returns a 1-based choice for it.
/// Only iterations with a strictly improving candidate count.
pub fn validate_selector<F>(groups: &[Vec<f64>], mut pick: F) -> Result<ValidationReport, EvalError>
where
    F: FnMut(usize) -> usize,
{
    let (mut rank_sum, mut hits, mut y_sum, mut n) = (0.0, 0usize, 0.0, 0usize);
    for (i, ys) in groups.iter().enumerate() {
        if !ys.iter().any(|&y| y > 0.0) {
            continue;
        }
        let j = pick(i);
        let y = ys[j - 1];
        rank_sum += (1 + ys.iter().filter(|&&o| o > y).count()) as f64;
        if y > 0.0 {
            hits += 1;
        }
        y_sum += y;
        n += 1;
    }
    if n == 0 {
        return Err(EvalError::NoImprovingIterations);
    }
    let n_f = n as f64;
    Ok(ValidationReport {
        avg_true_rank: rank_sum / n_f,
        fraction_improving: hits as f64 / n_f,
        avg_improvement: y_sum / n_f,
        iterations: n,
    })
}

pub fn improvements_of(groups: &[Vec<&Sample>]) -> Vec<Vec<f64>> {
    groups.iter().map(|g| g.iter().map(|s| s.y).collect()).collect()
}

pub fn validate_oracle(groups: &[Vec<&Sample>]) -> Result<ValidationReport, EvalError> {
    let ys = improvements_of(groups);
    validate_selector(&ys, |i| select_oracle(&ys[i]))
}

/// Expected report of a uniformly random pick. Every statistic is linear
/// in the per-iteration choice, so this is the mean over the fixed picks.
pub fn validate_uniform_random(groups: &[Vec<f64>]) -> Result<ValidationReport, EvalError> {
    let n1 = groups.iter().map(Vec::len).max().unwrap_or(0);
    if groups.iter().any(|g| g.len() != n1) {
        return Err(EvalError::LengthMismatch(n1, groups.iter().map(Vec::len).min().unwrap_or(0)));
    }
    let reports = (1..=n1).map(|j| validate_selector(groups, |_| j)).collect::<Result<Vec<_>, _>>()?;
    let k = reports.len() as f64;
    Ok(ValidationReport {
        avg_true_rank: reports.iter().map(|r| r.avg_true_rank).sum::<f64>() / k,
        fraction_improving: reports.iter().map(|r| r.fraction_improving).sum::<f64>() / k,
        avg_improvement: reports.iter().map(|r| r.avg_improvement).sum::<f64>() / k,
        iterations: reports[0].iterations,
    })
}

/// Highest predicted potential per iteration, ties to the lowest index.
pub fn validate_model(groups: &[Vec<&Sample>], model: &ForestModel) -> Result<ValidationReport, EvalError> {
    let mut picks = Vec::with_capacity(groups.len());
    for g in groups {
        let p = g.iter().map(|s| model.predict_potential(&s.features)).collect::<Result<Vec<_>, _>>()?;
        picks.push(select_oracle(&p));
    }
    validate_selector(&improvements_of(groups), |i| picks[i])
}

/// Mean best cost per iteration over traces of equal length.
pub fn convergence_series(traces: &[RunTrace]) -> Result<Vec<f64>, EvalError> {
    let first = traces.first().ok_or(EvalError::Empty)?;
    let len = first.records.len();
    let mut sums = vec![0.0; len];
    for t in traces {
        if t.records.len() != len {
            return Err(EvalError::LengthMismatch(len, t.records.len()));
        }
        for (s, r) in sums.iter_mut().zip(&t.records) {
            *s += r.best_cost;
        }
    }
    Ok(sums.into_iter().map(|s| s / traces.len() as f64).collect())
}

pub fn series_tsv(series: &[f64]) -> String {
    let mut out = String::from("iteration\tmean_best_cost\n");
    for (i, v) in series.iter().enumerate() {
        let _ = writeln!(out, "{i}\t{v}");
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub instance: String,
    pub bks: Option<f64>,
    pub oracle: Option<f64>,
    pub random: Option<f64>,
    /// Averages of the learned selectors, in `ResultTable::models` order.
    pub models: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub models: Vec<String>,
    pub rows: Vec<ResultRow>,
}

/// One rendered line: label, BKS, then (avg, gap) per selector column.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedRow {
    pub label: String,
    pub bks: Option<f64>,
    pub cells: Vec<(Option<f64>, Option<f64>)>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.collect::<Option<Vec<_>>>()?;
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn cell_gap(alg: Option<f64>, oracle: Option<f64>, random: Option<f64>) -> Option<f64> {
    gap(GapInput { alg_avg: alg?, oracle_avg: oracle?, random_avg: random? }).ok()
}

impl ResultTable {
    fn columns(row: &ResultRow) -> Vec<Option<f64>> {
        let mut c = vec![row.oracle, row.random];
        c.extend(row.models.iter().copied());
        c
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut c = vec!["Oracle".to_string(), "Random".to_string()];
        c.extend(self.models.iter().cloned());
        c
    }

    /// Per-instance rows plus an Average row. The Average row shows the
    /// mean of each column and the mean of the per-row gaps.
    pub fn render_rows(&self) -> Result<Vec<RenderedRow>, EvalError> {
        let width = self.models.len() + 2;
        let mut out = Vec::with_capacity(self.rows.len() + 1);
        for row in &self.rows {
            if row.models.len() != self.models.len() {
                return Err(EvalError::InconsistentRows {
                    row: row.instance.clone(),
                    expected: self.models.len(),
                    found: row.models.len(),
                });
            }
            let cells = Self::columns(row)
                .into_iter()
                .map(|avg| (avg, cell_gap(avg, row.oracle, row.random)))
                .collect();
            out.push(RenderedRow { label: row.instance.clone(), bks: row.bks, cells });
        }
        if !self.rows.is_empty() {
            let cells = (0..width)
                .map(|c| (mean(out.iter().map(|r| r.cells[c].0)), mean(out.iter().map(|r| r.cells[c].1))))
                .collect();
            out.push(RenderedRow { label: "Average".into(), bks: mean(self.rows.iter().map(|r| r.bks)), cells });
        }
        Ok(out)
    }

    pub fn to_tsv(&self) -> Result<String, EvalError> {
        let mut s = String::from("instance\tbks");
        for c in self.column_names() {
            let _ = write!(s, "\t{c}_avg\t{c}_gap");
        }
        s.push('\n');
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        for r in self.render_rows()? {
            let _ = write!(s, "{}\t{}", r.label, opt(r.bks));
            for (a, g) in &r.cells {
                let _ = write!(s, "\t{}\t{}", opt(*a), opt(*g));
            }
            s.push('\n');
        }
        Ok(s)
    }

    pub fn to_text(&self) -> Result<String, EvalError> {
        let rows = self.render_rows()?;
        let mut header = vec!["Instance".to_string(), "BKS".to_string()];
        for c in self.column_names() {
            header.push(format!("{c} Avg"));
            header.push(format!("{c} Gap"));
        }
        let mut table = vec![header];
        for r in rows {
            let mut line = vec![r.label.clone(), r.bks.map_or("-".into(), |v| format!("{v:.1}"))];
            for (a, g) in r.cells {
                line.push(a.map_or("-".into(), |v| format!("{v:.1}")));
                line.push(g.map_or("-".into(), |v| format!("{v:.2}%")));
            }
            table.push(line);
        }
        let widths: Vec<usize> =
            (0..table[0].len()).map(|c| table.iter().map(|l| l[c].len()).max().unwrap_or(0)).collect();
        let mut s = String::new();
        for line in table {
            let cells: Vec<String> = line
                .iter()
                .enumerate()
                .map(|(c, v)| if c == 0 { format!("{v:<w$}", w = widths[c]) } else { format!("{v:>w$}", w = widths[c]) })
                .collect();
            s.push_str(cells.join("  ").trim_end());
            s.push('\n');
        }
        Ok(s)
    }
}

pub fn validation_tsv(report: &ValidationReport) -> String {
    format!(
        "avg_true_rank\tfraction_improving\tavg_improvement\titerations\n{}\t{}\t{}\t{}\n",
        report.avg_true_rank, report.fraction_improving, report.avg_improvement, report.iterations
    )
}

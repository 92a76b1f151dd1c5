//! The LNS loop with random, oracle and learned neighborhood selection,
//! data collection, and the multi-round training guideline.

use std::io::{Read, Write};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{extract_features, feature_names, FeatureError};
use crate::learning::{accuracy, label, split, train_forest, Dataset, ForestModel, ForestParams, LearningError, Sample};
use crate::model::{check_feasibility, solution_cost, Instance, ModelError, Solution};
use crate::neighborhood::{create_neighborhood, Neighborhood, NeighborhoodError, SelectorConfig, SolutionContext};
use crate::repair::{apply_repair, construct_initial, extract_subproblem, repair_with_config, RepairConfig, RepairError};
use crate::rng::{derive_seed, name_key, rng_from};

const NEIGHBORHOOD_STREAM: u64 = 1;
const REPAIR_STREAM: u64 = 2;
const SELECT_STREAM: u64 = 3;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("initial solution is infeasible: {0}")]
    InfeasibleInitial(String),
    #[error("model expects a different feature layout")]
    ManifestMismatch,
    #[error("n1 must be at least 1")]
    NoCandidates,
    #[error("need at least one round")]
    NoRounds,
    #[error(transparent)]
    Neighborhood(#[from] NeighborhoodError),
    #[error(transparent)]
    Repair(#[from] RepairError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub iterations: usize,
    /// Candidate neighborhoods per iteration.
    pub n1: usize,
    pub seed: u64,
    pub selector: SelectorConfig,
    pub repair: RepairConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            n1: 10,
            seed: 0,
            selector: SelectorConfig::default(),
            repair: RepairConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Selector<'a> {
    Random,
    Oracle,
    Model(&'a ForestModel),
}

impl Selector<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Selector::Random => "random",
            Selector::Oracle => "oracle",
            Selector::Model(_) => "model",
        }
    }
}

/// Hill climbing: strictly better only.
pub fn accept(candidate_cost: f64, current_cost: f64) -> bool {
    candidate_cost < current_cost
}

/// Uniform 1-based index in `1..=n1`.
pub fn select_random(n1: usize, rng: &mut crate::rng::Rng) -> usize {
    rng.random_range(1..=n1.max(1))
}

/// 1-based index of the largest value, ties to the lowest index.
pub fn select_oracle(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = j;
        }
    }
    best + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// 1-based chosen neighborhood; `None` for the initial row.
    pub chosen: Option<usize>,
    /// Improvement of every candidate; `None` where it was not evaluated.
    pub improvements: Vec<Option<f64>>,
    pub accepted: bool,
    pub current_cost: f64,
    pub best_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub n1: usize,
    /// Row 0 holds the initial solution.
    pub records: Vec<IterationRecord>,
}

#[derive(Debug, Error)]
pub enum TraceFormatError {
    #[error("trace line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl RunTrace {
    pub fn best_costs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best_cost).collect()
    }

    pub fn final_best(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.best_cost)
    }

    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let ys: Vec<String> = (1..=self.n1).map(|j| format!("y_{j}")).collect();
        writeln!(out, "iteration\tchosen_j\t{}\taccepted\tcurrent_cost\tbest_cost", ys.join("\t"))?;
        for r in &self.records {
            let ys: Vec<String> = r.improvements.iter().map(|y| fmt_opt(*y)).collect();
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.iteration,
                r.chosen.map_or_else(|| "NA".to_string(), |j| j.to_string()),
                ys.join("\t"),
                u8::from(r.accepted),
                r.current_cost,
                r.best_cost
            )?;
        }
        Ok(())
    }

    pub fn read_tsv<R: Read>(mut input: R) -> Result<Self, TraceFormatError> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(TraceFormatError::Format { line: 1, message: "empty trace".into() })?;
        let cols: Vec<&str> = header.split('\t').collect();
        if cols.len() < 5 || cols[0] != "iteration" || cols[1] != "chosen_j" || cols[cols.len() - 1] != "best_cost" {
            return Err(TraceFormatError::Format { line: 1, message: "unexpected header".into() });
        }
        let n1 = cols.len() - 5;
        let mut records = Vec::new();
        for (i, line) in lines {
            let bad = |message: String| TraceFormatError::Format { line: i + 1, message };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != cols.len() {
                return Err(bad(format!("expected {} fields, found {}", cols.len(), f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
            let opt = |s: &str| if s == "NA" { Ok(None) } else { num(s).map(Some) };
            records.push(IterationRecord {
                iteration: f[0].parse().map_err(|e| bad(format!("iteration: {e}")))?,
                chosen: if f[1] == "NA" { None } else { Some(f[1].parse().map_err(|e| bad(format!("chosen_j: {e}")))?) },
                improvements: f[2..2 + n1].iter().map(|s| opt(s)).collect::<Result<_, _>>()?,
                accepted: f[2 + n1] == "1",
                current_cost: num(f[3 + n1])?,
                best_cost: num(f[4 + n1])?,
            });
        }
        Ok(Self { n1, records })
    }
}

/// A repaired candidate ready to be accepted.
struct Candidate {
    solution: Solution,
    cost: f64,
    improvement: f64,
}

fn repair_candidate(
    instance: &Instance,
    ctx: &SolutionContext,
    nb: &Neighborhood,
    config: &RunConfig,
    run_seed: u64,
    iteration: usize,
    j: usize,
) -> Result<Candidate, PipelineError> {
    let (sub, warm) = extract_subproblem(instance, &ctx.solution, nb)?;
    let mut rng = rng_from(run_seed, &[REPAIR_STREAM, iteration as u64, j as u64]);
    let repaired = repair_with_config(&sub, &warm, &config.repair, &mut rng)?;
    if repaired == warm {
        return Ok(Candidate { solution: ctx.solution.clone(), cost: ctx.cost, improvement: 0.0 });
    }
    let solution = apply_repair(&ctx.solution, &sub, &repaired);
    let cost = solution_cost(instance, &solution)?;
    Ok(Candidate { solution, cost, improvement: crate::repair::improvement(ctx.cost, cost) })
}

pub fn check_model_layout(model: &ForestModel, selector: &SelectorConfig) -> Result<(), PipelineError> {
    if model.feature_names != feature_names(selector) {
        return Err(PipelineError::ManifestMismatch);
    }
    Ok(())
}

/// Candidate neighborhoods of one iteration.
pub fn create_candidates(
    instance: &Instance,
    ctx: &SolutionContext,
    config: &RunConfig,
    run_seed: u64,
    iteration: usize,
) -> Result<Vec<Neighborhood>, PipelineError> {
    (1..=config.n1)
        .map(|j| {
            let mut rng = rng_from(run_seed, &[NEIGHBORHOOD_STREAM, iteration as u64, j as u64]);
            create_neighborhood(instance, ctx, &config.selector, &mut rng).map_err(PipelineError::from)
        })
        .collect()
}

/// Index (1-based) of the candidate with the highest predicted potential.
pub fn lens_select(
    instance: &Instance,
    ctx: &SolutionContext,
    candidates: &[Neighborhood],
    model: &ForestModel,
    selector: &SelectorConfig,
) -> Result<usize, PipelineError> {
    let potentials = candidates
        .iter()
        .map(|nb| {
            let x = extract_features(instance, ctx, nb, selector)?;
            Ok(model.predict_potential(&x)?)
        })
        .collect::<Result<Vec<f64>, PipelineError>>()?;
    Ok(select_oracle(&potentials))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub final_solution: Solution,
    pub best_solution: Solution,
    pub trace: RunTrace,
}

/// Shared driver for plain runs and data collection.
fn drive(
    instance: &Instance,
    initial: Solution,
    config: &RunConfig,
    selector: Selector,
    run_seed: u64,
    mut sink: Option<(&str, &mut Dataset)>,
) -> Result<RunOutcome, PipelineError> {
    if config.n1 == 0 {
        return Err(PipelineError::NoCandidates);
    }
    let report = check_feasibility(instance, &initial);
    if !report.is_feasible() {
        let first = report.violations.first().map(ToString::to_string).unwrap_or_default();
        return Err(PipelineError::InfeasibleInitial(first));
    }
    if let Selector::Model(m) = selector {
        check_model_layout(m, &config.selector)?;
    }
    let collecting = sink.is_some();
    let mut ctx = SolutionContext::new(instance, initial)?;
    let mut best = ctx.solution.clone();
    let mut best_cost = ctx.cost;
    let mut trace = RunTrace {
        n1: config.n1,
        records: vec![IterationRecord {
            iteration: 0,
            chosen: None,
            improvements: vec![None; config.n1],
            accepted: false,
            current_cost: ctx.cost,
            best_cost,
        }],
    };
    for i in 1..=config.iterations {
        let candidates = create_candidates(instance, &ctx, config, run_seed, i)?;
        let features = if collecting || matches!(selector, Selector::Model(_)) {
            Some(
                candidates
                    .iter()
                    .map(|nb| extract_features(instance, &ctx, nb, &config.selector))
                    .collect::<Result<Vec<_>, _>>()?,
            )
        } else {
            None
        };
        let evaluate_all = collecting || matches!(selector, Selector::Oracle);
        let mut evaluated: Vec<Option<Candidate>> = if evaluate_all {
            candidates
                .par_iter()
                .enumerate()
                .map(|(k, nb)| repair_candidate(instance, &ctx, nb, config, run_seed, i, k + 1).map(Some))
                .collect::<Result<_, _>>()?
        } else {
            (0..config.n1).map(|_| None).collect()
        };
        let chosen = match selector {
            Selector::Random => select_random(config.n1, &mut rng_from(run_seed, &[SELECT_STREAM, i as u64])),
            Selector::Oracle => {
                let ys: Vec<f64> = evaluated.iter().map(|c| c.as_ref().map_or(0.0, |c| c.improvement)).collect();
                select_oracle(&ys)
            }
            Selector::Model(m) => {
                let xs = features.as_ref().expect("model selection extracts features");
                let potentials = xs.iter().map(|x| m.predict_potential(x)).collect::<Result<Vec<_>, _>>()?;
                select_oracle(&potentials)
            }
        };
        if evaluated[chosen - 1].is_none() {
            evaluated[chosen - 1] = Some(repair_candidate(instance, &ctx, &candidates[chosen - 1], config, run_seed, i, chosen)?);
        }
        let improvements: Vec<Option<f64>> = evaluated.iter().map(|c| c.as_ref().map(|c| c.improvement)).collect();
        if let (Some((run_id, data)), Some(xs)) = (sink.as_mut(), features) {
            for (k, x) in xs.into_iter().enumerate() {
                data.push(Sample {
                    run_id: run_id.to_string(),
                    iteration: i,
                    neighborhood_index: k + 1,
                    features: x,
                    y: improvements[k].expect("collection evaluates every candidate"),
                })?;
            }
        }
        let pick = evaluated.swap_remove(chosen - 1).expect("chosen candidate is evaluated");
        let accepted = pick.improvement > 0.0 && accept(pick.cost, ctx.cost);
        if accepted {
            ctx = SolutionContext::new(instance, pick.solution)?;
            if ctx.cost < best_cost {
                best_cost = ctx.cost;
                best = ctx.solution.clone();
            }
        }
        log::info!("{} {}: iteration {i}, chose {chosen}, cost {:.3}, best {best_cost:.3}", instance.name(), selector.name(), ctx.cost);
        trace.records.push(IterationRecord {
            iteration: i,
            chosen: Some(chosen),
            improvements,
            accepted,
            current_cost: ctx.cost,
            best_cost,
        });
    }
    Ok(RunOutcome { final_solution: ctx.solution, best_solution: best, trace })
}

/// Runs the LNS from a feasible initial solution. Only the oracle repairs
/// every candidate; the other selectors repair just the chosen one.
pub fn lns_run(
    instance: &Instance,
    initial: Solution,
    config: &RunConfig,
    selector: Selector,
) -> Result<RunOutcome, PipelineError> {
    drive(instance, initial, config, selector, config.seed, None)
}

/// Seed of run `run` on `instance` in a multi-run experiment.
pub fn run_seed(seed: u64, instance: &Instance, run: usize) -> u64 {
    derive_seed(seed, &[name_key(instance.name()), run as u64])
}

pub fn run_id(instance: &Instance, run: usize) -> String {
    format!("{}#r{run}", instance.name())
}

/// Data collection: every candidate is featurized and repaired, and `n1`
/// samples are stored per iteration. Runs `runs` are numbered globally so
/// that separate calls can use disjoint seeds.
pub fn collect_data(
    instances: &[Instance],
    strategy: Selector,
    config: &RunConfig,
    runs: std::ops::Range<usize>,
) -> Result<Dataset, PipelineError> {
    let jobs: Vec<(usize, usize)> =
        (0..instances.len()).flat_map(|k| runs.clone().map(move |r| (k, r))).collect();
    let parts = jobs
        .par_iter()
        .map(|&(k, r)| collect_run(&instances[k], strategy, config, r))
        .collect::<Result<Vec<_>, _>>()?;
    let mut data = Dataset::new(feature_names(&config.selector));
    for part in parts {
        data.extend(part)?;
    }
    Ok(data)
}

/// One collection run, as used by [`collect_data`].
pub fn collect_run(instance: &Instance, strategy: Selector, config: &RunConfig, run: usize) -> Result<Dataset, PipelineError> {
    let initial = construct_initial(instance, &config.repair)?;
    let mut data = Dataset::new(feature_names(&config.selector));
    let id = run_id(instance, run);
    drive(instance, initial, config, strategy, run_seed(config.seed, instance, run), Some((&id, &mut data)))?;
    Ok(data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub threshold: f64,
    pub split_ratio: f64,
    pub forest: ForestParams,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self { threshold: 0.0, split_ratio: 0.6, forest: ForestParams::default(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub train_count: usize,
    pub validation_count: usize,
    pub validation_accuracy: Option<f64>,
}

/// Trains on a seeded share of the samples and reports accuracy on the rest.
pub fn train_model(data: &Dataset, config: &TrainerConfig) -> Result<(ForestModel, TrainReport), PipelineError> {
    if data.is_empty() {
        return Err(LearningError::EmptyDataset.into());
    }
    let (train_idx, valid_idx) = split(data.len(), config.split_ratio, config.seed);
    let labels = label(&data.improvements(), config.threshold);
    let rows: Vec<Vec<f64>> = train_idx.iter().map(|&i| data.samples[i].features.clone()).collect();
    let train_labels: Vec<bool> = train_idx.iter().map(|&i| labels[i]).collect();
    let model = train_forest(&data.feature_names, &rows, &train_labels, &config.forest, config.threshold, config.seed)?;
    let validation_accuracy = if valid_idx.is_empty() {
        None
    } else {
        let vrows: Vec<Vec<f64>> = valid_idx.iter().map(|&i| data.samples[i].features.clone()).collect();
        let vlabels: Vec<bool> = valid_idx.iter().map(|&i| labels[i]).collect();
        Some(accuracy(&model, &vrows, &vlabels)?)
    };
    Ok((model, TrainReport { train_count: train_idx.len(), validation_count: valid_idx.len(), validation_accuracy }))
}

#[derive(Debug, Clone)]
pub struct GuidelinesOutcome {
    /// ML1, ML2, ... in round order.
    pub models: Vec<ForestModel>,
    /// Samples collected in each round.
    pub round_data: Vec<Dataset>,
    /// Union of all rounds.
    pub cumulative: Dataset,
}

/// Round 1 collects with random selection and trains ML1; round k collects
/// with ML(k-1) and trains MLk on everything collected so far.
pub fn guidelines_loop(
    instances: &[Instance],
    rounds: usize,
    runs_per_round: usize,
    config: &RunConfig,
    trainer: &TrainerConfig,
) -> Result<GuidelinesOutcome, PipelineError> {
    if rounds == 0 {
        return Err(PipelineError::NoRounds);
    }
    let mut models: Vec<ForestModel> = Vec::with_capacity(rounds);
    let mut round_data = Vec::with_capacity(rounds);
    let mut cumulative = Dataset::new(feature_names(&config.selector));
    for k in 0..rounds {
        let strategy = models.last().map_or(Selector::Random, Selector::Model);
        let runs = k * runs_per_round..(k + 1) * runs_per_round;
        let data = collect_data(instances, strategy, config, runs)?;
        cumulative.extend(data.clone())?;
        round_data.push(data);
        let trainer_k = TrainerConfig { seed: derive_seed(trainer.seed, &[k as u64]), ..trainer.clone() };
        let (model, report) = train_model(&cumulative, &trainer_k)?;
        log::info!(
            "round {}: {} samples, validation accuracy {:?}",
            k + 1,
            cumulative.len(),
            report.validation_accuracy
        );
        models.push(model);
    }
    Ok(GuidelinesOutcome { models, round_data, cumulative })
}

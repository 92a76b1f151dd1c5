use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};

use lens_core::evaluation::{
    convergence_series, improvements_of, validate_model, validate_oracle, validate_uniform_random, validation_tsv,
    ResultRow, ResultTable,
};
use lens_core::features::feature_names;
use lens_core::instance_io::{generate_batch, parse_instance, write_instance, BatchSpec};
use lens_core::learning::{Dataset, ForestModel};
use lens_core::model::Instance;
use lens_core::pipeline::{
    check_model_layout, collect_data, lns_run, run_seed, RunConfig, RunTrace, Selector, TrainerConfig,
};
use lens_core::repair::construct_initial;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{resolve_seed, Effective, FileConfig};
use crate::manifest::{manifest_path, write_atomic, Manifest};
use crate::{CliError, CollectArgs, GenerateArgs, ReportArgs, SolveArgs, TrainArgs};

fn read_instance(path: &Path) -> Result<Instance, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    parse_instance(&text).map_err(|e| CliError::input(path, e))
}

/// A single file, or every instance file of a directory in name order.
fn instance_files(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let entries = std::fs::read_dir(path).map_err(|e| CliError::input(path, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| CliError::input(path, e))?.path();
        let skip = p.extension().is_some_and(|e| e == "json" || e == "tmp");
        if p.is_file() && !skip {
            files.push(p);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::input(path, "no instance files"));
    }
    Ok(files)
}

fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(|e| CliError::input(path, e))?;
    Dataset::read_tsv(file).map_err(|e| CliError::input(path, e))
}

fn dataset_bytes(data: &Dataset) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    data.write_tsv(&mut buf).map_err(|e| CliError::Data(e.to_string()))?;
    Ok(buf)
}

fn load_model(path: &Path) -> Result<ForestModel, CliError> {
    ForestModel::load(path).map_err(|e| CliError::input(path, e))
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))
}

fn run_config(file: &FileConfig, iters: Option<usize>, n1: Option<usize>, seed: u64) -> RunConfig {
    let defaults = RunConfig::default();
    RunConfig {
        iterations: iters.or(file.iters).unwrap_or(defaults.iterations),
        n1: n1.or(file.n1).unwrap_or(defaults.n1),
        seed,
        selector: file.selector.unwrap_or(defaults.selector),
        repair: file.repair.clone().unwrap_or(defaults.repair),
    }
}

/// Label of a model selector in traces and tables: the file stem.
fn model_label(path: &Path) -> String {
    path.file_stem().map_or_else(|| "model".to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let seed = resolve_seed(args.common.seed, &file)?;
    let base = read_instance(&args.base)?;
    let batch = generate_batch(&BatchSpec::table1(base, seed))?;
    let effective = Effective { command: "generate", seed, settings: () };
    let mut manifest = Manifest::new("generate", &effective, vec![seed]).input(&args.base)?;
    for g in &batch {
        let path = args.out.join(format!("{}.txt", g.instance.name()));
        write_atomic(&path, write_instance(&g.instance).as_bytes())?;
        log::info!("wrote {} ({} restrictive windows)", path.display(), g.restrictive.len());
        manifest = manifest.output(&path)?;
        println!("{}", path.display());
    }
    manifest.write(&args.out.join("manifest.json"))
}

#[derive(Debug, Serialize)]
struct CollectSettings<'a> {
    strategy: &'a str,
    runs: usize,
    run: &'a RunConfig,
}

/// Per-instance shards live in `<out>.shards/` and are reused when their
/// manifest matches the current settings and instance contents.
fn shard_dir(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".shards");
    PathBuf::from(s)
}

fn reusable_shard(shard: &Path, manifest: &Manifest, expected_rows: usize) -> Option<Dataset> {
    let old = Manifest::read(&manifest_path(shard)).ok()?;
    if old.config_digest != manifest.config_digest || old.inputs != manifest.inputs {
        return None;
    }
    let data = read_dataset(shard).ok()?;
    (data.len() == expected_rows).then_some(data)
}

pub fn collect(args: &CollectArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let seed = resolve_seed(args.common.seed, &file)?;
    let config = run_config(&file, args.iters, args.n1, seed);
    let runs = args.runs.or(file.runs).unwrap_or(1);
    let model = match args.strategy.as_str() {
        "random" => None,
        path => {
            let path = Path::new(path);
            let model = load_model(path)?;
            check_model_layout(&model, &config.selector).map_err(|e| CliError::input(path, e))?;
            Some(model)
        }
    };
    let strategy = model.as_ref().map_or(Selector::Random, Selector::Model);
    let files = instance_files(&args.instances)?;
    let instances = files.iter().map(|p| read_instance(p)).collect::<Result<Vec<_>, _>>()?;
    let names: BTreeSet<&str> = instances.iter().map(Instance::name).collect();
    if names.len() != instances.len() {
        return Err(CliError::input(&args.instances, "instance names are not unique"));
    }

    let settings = CollectSettings { strategy: &args.strategy, runs, run: &config };
    let effective = Effective { command: "collect", seed, settings };
    let shards = shard_dir(&args.out);
    let expected_rows = runs * config.iterations * config.n1;
    let parts = pool(args.jobs.or(file.jobs))?.install(|| {
        files
            .par_iter()
            .zip(&instances)
            .map(|(path, inst)| -> Result<Dataset, CliError> {
                let shard = shards.join(format!("{}.tsv", inst.name()));
                let mut manifest = Manifest::new("collect", &effective, vec![seed]).input(path)?;
                if let Some(model) = args.strategy.ne("random").then(|| Path::new(&args.strategy)) {
                    manifest = manifest.input(model)?;
                }
                if let Some(data) = reusable_shard(&shard, &manifest, expected_rows) {
                    log::info!("{}: reusing {}", inst.name(), shard.display());
                    return Ok(data);
                }
                let data = collect_data(std::slice::from_ref(inst), strategy, &config, 0..runs)?;
                write_atomic(&shard, &dataset_bytes(&data)?)?;
                manifest.output(&shard)?.write(&manifest_path(&shard))?;
                Ok(data)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    let mut merged = Dataset::new(feature_names(&config.selector));
    let mut order: Vec<(&str, Dataset)> = instances.iter().map(Instance::name).zip(parts).collect();
    order.sort_by(|a, b| a.0.cmp(b.0));
    for (_, part) in order {
        merged.extend(part)?;
    }
    write_atomic(&args.out, &dataset_bytes(&merged)?)?;
    let mut manifest = Manifest::new("collect", &effective, vec![seed]);
    for p in &files {
        manifest = manifest.input(p)?;
    }
    manifest.output(&args.out)?.write(&manifest_path(&args.out))?;
    println!("rows\t{}", merged.len());
    Ok(())
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let seed = resolve_seed(args.common.seed, &file)?;
    let mut data: Option<Dataset> = None;
    for path in &args.samples {
        let part = read_dataset(path)?;
        match &mut data {
            None => data = Some(part),
            Some(d) => d.extend(part).map_err(|e| CliError::input(path, e))?,
        }
    }
    let data = data.expect("clap requires at least one sample file");
    if data.is_empty() {
        return Err(CliError::Input("sample files contain no rows".into()));
    }
    let defaults = TrainerConfig::default();
    let trainer = TrainerConfig {
        threshold: args.threshold.or(file.threshold).unwrap_or(defaults.threshold),
        split_ratio: args.split.or(file.split).unwrap_or(defaults.split_ratio),
        forest: file.forest.unwrap_or(defaults.forest),
        seed,
    };
    log::info!("training on {} samples with {} features", data.len(), data.feature_names.len());
    let (model, report) = lens_core::pipeline::train_model(&data, &trainer)?;
    let mut json = model.to_json();
    json.push('\n');
    write_atomic(&args.out, json.as_bytes())?;

    let effective = Effective { command: "train", seed, settings: &trainer };
    let mut manifest = Manifest::new("train", &effective, vec![seed]);
    for p in &args.samples {
        manifest = manifest.input(p)?;
    }
    manifest.output(&args.out)?.write(&manifest_path(&args.out))?;
    println!("train_samples\t{}", report.train_count);
    println!("validation_samples\t{}", report.validation_count);
    match report.validation_accuracy {
        Some(a) => println!("validation_accuracy\t{a:.4}"),
        None => println!("validation_accuracy\tNA"),
    }
    Ok(())
}

/// `<out>` for a single run, `<out>.r<k>` otherwise.
fn run_path(out: &Path, run: usize, runs: usize) -> PathBuf {
    if runs == 1 {
        return out.to_path_buf();
    }
    let mut s = out.as_os_str().to_owned();
    s.push(format!(".r{run}"));
    PathBuf::from(s)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Debug, Serialize)]
struct SolveSettings<'a> {
    selector: &'a str,
    runs: usize,
    run: &'a RunConfig,
}

pub fn solve(args: &SolveArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let seed = resolve_seed(args.common.seed, &file)?;
    let config = run_config(&file, args.iters, args.n1, seed);
    let runs = args.runs.or(file.runs).unwrap_or(1).max(1);
    let instance = read_instance(&args.instance)?;
    let model = match args.selector.as_str() {
        "random" | "oracle" => None,
        path => {
            let path = Path::new(path);
            let model = load_model(path)?;
            check_model_layout(&model, &config.selector).map_err(|e| CliError::input(path, e))?;
            Some(model)
        }
    };
    let (selector, label) = match (args.selector.as_str(), &model) {
        (_, Some(m)) => (Selector::Model(m), model_label(Path::new(&args.selector))),
        ("oracle", None) => (Selector::Oracle, "oracle".to_string()),
        _ => (Selector::Random, "random".to_string()),
    };
    let initial = construct_initial(&instance, &config.repair).map_err(|e| CliError::Data(e.to_string()))?;
    let settings = SolveSettings { selector: &args.selector, runs, run: &config };
    let effective = Effective { command: "solve", seed, settings };

    let outcomes = pool(args.jobs.or(file.jobs))?.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|r| {
                let cfg = RunConfig { seed: run_seed(seed, &instance, r), ..config.clone() };
                lns_run(&instance, initial.clone(), &cfg, selector).map(|o| (r, cfg.seed, o))
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    for (r, run_seed, outcome) in outcomes {
        let trace_path = run_path(&args.out, r, runs);
        let solution_path = with_suffix(&trace_path, ".solution");
        let mut trace = Vec::new();
        outcome.trace.write_tsv(&mut trace).map_err(|e| CliError::input(&trace_path, e))?;
        write_atomic(&trace_path, &trace)?;
        write_atomic(&solution_path, outcome.best_solution.to_route_lines().as_bytes())?;
        let mut manifest = Manifest::new("solve", &effective, vec![seed, run_seed])
            .input(&args.instance)?
            .label("instance", instance.name())
            .label("selector", label.as_str())
            .label("run", r.to_string())
            .label("iterations", config.iterations.to_string());
        if model.is_some() {
            manifest = manifest.input(Path::new(&args.selector))?;
        }
        manifest.output(&trace_path)?.output(&solution_path)?.write(&manifest_path(&trace_path))?;
        println!("{}\t{}", trace_path.display(), outcome.trace.final_best());
    }
    Ok(())
}

/// Reads `instance value` lines; blank lines, `#` comments and a header
/// whose value is not numeric are skipped.
fn read_bks(path: &Path) -> Result<BTreeMap<String, f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(CliError::input(path, format!("line {}: expected `instance value`", i + 1)));
        };
        match value.parse::<f64>() {
            Ok(v) => {
                out.insert(name.to_string(), v);
            }
            Err(_) if i == 0 => {}
            Err(e) => return Err(CliError::input(path, format!("line {}: {e}", i + 1))),
        }
    }
    Ok(out)
}

struct LoadedTrace {
    instance: String,
    selector: String,
    trace: RunTrace,
}

fn load_traces(dir: &Path) -> Result<Vec<LoadedTrace>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::input(dir, e))?;
    let mut manifests: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| CliError::input(dir, e))?.path();
        if p.to_string_lossy().ends_with(".manifest.json") {
            manifests.push(p);
        }
    }
    manifests.sort();
    let mut out = Vec::new();
    for mpath in manifests {
        let manifest = Manifest::read(&mpath)?;
        if manifest.command != "solve" {
            continue;
        }
        let text = mpath.to_string_lossy();
        let trace_path = PathBuf::from(text.trim_end_matches(".manifest.json"));
        let label = |k: &str| {
            manifest.labels.get(k).cloned().ok_or_else(|| CliError::input(&mpath, format!("missing label {k}")))
        };
        let file = File::open(&trace_path).map_err(|e| CliError::input(&trace_path, e))?;
        let trace = RunTrace::read_tsv(file).map_err(|e| CliError::input(&trace_path, e))?;
        out.push(LoadedTrace { instance: label("instance")?, selector: label("selector")?, trace });
    }
    if out.is_empty() {
        return Err(CliError::input(dir, "no solve traces found"));
    }
    Ok(out)
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn report(args: &ReportArgs) -> Result<(), CliError> {
    let traces = load_traces(&args.traces)?;
    let iterations = traces[0].trace.iterations();
    if let Some(bad) = traces.iter().find(|t| t.trace.iterations() != iterations) {
        return Err(CliError::input(
            &args.traces,
            format!(
                "mismatched iteration counts: {} has {} iterations, expected {iterations}",
                bad.instance,
                bad.trace.iterations()
            ),
        ));
    }
    let bks = args.bks.as_deref().map(read_bks).transpose()?.unwrap_or_default();

    let mut grouped: BTreeMap<&str, BTreeMap<&str, Vec<&RunTrace>>> = BTreeMap::new();
    for t in &traces {
        grouped.entry(&t.instance).or_default().entry(&t.selector).or_default().push(&t.trace);
    }
    let models: Vec<String> = traces
        .iter()
        .map(|t| t.selector.as_str())
        .filter(|s| *s != "oracle" && *s != "random")
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_string)
        .collect();

    let avg = |by: &BTreeMap<&str, Vec<&RunTrace>>, sel: &str| -> Option<f64> {
        by.get(sel).and_then(|ts| mean(&ts.iter().map(|t| t.final_best()).collect::<Vec<_>>()))
    };
    let rows: Vec<ResultRow> = grouped
        .iter()
        .map(|(inst, by)| ResultRow {
            instance: inst.to_string(),
            bks: bks.get(*inst).copied(),
            oracle: avg(by, "oracle"),
            random: avg(by, "random"),
            models: models.iter().map(|m| avg(by, m)).collect(),
        })
        .collect();
    if rows.iter().any(|r| r.oracle.is_none() || r.random.is_none()) {
        log::warn!("gap columns need both oracle and random traces; missing gaps are reported as NA");
    }
    let table = ResultTable { models, rows };
    let tsv = table.to_tsv()?;
    write_atomic(&args.out.join(format!("results_{iterations}.tsv")), tsv.as_bytes())?;
    write_atomic(&args.out.join(format!("results_{iterations}.txt")), table.to_text()?.as_bytes())?;
    print!("{tsv}");

    for (inst, by) in &grouped {
        let columns: Vec<(&str, Vec<f64>)> = by
            .iter()
            .map(|(sel, ts)| {
                let owned: Vec<RunTrace> = ts.iter().map(|t| (*t).clone()).collect();
                convergence_series(&owned).map(|s| (*sel, s))
            })
            .collect::<Result<_, _>>()?;
        let mut text = String::from("iteration");
        for (sel, _) in &columns {
            let _ = write!(text, "\t{sel}");
        }
        text.push('\n');
        for i in 0..=iterations {
            let _ = write!(text, "{i}");
            for (_, s) in &columns {
                let _ = write!(text, "\t{}", s[i]);
            }
            text.push('\n');
        }
        write_atomic(&args.out.join(format!("convergence_{inst}.tsv")), text.as_bytes())?;
    }

    if !args.samples.is_empty() {
        validation_reports(args)?;
    } else if !args.models.is_empty() {
        return Err(CliError::Input("--models needs --samples".into()));
    }

    let effective = Effective { command: "report", seed: 0, settings: iterations };
    let mut manifest = Manifest::new("report", &effective, Vec::new());
    for p in args.bks.iter().chain(&args.samples).chain(&args.models) {
        manifest = manifest.input(p)?;
    }
    manifest.write(&args.out.join("manifest.json"))
}

fn validation_reports(args: &ReportArgs) -> Result<(), CliError> {
    let mut data: Option<Dataset> = None;
    for path in &args.samples {
        let part = read_dataset(path)?;
        match &mut data {
            None => data = Some(part),
            Some(d) => d.extend(part).map_err(|e| CliError::input(path, e))?,
        }
    }
    let data = data.expect("checked by the caller");
    let groups = data.iteration_groups();
    let mut reports = vec![
        ("oracle".to_string(), validate_oracle(&groups)?),
        ("random".to_string(), validate_uniform_random(&improvements_of(&groups))?),
    ];
    for path in &args.models {
        let model = load_model(path)?;
        if model.feature_names != data.feature_names {
            return Err(CliError::input(path, "model and samples use different feature layouts"));
        }
        reports.push((model_label(path), validate_model(&groups, &model)?));
    }
    for (name, report) in reports {
        write_atomic(&args.out.join(format!("validation_{name}.tsv")), validation_tsv(&report).as_bytes())?;
    }
    Ok(())
}

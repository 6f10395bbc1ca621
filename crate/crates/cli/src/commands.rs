use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dbnkit::dbn::{is_acyclic, DbnStructure, FamilySpec, ParentRef, TrajectoryDataset};
use dbnkit::eval::{
    auroc, auroc_by_class, edge_scores, fit_parameters, render_table, run_benchmark, score_split, shd_with, temporal_split,
    write_csv, EdgeUniverse, LoglikMode, ReversalCost,
};
use dbnkit::io::{read_dataset_files, read_json, to_json, write_dataset_files, write_json, DomainHint, TruthFile};
use dbnkit::learn::{Deadline, LearnerConfig, LearnerReport};
use dbnkit::scoring::{family_score, format_score, ScoreKind, ScoreOptions};
use dbnkit::simulate::regime_datasets;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::{Cli, Command, ConfigError, DataArgs, DomainArg, UsageError};

const DEFAULT_OUT: &str = "out";

pub fn run(cli: Cli) -> Result<()> {
    let workers = cli.workers;
    match cli.command {
        Command::Generate { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            init_workers(workers.or(cfg.workers))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| DEFAULT_OUT.into());
            generate(&cfg, &out)
        }
        Command::Learn { data, learner, hyper, seed, timeout_sec, out } => {
            init_workers(workers)?;
            learn(&data, &learner, hyper.as_deref(), seed, timeout_sec, out.as_deref())
        }
        Command::Eval { report, truth, data, statics, domain, fraction, strict_loglik, out } => {
            init_workers(workers)?;
            let mode = if strict_loglik { LoglikMode::Strict } else { LoglikMode::Smoothed };
            eval(&report, &truth, data.as_deref(), statics.as_deref(), domain, fraction, mode, out.as_deref())
        }
        Command::Benchmark { config, seed, out, timeout_sec, strict_loglik } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            init_workers(workers.or(cfg.workers))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if timeout_sec.is_some() {
                cfg.timeout_sec = timeout_sec;
            }
            cfg.strict_loglik |= strict_loglik;
            let out = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| DEFAULT_OUT.into());
            benchmark(&cfg, &out)
        }
        Command::Score { data, node, parents, score, ess, p } => {
            init_workers(workers)?;
            score_family(&data, node, &parents, &score, ess, p)
        }
        Command::Check { data, structure } => check(&data, structure.as_deref()),
    }
}

fn init_workers(workers: Option<usize>) -> Result<()> {
    if let Some(n) = workers {
        if n == 0 {
            bail!(UsageError("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool")?;
    }
    Ok(())
}

fn hint(domain: DomainArg) -> DomainHint {
    match domain {
        DomainArg::Discrete => DomainHint::Discrete,
        DomainArg::Continuous => DomainHint::Continuous,
    }
}

fn load_data(args: &DataArgs) -> Result<TrajectoryDataset> {
    Ok(read_dataset_files(&args.data, args.statics.as_deref(), hint(args.domain))?)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct FileHash {
    path: String,
    sha256: String,
}

/// Hashes `files`, recording paths relative to `root` with `/` separators.
fn hash_files(root: &Path, files: &[PathBuf]) -> Result<Vec<FileHash>> {
    let mut out = Vec::new();
    for f in files {
        let bytes = fs::read(f).with_context(|| format!("reading {}", f.display()))?;
        let rel = f.strip_prefix(root).unwrap_or(f);
        let path = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        out.push(FileHash { path, sha256: sha256_hex(&bytes) });
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn generate(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let regime = cfg.regime.spec()?;
    let template = cfg.generator()?;
    let instances = regime_datasets(&regime, &template, cfg.replicates)?;
    let mut files = Vec::new();
    let mut listed = Vec::new();
    for inst in &instances {
        let t = inst.triple;
        let rel = format!("n{}_N{}_T{}/rep{:02}", t.n, t.n_traj, t.horizon, inst.replicate + 1);
        let dir = out.join(&rel);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let truth = TruthFile { structure: inst.truth.structure.clone(), domain: inst.truth.domain.clone() };
        write_json(&truth, &dir.join("truth.json"))?;
        write_json(&inst.truth.params, &dir.join("params.json"))?;
        files.push(dir.join("truth.json"));
        files.push(dir.join("params.json"));
        files.extend(write_dataset_files(&inst.dataset, &dir)?);
        listed.push(json!({
            "triple": [t.n, t.n_traj, t.horizon],
            "replicate": inst.replicate + 1,
            "seed": inst.seed,
            "dir": rel,
        }));
    }
    let manifest = json!({
        "command": "generate",
        "seed": cfg.seed,
        "regime": regime.label,
        "replicates": cfg.replicates,
        "instances": listed,
        "files": hash_files(out, &files)?,
    });
    let text = to_json(&manifest)?;
    write_text(&out.join("manifest.json"), &text)?;
    print!("{text}");
    Ok(())
}

fn learner_config(name: &str, hyper: Option<&str>, seed: Option<u64>) -> Result<LearnerConfig> {
    if !LearnerConfig::NAMES.contains(&name) {
        bail!(UsageError(format!("unknown learner {name:?}; valid learners: {}", LearnerConfig::NAMES.join(", "))));
    }
    let mut obj = match hyper {
        None => serde_json::Map::new(),
        Some(h) => match serde_json::from_str::<Value>(h) {
            Ok(Value::Object(m)) => m,
            Ok(_) => bail!(ConfigError("--hyper must be a JSON object".into())),
            Err(e) => bail!(ConfigError(format!("--hyper: {e}"))),
        },
    };
    if obj.contains_key("name") {
        bail!(ConfigError("--hyper must not set `name`; use --learner".into()));
    }
    obj.insert("name".into(), Value::String(name.into()));
    let cfg: LearnerConfig = serde_json::from_value(Value::Object(obj)).map_err(|e| ConfigError(format!("--hyper: {e}")))?;
    Ok(match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn learn(
    data: &DataArgs,
    learner: &str,
    hyper: Option<&str>,
    seed: Option<u64>,
    timeout_sec: Option<f64>,
    out: Option<&Path>,
) -> Result<()> {
    let cfg = learner_config(learner, hyper, seed)?;
    let dataset = load_data(data)?;
    let report = cfg.run(&dataset, &Deadline::from_secs(timeout_sec))?;
    emit(&to_json(&report)?, out)
}

/// Accepts a truth sidecar, a learner report or a bare structure.
fn load_structure(path: &Path) -> Result<(DbnStructure, Option<TruthFile>, Option<LearnerReport>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(t) = serde_json::from_str::<TruthFile>(&text) {
        return Ok((t.structure.clone(), Some(t), None));
    }
    if let Ok(r) = serde_json::from_str::<LearnerReport>(&text) {
        return Ok((r.structure.clone(), None, Some(r)));
    }
    match serde_json::from_str::<DbnStructure>(&text) {
        Ok(s) => Ok((s, None, None)),
        Err(e) => Err(dbnkit::DbnError::Parse(format!("{}: not a truth file, report or structure ({e})", path.display())).into()),
    }
}

#[allow(clippy::too_many_arguments)]
fn eval(
    report_path: &Path,
    truth_path: &Path,
    data: Option<&Path>,
    statics: Option<&Path>,
    domain: Option<DomainArg>,
    fraction: f64,
    mode: LoglikMode,
    out: Option<&Path>,
) -> Result<()> {
    let report: LearnerReport = read_json(report_path)?;
    let (truth, truth_file, _) = load_structure(truth_path)?;
    let universe = EdgeUniverse::covering(&report.structure, &truth)?;
    let indicator = universe.indicator(&truth)?;
    let scores = edge_scores(&report, &universe)?;
    let roc = auroc(&scores, &indicator)?;
    let by_class: BTreeMap<String, Value> = auroc_by_class(&universe, &scores, &indicator)?
        .into_iter()
        .map(|(c, a)| {
            let name = serde_json::to_value(c).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
            (name, json!({ "auroc": a.value, "degenerate": a.degenerate }))
        })
        .collect();
    let mut result = json!({
        "shd": shd_with(&report.structure, &truth, ReversalCost::Two)?,
        "shd_reversal_one": shd_with(&report.structure, &truth, ReversalCost::One)?,
        "auroc": roc.value,
        "auroc_degenerate": roc.degenerate,
        "auroc_by_class": by_class,
    });
    if let Some(d) = data {
        let hint = match (domain, truth_file) {
            (Some(a), _) => hint(a),
            (None, Some(t)) => DomainHint::Exact(t.domain),
            (None, None) => bail!(UsageError("--domain is required when the truth file carries no domain".into())),
        };
        let dataset = read_dataset_files(d, statics, hint)?;
        let split = temporal_split(&dataset, fraction, report.structure.p)?;
        let params = fit_parameters(&split.train, &report.structure, mode)?;
        let (train_ll, test_ll) = score_split(&split, &report.structure, &params)?;
        result["train_ll"] = json!(train_ll);
        result["test_ll"] = json!(test_ll);
        result["test_transitions"] = json!(split.test_transitions().len());
    }
    emit(&to_json(&result)?, out)
}

fn benchmark(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let spec = cfg.benchmark_spec()?;
    let rows = run_benchmark(&spec)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut csv = Vec::new();
    write_csv(&rows, &mut csv)?;
    let csv_path = out.join("results.csv");
    fs::write(&csv_path, &csv).with_context(|| format!("writing {}", csv_path.display()))?;
    let table = render_table(&rows);
    let table_path = out.join("table.txt");
    write_text(&table_path, &table)?;
    let failures: Vec<Value> = rows
        .iter()
        .filter_map(|r| r.message.as_ref().map(|m| json!({ "learner": r.learner, "n": r.n, "replicate": r.replicate, "status": r.status, "message": m })))
        .collect();
    let manifest = json!({
        "command": "benchmark",
        "seed": cfg.seed,
        "regime": spec.regime.label,
        "replicates": spec.replicates,
        "learners": spec.learners.iter().map(|l| l.label.clone()).collect::<Vec<_>>(),
        "cells": rows.len(),
        "failures": failures,
        "files": hash_files(out, &[csv_path, table_path])?,
    });
    write_text(&out.join("manifest.json"), &to_json(&manifest)?)?;
    print!("{table}");
    Ok(())
}

fn score_family(data: &DataArgs, node: usize, parents: &str, score: &str, ess: f64, p: usize) -> Result<()> {
    let kind: ScoreKind = score.parse().map_err(|e| UsageError(format!("--score: {e}")))?;
    let parents = parents
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse::<ParentRef>)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| UsageError(format!("--parents: {e}")))?;
    let dataset = load_data(data)?;
    let family = FamilySpec::new(node, parents)?;
    let opts = ScoreOptions { ess, first: p.max(1), ..ScoreOptions::default() };
    let s = family_score(&dataset, &family, kind, &opts)?;
    println!("{}", format_score(s));
    Ok(())
}

fn check(data: &DataArgs, structure: Option<&Path>) -> Result<()> {
    let dataset = load_data(data)?;
    println!(
        "data: {} trajectories, {} time steps, {} dynamic and {} static variables, {} transitions",
        dataset.n_traj(),
        dataset.horizon(),
        dataset.n_x(),
        dataset.n_z(),
        dataset.transition_count(1)
    );
    if let Some(path) = structure {
        let (s, _, _) = load_structure(path)?;
        s.validate()?;
        if s.n_x != dataset.n_x() || s.n_z != dataset.n_z() {
            return Err(dbnkit::DbnError::Dimension(format!(
                "structure has {} dynamic and {} static variables, data has {} and {}",
                s.n_x,
                s.n_z,
                dataset.n_x(),
                dataset.n_z()
            ))
            .into());
        }
        if !is_acyclic(&s.intra)? {
            bail!(dbnkit::DbnError::Model("intra-slice graph is cyclic".into()));
        }
        println!("structure: {} edges, max lag {}, acyclic", s.edge_count(), s.p);
    }
    Ok(())
}

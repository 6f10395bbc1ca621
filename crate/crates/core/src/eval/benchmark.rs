use std::fmt::{self, Write as _};
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{auroc, edge_scores, shd_with, EdgeUniverse, ReversalCost};
use super::split::{holdout_loglik, LoglikMode, DEFAULT_TRAIN_FRACTION};
use crate::error::{DbnError, Result};
use crate::learn::{Deadline, LearnerConfig};
use crate::simulate::{regime_datasets, GeneratorConfig, RegimeInstance, RegimeLabel, RegimeSpec, DEFAULT_REPLICATES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerEntry {
    /// Column label; distinguishes grid points of the same learner.
    pub label: String,
    pub config: LearnerConfig,
}

impl LearnerEntry {
    pub fn new(config: LearnerConfig) -> Self {
        Self { label: config.name().to_string(), config }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub regime: RegimeSpec,
    /// Template for every instance; its seed is the master seed.
    pub generator: GeneratorConfig,
    pub learners: Vec<LearnerEntry>,
    pub replicates: usize,
    pub fraction: f64,
    pub timeout_sec: Option<f64>,
    pub loglik: LoglikMode,
    pub reversal: ReversalCost,
    /// Fill `wall_ms`. Off by default so repeated runs give identical output.
    pub record_time: bool,
}

impl BenchmarkSpec {
    pub fn new(regime: RegimeSpec, generator: GeneratorConfig, learners: Vec<LearnerEntry>) -> Self {
        Self {
            regime,
            generator,
            learners,
            replicates: DEFAULT_REPLICATES,
            fraction: DEFAULT_TRAIN_FRACTION,
            timeout_sec: None,
            loglik: LoglikMode::default(),
            reversal: ReversalCost::default(),
            record_time: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellStatus {
    #[serde(rename = "ok")]
    Ok,
    /// Time limit exceeded.
    #[serde(rename = "TL")]
    TimeLimit,
    /// Refused by a learner's problem-size guard.
    #[serde(rename = "OOM")]
    OutOfMemory,
    #[serde(rename = "E")]
    Error,
}

impl CellStatus {
    pub fn of(err: &DbnError) -> Self {
        match err {
            DbnError::Timeout => CellStatus::TimeLimit,
            DbnError::Size(_) => CellStatus::OutOfMemory,
            _ => CellStatus::Error,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::TimeLimit => "TL",
            CellStatus::OutOfMemory => "OOM",
            CellStatus::Error => "E",
        }
    }
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub regime: RegimeLabel,
    pub n: usize,
    pub n_traj: usize,
    pub horizon: usize,
    pub learner: String,
    pub replicate: usize,
    pub seed: u64,
    pub shd: Option<usize>,
    pub auroc: Option<f64>,
    pub train_ll: Option<f64>,
    pub test_ll: Option<f64>,
    pub status: CellStatus,
    /// Failure message of a non-ok cell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub wall_ms: Option<u64>,
}

struct CellMetrics {
    shd: usize,
    auroc: f64,
    train_ll: f64,
    test_ll: f64,
}

fn run_cell(spec: &BenchmarkSpec, inst: &RegimeInstance, learner: &LearnerConfig) -> Result<CellMetrics> {
    let deadline = Deadline::from_secs(spec.timeout_sec);
    let learner = learner.clone().with_seed(inst.seed);
    let h = holdout_loglik(&inst.dataset, &learner, spec.fraction, spec.loglik, &deadline)?;
    let truth = &inst.truth.structure;
    let universe = EdgeUniverse::covering(&h.report.structure, truth)?;
    let scores = edge_scores(&h.report, &universe)?;
    let roc = auroc(&scores, &universe.indicator(truth)?)?;
    Ok(CellMetrics {
        shd: shd_with(&h.report.structure, truth, spec.reversal)?,
        auroc: roc.value,
        train_ll: h.train_ll,
        test_ll: h.test_ll,
    })
}

/// Every (triple, replicate, learner) cell of the sweep, in that order.
/// Cell failures are recorded as a status; only invalid generator settings
/// abort the sweep.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<Vec<BenchmarkRow>> {
    if spec.learners.is_empty() {
        return Err(DbnError::Range("benchmark needs at least one learner".into()));
    }
    let instances = regime_datasets(&spec.regime, &spec.generator, spec.replicates)?;
    let jobs: Vec<(usize, usize)> =
        (0..instances.len()).flat_map(|i| (0..spec.learners.len()).map(move |l| (i, l))).collect();
    let rows = crate::par::map_slice(&jobs, |&(i, l)| {
        let inst = &instances[i];
        let entry = &spec.learners[l];
        let start = Instant::now();
        let outcome = run_cell(spec, inst, &entry.config);
        let wall_ms = spec.record_time.then(|| start.elapsed().as_millis() as u64);
        let mut row = BenchmarkRow {
            regime: spec.regime.label,
            n: inst.triple.n,
            n_traj: inst.triple.n_traj,
            horizon: inst.triple.horizon,
            learner: entry.label.clone(),
            replicate: inst.replicate + 1,
            seed: inst.seed,
            shd: None,
            auroc: None,
            train_ll: None,
            test_ll: None,
            status: CellStatus::Ok,
            message: None,
            wall_ms,
        };
        match outcome {
            Ok(m) => {
                row.shd = Some(m.shd);
                row.auroc = Some(m.auroc);
                row.train_ll = Some(m.train_ll);
                row.test_ll = Some(m.test_ll);
            }
            Err(e) => {
                row.status = CellStatus::of(&e);
                row.message = Some(e.to_string());
            }
        }
        row
    });
    Ok(rows)
}

pub const CSV_HEADER: [&str; 13] =
    ["regime", "n", "N", "T", "learner", "replicate", "seed", "shd", "auroc", "train_ll", "test_ll", "status", "wall_ms"];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn regime_name(l: RegimeLabel) -> &'static str {
    match l {
        RegimeLabel::Favorable => "favorable",
        RegimeLabel::HighDimensional => "high_dimensional",
        RegimeLabel::Custom => "custom",
    }
}

/// Raw results, one line per cell; missing values are `NA`.
pub fn write_csv<W: Write>(rows: &[BenchmarkRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            regime_name(r.regime).to_string(),
            r.n.to_string(),
            r.n_traj.to_string(),
            r.horizon.to_string(),
            r.learner.clone(),
            r.replicate.to_string(),
            r.seed.to_string(),
            opt(r.shd),
            opt(r.auroc),
            opt(r.train_ll),
            opt(r.test_ll),
            r.status.to_string(),
            opt(r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; `None` below two values or with infinite values.
    pub sd: Option<f64>,
    pub count: usize,
}

pub fn mean_sd(values: &[f64]) -> Option<Summary> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (n >= 2 && mean.is_finite())
        .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
    Some(Summary { mean, sd, count: n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Shd,
    Auroc,
    TrainLl,
    TestLl,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Shd, Metric::Auroc, Metric::TrainLl, Metric::TestLl];

    fn title(self) -> &'static str {
        match self {
            Metric::Shd => "SHD",
            Metric::Auroc => "AUROC",
            Metric::TrainLl => "train log-likelihood",
            Metric::TestLl => "test log-likelihood",
        }
    }

    fn value(self, r: &BenchmarkRow) -> Option<f64> {
        match self {
            Metric::Shd => r.shd.map(|v| v as f64),
            Metric::Auroc => r.auroc,
            Metric::TrainLl => r.train_ll,
            Metric::TestLl => r.test_ll,
        }
    }

    fn decimals(self) -> usize {
        match self {
            Metric::Auroc => 3,
            _ => 1,
        }
    }
}

/// One table cell: `mean±sd` over ok replicates. A cell with no ok
/// replicate shows the most common failure status.
fn cell(rows: &[&BenchmarkRow], metric: Metric) -> String {
    let ok: Vec<f64> = rows.iter().filter(|r| r.status == CellStatus::Ok).filter_map(|r| metric.value(r)).collect();
    let Some(s) = mean_sd(&ok) else {
        let mut best = (0, CellStatus::Error);
        for st in [CellStatus::TimeLimit, CellStatus::OutOfMemory, CellStatus::Error] {
            let c = rows.iter().filter(|r| r.status == st).count();
            if c > best.0 {
                best = (c, st);
            }
        }
        return if rows.is_empty() { "-".into() } else { best.1.to_string() };
    };
    let d = metric.decimals();
    let mut out = match s.sd {
        Some(sd) => format!("{:.d$}±{:.d$}", s.mean, sd),
        None => format!("{:.d$}", s.mean),
    };
    if s.count < rows.len() {
        let _ = write!(out, " ({}/{})", s.count, rows.len());
    }
    out
}

/// Aligned mean±sd tables, one block per metric: learners down, size
/// triples across.
pub fn render_table(rows: &[BenchmarkRow]) -> String {
    let mut triples: Vec<(usize, usize, usize)> = Vec::new();
    let mut learners: Vec<&str> = Vec::new();
    for r in rows {
        let t = (r.n, r.n_traj, r.horizon);
        if !triples.contains(&t) {
            triples.push(t);
        }
        if !learners.contains(&r.learner.as_str()) {
            learners.push(&r.learner);
        }
    }
    let mut out = String::new();
    for metric in Metric::ALL {
        let mut grid: Vec<Vec<String>> = Vec::new();
        let mut header = vec![metric.title().to_string()];
        header.extend(triples.iter().map(|(n, m, t)| format!("({n},{m},{t})")));
        grid.push(header);
        for &l in &learners {
            let mut line = vec![l.to_string()];
            for &t in &triples {
                let sel: Vec<&BenchmarkRow> =
                    rows.iter().filter(|r| r.learner == l && (r.n, r.n_traj, r.horizon) == t).collect();
                line.push(cell(&sel, metric));
            }
            grid.push(line);
        }
        let widths: Vec<usize> =
            (0..grid[0].len()).map(|c| grid.iter().map(|row| row[c].chars().count()).max().unwrap_or(0)).collect();
        for row in &grid {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    let pad = widths[c] - s.chars().count();
                    if c == 0 {
                        format!("{s}{}", " ".repeat(pad))
                    } else {
                        format!("{}{s}", " ".repeat(pad))
                    }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

//! Experiment configuration files (TOML).
//!
//! ```toml
//! seed = 7
//! replicates = 3
//! timeout_sec = 60.0
//!
//! [regime]
//! name = "custom"            # favorable | high_dimensional | custom
//! triples = [[3, 10, 10]]    # custom only
//!
//! [generator]
//! family = "cpt"
//! temperature = 0.3
//!
//! [[learners]]
//! name = "dynotears"
//! [learners.grid]
//! lambda_w = [0.01, 0.05, 0.1]
//! ```
//!
//! Every key of a `grid` table is swept; a learner with grid keys expands
//! into the cartesian product, in key order, each labelled
//! `name[key=value,...]`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dbnkit::eval::{BenchmarkSpec, LearnerEntry, LoglikMode, ReversalCost, DEFAULT_TRAIN_FRACTION};
use dbnkit::learn::LearnerConfig;
use dbnkit::simulate::{GeneratorConfig, RegimeLabel, RegimeSpec, SizeTriple, DEFAULT_REPLICATES};
use serde::Deserialize;

use crate::ConfigError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeConfig {
    pub name: RegimeLabel,
    pub triples: Option<Vec<[usize; 3]>>,
}

impl RegimeConfig {
    pub fn spec(&self) -> Result<RegimeSpec> {
        let spec = match (self.name, &self.triples) {
            (RegimeLabel::Custom, Some(t)) => RegimeSpec::custom(t.iter().map(|&[n, m, h]| SizeTriple::new(n, m, h)).collect()),
            (RegimeLabel::Custom, None) => bail!(ConfigError("regime: custom regime requires `triples`".into())),
            (_, Some(_)) => bail!(ConfigError("regime: `triples` is only allowed with name = \"custom\"".into())),
            (RegimeLabel::Favorable, None) => RegimeSpec::favorable(),
            (RegimeLabel::HighDimensional, None) => RegimeSpec::high_dimensional(),
        };
        spec.validate().map_err(|e| ConfigError(format!("regime: {e}")))?;
        Ok(spec)
    }
}

fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}

fn default_fraction() -> f64 {
    DEFAULT_TRAIN_FRACTION
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub regime: RegimeConfig,
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub learners: Vec<toml::Table>,
    pub timeout_sec: Option<f64>,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    #[serde(default)]
    pub strict_loglik: bool,
    #[serde(default)]
    pub reversal_cost: ReversalCost,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    /// Fill the wall_ms column. Timed output is not reproducible.
    #[serde(default)]
    pub record_time: bool,
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ConfigError(format!("{origin}: {e}")).into())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Generator template carrying the master seed.
    pub fn generator(&self) -> Result<GeneratorConfig> {
        let g = GeneratorConfig { seed: self.seed, ..self.generator.clone() };
        g.validate().map_err(|e| ConfigError(format!("generator: {e}")))?;
        Ok(g)
    }

    pub fn learners(&self) -> Result<Vec<LearnerEntry>> {
        let mut out = Vec::new();
        for (k, table) in self.learners.iter().enumerate() {
            out.extend(expand_learner(table).map_err(|e| ConfigError(format!("learners[{k}]: {e}")))?);
        }
        Ok(out)
    }

    pub fn benchmark_spec(&self) -> Result<BenchmarkSpec> {
        let learners = self.learners()?;
        if learners.is_empty() {
            bail!(ConfigError("missing field `learners`: a benchmark needs at least one learner".into()));
        }
        if self.replicates == 0 {
            bail!(ConfigError("replicates must be positive".into()));
        }
        let mut spec = BenchmarkSpec::new(self.regime.spec()?, self.generator()?, learners);
        spec.replicates = self.replicates;
        spec.fraction = self.fraction;
        spec.timeout_sec = self.timeout_sec;
        spec.loglik = if self.strict_loglik { LoglikMode::Strict } else { LoglikMode::Smoothed };
        spec.reversal = self.reversal_cost;
        spec.record_time = self.record_time;
        Ok(spec)
    }
}

fn render(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Expands one `[[learners]]` table into its grid points.
pub fn expand_learner(table: &toml::Table) -> std::result::Result<Vec<LearnerEntry>, String> {
    let mut base = table.clone();
    let label = match base.remove("label") {
        None => None,
        Some(toml::Value::String(s)) => Some(s),
        Some(_) => return Err("`label` must be a string".into()),
    };
    let grid = match base.remove("grid") {
        None => toml::Table::new(),
        Some(toml::Value::Table(t)) => t,
        Some(_) => return Err("`grid` must be a table of arrays".into()),
    };
    let name = match base.get("name") {
        Some(toml::Value::String(s)) => s.clone(),
        Some(_) => return Err("`name` must be a string".into()),
        None => return Err(format!("missing field `name` (one of {})", LearnerConfig::NAMES.join(", "))),
    };
    if !LearnerConfig::NAMES.contains(&name.as_str()) {
        return Err(format!("unknown learner {name:?}; valid learners: {}", LearnerConfig::NAMES.join(", ")));
    }
    let axes: Vec<(String, Vec<toml::Value>)> = grid
        .into_iter()
        .map(|(k, v)| match v {
            toml::Value::Array(a) if !a.is_empty() => Ok((k, a)),
            _ => Err(format!("grid.{k} must be a non-empty array")),
        })
        .collect::<std::result::Result<_, _>>()?;
    let base_label = label.unwrap_or_else(|| name.clone());
    let mut points: Vec<Vec<(String, toml::Value)>> = vec![Vec::new()];
    for (k, values) in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((k.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    points
        .into_iter()
        .map(|point| {
            let mut t = base.clone();
            for (k, v) in &point {
                t.insert(k.clone(), v.clone());
            }
            let config: LearnerConfig = toml::Value::Table(t).try_into().map_err(|e: toml::de::Error| e.to_string())?;
            let label = if point.is_empty() {
                base_label.clone()
            } else {
                let kv: Vec<String> = point.iter().map(|(k, v)| format!("{k}={}", render(v))).collect();
                format!("{base_label}[{}]", kv.join(","))
            };
            Ok(LearnerEntry { label, config })
        })
        .collect()
}

//! Structure learners.
//!
//! - [`exact_search`]: globally optimal decomposable-score search by dynamic
//!   programming over node subsets.
//! - [`hill_climb`]: steepest ascent over single-edge moves with restarts.
//! - [`continuous_oneshot`]: L1-penalized linear SEM under a smooth
//!   acyclicity constraint, solved by an augmented Lagrangian.
//! - [`bounded_oneshot`]: exhaustive search over small linear SEMs whose
//!   active weights are bounded away from zero.
//!
//! Lagged self-dependence is always proposed as an auto lag, never as an
//! inter self edge.

mod bounded;
mod continuous;
mod dp;
mod exact;
mod hill;
mod nnls;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use bounded::{bounded_oneshot, bounded_oneshot_until, min_active_weights, BoundedConfig};
pub use continuous::{continuous_oneshot, continuous_oneshot_until, ContinuousConfig};
pub use exact::{exact_search, exact_search_until, EXACT_MAX_NODES};
pub use hill::{hill_climb, hill_climb_until, improving_moves, Move};
pub use nnls::nnls_gram;

use crate::dbn::{DbnStructure, ParameterSet, ParentRef, TrajectoryDataset};
use crate::error::{DbnError, Result};
use crate::scoring::{BgeHyper, ScoreKind, ScoreOptions};

/// Wall-clock limit checked cooperatively between moves and iterations.
#[derive(Debug, Clone, Copy)]
pub struct Deadline {
    at: Option<Instant>,
}

impl Deadline {
    pub fn never() -> Self {
        Self { at: None }
    }

    pub fn after(limit: Duration) -> Self {
        Self { at: Instant::now().checked_add(limit) }
    }

    pub fn from_secs(secs: Option<f64>) -> Self {
        match secs {
            Some(s) if s.is_finite() && s >= 0.0 => Self::after(Duration::from_secs_f64(s)),
            _ => Self::never(),
        }
    }

    pub fn expired(&self) -> bool {
        self.at.is_some_and(|t| Instant::now() >= t)
    }

    pub fn check(&self) -> Result<()> {
        if self.expired() {
            Err(DbnError::Timeout)
        } else {
            Ok(())
        }
    }
}

/// Settings shared by the score-based learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub score: ScoreKind,
    /// Maximum lag considered for auto-lag parents.
    pub p: usize,
    pub max_intra_parents: usize,
    /// Cap on inter, auto and static parents combined.
    pub max_temporal_parents: usize,
    pub intra: bool,
    pub inter: bool,
    pub auto: bool,
    #[serde(rename = "static")]
    pub static_: bool,
    /// Hill-climb starts: the empty graph plus `restarts - 1` random graphs.
    pub restarts: usize,
    /// Hill-climb move budget per start.
    pub max_moves: usize,
    /// Edge probability of random hill-climb starts.
    pub restart_edge_prob: f64,
    pub seed: u64,
    /// Dirichlet equivalent sample size for BDe.
    pub ess: f64,
    pub bge: BgeHyper,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            score: ScoreKind::Bic,
            p: 1,
            max_intra_parents: 3,
            max_temporal_parents: 3,
            intra: true,
            inter: true,
            auto: true,
            static_: true,
            restarts: 5,
            max_moves: 10_000,
            restart_edge_prob: 0.2,
            seed: 0,
            ess: 1.0,
            bge: BgeHyper::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(DbnError::Range("p must be >= 1".into()));
        }
        if self.restarts == 0 || self.max_moves == 0 {
            return Err(DbnError::Range("restarts and max_moves must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.restart_edge_prob) {
            return Err(DbnError::Range("restart_edge_prob must lie in [0,1]".into()));
        }
        if !(self.ess > 0.0) {
            return Err(DbnError::Range("ess must be positive".into()));
        }
        Ok(())
    }

    /// Score options with the common transition window `max(1, p)`.
    pub fn score_options(&self) -> ScoreOptions {
        ScoreOptions { ess: self.ess, bge: self.bge, first: self.p.max(1) }
    }

    /// Candidate intra parents of `node`, ascending.
    pub fn intra_candidates(&self, n_x: usize, node: usize) -> Vec<ParentRef> {
        if !self.intra {
            return Vec::new();
        }
        (0..n_x).filter(|&j| j != node).map(ParentRef::Intra).collect()
    }

    /// Candidate inter, auto and static parents of `node` in canonical order.
    pub fn temporal_candidates(&self, n_x: usize, n_z: usize, node: usize) -> Vec<ParentRef> {
        let mut c = Vec::new();
        if self.inter {
            c.extend((0..n_x).filter(|&j| j != node).map(ParentRef::Inter));
        }
        if self.auto {
            c.extend((1..=self.p).map(ParentRef::Auto));
        }
        if self.static_ {
            c.extend((0..n_z).map(ParentRef::Static));
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

/// Raw weight matrices of a one-shot learner, indexed `[from][to]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub w: Vec<Vec<f64>>,
    /// One `n_x x n_x` matrix per lag `1..=p`.
    pub a: Vec<Vec<Vec<f64>>>,
    /// `n_z x n_x`.
    pub b: Vec<Vec<f64>>,
}

/// Output of every learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerReport {
    pub learner: String,
    pub structure: DbnStructure,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParameterSet>,
    /// Score-based learners: the summed family score of `structure`.
    /// One-shot learners: the log-likelihood of `params`.
    pub score: f64,
    pub score_kind: String,
    /// Minimized objective of one-shot learners.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightReport>,
    pub seed: u64,
    /// Left empty by learners; callers that time runs fill it in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

/// A learner together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum LearnerConfig {
    Exact(SearchConfig),
    HillClimb(SearchConfig),
    Dynotears(ContinuousConfig),
    Bounded(BoundedConfig),
}

impl LearnerConfig {
    pub const NAMES: [&'static str; 4] = ["exact", "hill_climb", "dynotears", "bounded"];

    pub fn name(&self) -> &'static str {
        match self {
            LearnerConfig::Exact(_) => "exact",
            LearnerConfig::HillClimb(_) => "hill_climb",
            LearnerConfig::Dynotears(_) => "dynotears",
            LearnerConfig::Bounded(_) => "bounded",
        }
    }

    /// Default hyperparameters for a learner name.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "exact" => LearnerConfig::Exact(SearchConfig::default()),
            "hill_climb" => LearnerConfig::HillClimb(SearchConfig::default()),
            "dynotears" => LearnerConfig::Dynotears(ContinuousConfig::default()),
            "bounded" => LearnerConfig::Bounded(BoundedConfig::default()),
            _ => {
                return Err(DbnError::Parse(format!(
                    "unknown learner {name:?}; valid learners: {}",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }

    /// Replaces the configured seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            LearnerConfig::Exact(c) | LearnerConfig::HillClimb(c) => c.seed = seed,
            LearnerConfig::Dynotears(c) => c.seed = seed,
            LearnerConfig::Bounded(c) => c.seed = seed,
        }
        self
    }

    pub fn run(&self, data: &TrajectoryDataset, deadline: &Deadline) -> Result<LearnerReport> {
        match self {
            LearnerConfig::Exact(c) => exact_search_until(data, c, deadline),
            LearnerConfig::HillClimb(c) => hill_climb_until(data, c, deadline),
            LearnerConfig::Dynotears(c) => continuous_oneshot_until(data, c, deadline),
            LearnerConfig::Bounded(c) => bounded_oneshot_until(data, c, deadline),
        }
    }
}

/// Subsets of `items` with at most `max` elements, in order of size and then
/// lexicographically by position.
pub(crate) fn subsets_up_to<T: Clone>(items: &[T], max: usize) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    let n = items.len();
    for k in 1..=max.min(n) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(idx.iter().map(|&i| items[i].clone()).collect());
            let mut pos = k;
            while pos > 0 && idx[pos - 1] == n - k + pos - 1 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            idx[pos - 1] += 1;
            for q in pos..k {
                idx[q] = idx[q - 1] + 1;
            }
        }
    }
    out
}

pub(crate) fn require_transitions(data: &TrajectoryDataset, first: usize) -> Result<()> {
    if data.transition_count(first) == 0 {
        return Err(DbnError::Data(format!("no transitions with child time >= {first}")));
    }
    Ok(())
}

use serde::{Deserialize, Serialize};

use crate::dbn::{DbnStructure, NodeParams, ParameterSet, TrajectoryDataset};
use crate::error::{DbnError, Result};
use crate::learn::{Deadline, LearnerConfig, LearnerReport};
use crate::scoring::{count_transitions_from, dirichlet_posterior, fit_linear_gaussian, loglik_from, mle_cpt, DirichletPrior};

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

/// Train/test partition of every trajectory at the same cut.
///
/// Train holds slices `0..=cut` and scores child times `first..=cut`. Test
/// holds slices `cut + 1 - first..=T` so its first `first` rows are lag
/// context only; it scores child times `cut + 1..=T`.
#[derive(Debug, Clone)]
pub struct TemporalSplit {
    pub train: TrajectoryDataset,
    pub test: TrajectoryDataset,
    pub cut: usize,
    /// `max(1, p)`: first scored child time in either part, in its own coordinates.
    pub first: usize,
}

impl TemporalSplit {
    /// Scored `(traj, t)` pairs of the train part, in original time.
    pub fn train_transitions(&self) -> Vec<(usize, usize)> {
        self.train.transitions(self.first).collect()
    }

    pub fn test_transitions(&self) -> Vec<(usize, usize)> {
        let offset = self.cut + 1 - self.first;
        self.test.transitions(self.first).map(|(n, t)| (n, t + offset)).collect()
    }
}

/// Splits at `cut = floor(fraction * T)` for models of maximum lag `p`.
pub fn temporal_split(data: &TrajectoryDataset, fraction: f64, p: usize) -> Result<TemporalSplit> {
    let horizon = data.horizon();
    if horizon < 3 {
        return Err(DbnError::Split(format!("need at least 3 time steps, have {horizon}")));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DbnError::Split(format!("fraction {fraction} outside (0, 1]")));
    }
    // the epsilon keeps products like 0.7 * 30 from rounding down
    let cut = (fraction * horizon as f64 + 1e-9).floor() as usize;
    let first = p.max(1);
    if cut >= horizon {
        return Err(DbnError::Split(format!("fraction {fraction} leaves no test transitions")));
    }
    if cut < first {
        return Err(DbnError::Split(format!("cut {cut} leaves no train transitions at lag {p}")));
    }
    Ok(TemporalSplit {
        train: data.time_window(0, cut)?,
        test: data.time_window(cut + 1 - first, horizon)?,
        cut,
        first,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoglikMode {
    /// Discrete kernels use the posterior mean under a unit-ESS Dirichlet
    /// prior, so unseen test events have positive probability.
    #[default]
    Smoothed,
    /// Count-ratio estimates; an unseen test event gives `-inf`.
    Strict,
}

/// Parameters of `structure` fit on `data` with child times from `max(1, p)`.
pub fn fit_parameters(data: &TrajectoryDataset, structure: &DbnStructure, mode: LoglikMode) -> Result<ParameterSet> {
    let first = structure.p.max(1);
    let nodes = structure
        .families()
        .iter()
        .map(|fam| {
            if data.is_discrete() {
                let counts = count_transitions_from(data, fam, first)?;
                let cpt = match mode {
                    LoglikMode::Smoothed => dirichlet_posterior(&counts, &DirichletPrior::default()).mean(),
                    LoglikMode::Strict => mle_cpt(&counts),
                };
                Ok(NodeParams::Cpt(cpt))
            } else {
                fit_linear_gaussian(data, fam, first).map(|f| NodeParams::LinearGaussian(f.params))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParameterSet { nodes })
}

/// Train and test log-likelihoods of a fixed model.
pub fn score_split(split: &TemporalSplit, structure: &DbnStructure, params: &ParameterSet) -> Result<(f64, f64)> {
    if structure.p.max(1) > split.first {
        return Err(DbnError::Split(format!("split serves lag {} but the model uses lag {}", split.first, structure.p)));
    }
    Ok((
        loglik_from(&split.train, structure, params, split.first)?,
        loglik_from(&split.test, structure, params, split.first)?,
    ))
}

#[derive(Debug, Clone)]
pub struct HoldoutResult {
    pub report: LearnerReport,
    pub params: ParameterSet,
    pub train_ll: f64,
    pub test_ll: f64,
}

/// Maximum lag a learner may place on an edge.
pub fn learner_lag(learner: &LearnerConfig) -> usize {
    match learner {
        LearnerConfig::Exact(c) | LearnerConfig::HillClimb(c) => c.p,
        LearnerConfig::Dynotears(c) => c.p,
        LearnerConfig::Bounded(_) => 1,
    }
}

/// Learns on the train part, refits parameters there and scores both parts.
pub fn holdout_loglik(
    data: &TrajectoryDataset,
    learner: &LearnerConfig,
    fraction: f64,
    mode: LoglikMode,
    deadline: &Deadline,
) -> Result<HoldoutResult> {
    let split = temporal_split(data, fraction, learner_lag(learner))?;
    let report = learner.run(&split.train, deadline)?;
    let params = fit_parameters(&split.train, &report.structure, mode)?;
    let (train_ll, test_ll) = score_split(&split, &report.structure, &params)?;
    Ok(HoldoutResult { report, params, train_ll, test_ll })
}

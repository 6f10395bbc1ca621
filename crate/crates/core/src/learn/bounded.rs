//! Exhaustive linear SEM search with weights bounded away from zero.
//!
//! Each active weight carries a sign `s` and must satisfy `s w >= b`. For a
//! fixed support and sign pattern, substituting `w = s (u + b)` leaves a
//! nonnegative least-squares problem in `u`. The objective is the residual
//! sum of squares plus a per-edge penalty that depends on the edge class and
//! sign. Intra supports are combined into a DAG by the same dynamic program
//! as exact search.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dp::{best_dag, LocalTable};
use super::nnls::nnls_gram;
use super::{require_transitions, subsets_up_to, Deadline, LearnerReport, TraceEntry, WeightReport};
use crate::dbn::{DbnStructure, FamilySpec, LinearGaussian, NodeParams, ParameterSet, ParentRef, TrajectoryDataset};
use crate::error::{DbnError, Result};
use crate::scoring::{loglik, SIGMA2_FLOOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundedConfig {
    /// Minimum magnitude of an active intra weight.
    pub b_w: f64,
    /// Minimum magnitude of an active lag weight.
    pub b_a: f64,
    pub lambda_w_pos: f64,
    pub lambda_w_neg: f64,
    pub lambda_a_pos: f64,
    pub lambda_a_neg: f64,
    pub max_nodes: usize,
    /// Drop candidate parents whose absolute correlation with the child is below this.
    pub screen: Option<f64>,
    pub seed: u64,
}

impl Default for BoundedConfig {
    fn default() -> Self {
        Self {
            b_w: 0.1,
            b_a: 0.1,
            lambda_w_pos: 1.0,
            lambda_w_neg: 1.0,
            lambda_a_pos: 1.0,
            lambda_a_neg: 1.0,
            max_nodes: 4,
            screen: None,
            seed: 0,
        }
    }
}

impl BoundedConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.b_w > 0.0 && self.b_a > 0.0) {
            return Err(DbnError::Range("weight bounds must be positive".into()));
        }
        let l = [self.lambda_w_pos, self.lambda_w_neg, self.lambda_a_pos, self.lambda_a_neg];
        if l.iter().any(|v| !(*v >= 0.0)) {
            return Err(DbnError::Range("penalties must be nonnegative".into()));
        }
        Ok(())
    }

    fn bound(&self, p: ParentRef) -> f64 {
        if matches!(p, ParentRef::Intra(_)) {
            self.b_w
        } else {
            self.b_a
        }
    }

    fn penalty(&self, p: ParentRef, positive: bool) -> f64 {
        match (matches!(p, ParentRef::Intra(_)), positive) {
            (true, true) => self.lambda_w_pos,
            (true, false) => self.lambda_w_neg,
            (false, true) => self.lambda_a_pos,
            (false, false) => self.lambda_a_neg,
        }
    }
}

/// Centred sufficient statistics of one node's regression.
struct NodeData {
    candidates: Vec<ParentRef>,
    cols: Vec<Vec<f64>>,
    y: Vec<f64>,
    gram: DMatrix<f64>,
    cross: DVector<f64>,
}

struct Fit {
    objective: f64,
    sse: f64,
    weights: Vec<f64>,
}

impl NodeData {
    /// Best sign pattern and weights for the candidates at positions `idx`.
    fn fit(&self, idx: &[usize], cfg: &BoundedConfig) -> Fit {
        let k = idx.len();
        let mut best: Option<Fit> = None;
        for signs in 0..(1usize << k) {
            let s: Vec<f64> = (0..k).map(|a| if signs >> a & 1 == 0 { 1.0 } else { -1.0 }).collect();
            let sb: Vec<f64> = (0..k).map(|a| s[a] * cfg.bound(self.candidates[idx[a]])).collect();
            let kss = DMatrix::from_fn(k, k, |a, b| self.gram[(idx[a], idx[b])]);
            let cs = DVector::from_fn(k, |a, _| self.cross[idx[a]]);
            let sbv = DVector::from_vec(sb.clone());
            let ksb = &kss * &sbv;
            // target y - X_S (s o b), columns s_j x_j
            let h = DVector::from_fn(k, |a, _| s[a] * (cs[a] - ksb[a]));
            let g = DMatrix::from_fn(k, k, |a, b| s[a] * s[b] * kss[(a, b)]);
            let u = nnls_gram(&g, &h);
            let weights: Vec<f64> = (0..k).map(|a| s[a] * (u[a] + cfg.bound(self.candidates[idx[a]]))).collect();
            // explicit residuals: the Gram form cancels badly on collinear columns
            let sse: f64 = (0..self.y.len())
                .map(|r| {
                    let fit: f64 = idx.iter().zip(&weights).map(|(&c, w)| w * self.cols[c][r]).sum();
                    (self.y[r] - fit).powi(2)
                })
                .sum();
            let pen: f64 = (0..k).map(|a| cfg.penalty(self.candidates[idx[a]], s[a] > 0.0)).sum();
            let objective = sse + pen;
            if best.as_ref().is_none_or(|b| objective < b.objective) {
                best = Some(Fit { objective, sse, weights });
            }
        }
        best.expect("at least one sign pattern")
    }
}

pub fn bounded_oneshot(data: &TrajectoryDataset, cfg: &BoundedConfig) -> Result<LearnerReport> {
    bounded_oneshot_until(data, cfg, &Deadline::never())
}

/// Global minimizer over intra DAGs and lag-1 supports. Static covariates
/// are not used.
pub fn bounded_oneshot_until(data: &TrajectoryDataset, cfg: &BoundedConfig, deadline: &Deadline) -> Result<LearnerReport> {
    cfg.validate()?;
    if data.is_discrete() {
        return Err(DbnError::Domain("bounded one-shot learning requires continuous data".into()));
    }
    let n = data.n_x();
    if n > cfg.max_nodes {
        return Err(DbnError::Size(format!("bounded one-shot supports at most {} dynamic variables, got {n}", cfg.max_nodes)));
    }
    require_transitions(data, 1)?;
    let rows: Vec<(usize, usize)> = data.transitions(1).collect();
    let mf = rows.len() as f64;
    let column = |p: Option<ParentRef>, i: usize| -> Vec<f64> {
        rows.iter()
            .map(|&(traj, t)| match p {
                None => data.x(traj, t, i),
                Some(p) => data.parent_value(traj, t, i, p),
            })
            .collect()
    };
    let centre = |v: Vec<f64>| -> (Vec<f64>, f64) {
        let mean = v.iter().sum::<f64>() / mf;
        (v.into_iter().map(|x| x - mean).collect(), mean)
    };

    let mut locals: Vec<LocalTable> = Vec::with_capacity(n);
    let mut chosen: Vec<HashMap<usize, Fit>> = Vec::with_capacity(n);
    let mut means: Vec<(f64, Vec<(ParentRef, f64)>)> = Vec::with_capacity(n);
    for i in 0..n {
        let (y, ymean) = centre(column(None, i));
        let mut candidates: Vec<ParentRef> = (0..n).filter(|&j| j != i).map(ParentRef::Inter).collect();
        candidates.extend((0..n).filter(|&j| j != i).map(ParentRef::Intra));
        candidates.push(ParentRef::Auto(1));
        candidates.sort();
        let mut cols = Vec::new();
        let mut kept = Vec::new();
        let mut col_means = Vec::new();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        for &c in &candidates {
            let (x, mean) = centre(column(Some(c), i));
            if let Some(thr) = cfg.screen {
                let xx: f64 = x.iter().map(|v| v * v).sum();
                let xy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
                let corr = if xx > 0.0 && yy > 0.0 { xy / (xx * yy).sqrt() } else { 0.0 };
                if corr.abs() < thr {
                    continue;
                }
            }
            kept.push(c);
            col_means.push((c, mean));
            cols.push(x);
        }
        let k = kept.len();
        let gram = DMatrix::from_fn(k, k, |a, b| cols[a].iter().zip(&cols[b]).map(|(u, v)| u * v).sum());
        let cross = DVector::from_fn(k, |a, _| cols[a].iter().zip(&y).map(|(u, v)| u * v).sum());
        let nd = NodeData { candidates: kept.clone(), cols, y, gram, cross };

        let positions: Vec<usize> = (0..k).collect();
        let subsets = subsets_up_to(&positions, k);
        let fits = crate::par::map_slice(&subsets, |idx| nd.fit(idx, cfg));
        deadline.check()?;
        let mut table: LocalTable = vec![None; 1 << n];
        let mut best_fit: HashMap<usize, Fit> = HashMap::new();
        for (idx, fit) in subsets.iter().zip(fits) {
            let fam = FamilySpec::new(i, idx.iter().map(|&a| kept[a]).collect())?;
            let mask = fam.parents().iter().fold(0usize, |m, p| match p {
                ParentRef::Intra(j) => m | 1 << j,
                _ => m,
            });
            let score = -fit.objective;
            let better = match &table[mask] {
                None => true,
                Some((s, f)) => score > *s || (score == *s && fam.parents() < f.parents()),
            };
            if better {
                // weights follow kept order, which is the canonical parent order
                table[mask] = Some((score, fam));
                best_fit.insert(mask, fit);
            }
        }
        locals.push(table);
        chosen.push(best_fit);
        means.push((ymean, col_means));
    }

    let families = best_dag(&locals, deadline)?;
    let structure = DbnStructure::from_families(n, data.n_z(), 1, &families);
    let mut objective = 0.0;
    let mut nodes = Vec::with_capacity(n);
    let mut w = vec![vec![0.0; n]; n];
    let mut a = vec![vec![0.0; n]; n];
    for (i, fam) in families.iter().enumerate() {
        let mask = fam.parents().iter().fold(0usize, |m, p| match p {
            ParentRef::Intra(j) => m | 1 << j,
            _ => m,
        });
        let fit = &chosen[i][&mask];
        objective += fit.objective;
        let (ymean, col_means) = &means[i];
        let mut beta0 = *ymean;
        for (&p, &wt) in fam.parents().iter().zip(&fit.weights) {
            let mean = col_means.iter().find(|(c, _)| *c == p).expect("kept candidate").1;
            beta0 -= wt * mean;
            match p {
                ParentRef::Intra(j) => w[j][i] = wt,
                ParentRef::Inter(j) => a[j][i] = wt,
                ParentRef::Auto(_) => a[i][i] = wt,
                ParentRef::Static(_) => unreachable!("static parents are not candidates"),
            }
        }
        nodes.push(NodeParams::LinearGaussian(LinearGaussian {
            beta0,
            beta: fit.weights.clone(),
            sigma2: (fit.sse / mf).max(SIGMA2_FLOOR),
        }));
    }
    let params = ParameterSet { nodes };
    let score = loglik(data, &structure, &params)?;
    Ok(LearnerReport {
        learner: "bounded".into(),
        structure,
        params: Some(params),
        score,
        score_kind: "ll".into(),
        objective: Some(objective),
        converged: true,
        trace: vec![TraceEntry { iteration: 0, score: -objective, h: None }],
        weights: Some(WeightReport { w, a: vec![a], b: vec![vec![0.0; n]; data.n_z()] }),
        seed: cfg.seed,
        wall_ms: None,
    })
}

/// Smallest active weight magnitude of a bounded report, split into
/// (intra, lag). `None` when no edge of that class is active.
pub fn min_active_weights(report: &LearnerReport) -> (Option<f64>, Option<f64>) {
    let Some(wr) = &report.weights else { return (None, None) };
    let min_nz = |it: &mut dyn Iterator<Item = f64>| it.filter(|v| *v != 0.0).map(f64::abs).reduce(f64::min);
    let wmin = min_nz(&mut wr.w.iter().flatten().copied());
    let amin = min_nz(&mut wr.a.iter().flatten().flatten().copied());
    (wmin, amin)
}

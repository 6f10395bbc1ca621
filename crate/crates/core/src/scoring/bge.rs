//! Bayesian Gaussian equivalent (BGe) score under a normal-Wishart prior.
//!
//! The prior over a family's joint vector `v = (child, parents)` of dimension
//! `d` is `W ~ Wishart(alpha_w, T^{-1})` (density proportional to
//! `|W|^{(alpha_w-d-1)/2} exp(-tr(T W)/2)`) and `mu | W ~ N(nu, (alpha_mu W)^{-1})`.
//! Usable transitions are stacked as exchangeable rows. The family score is
//! `log p(child, parents) - log p(parents)`, each term the closed-form
//! marginal of the matching sub-vector.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::counts::check_family;
use super::logistic::family_design;
use crate::dbn::{FamilySpec, TrajectoryDataset};
use crate::error::{DbnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BgeHyper {
    /// Prior mean strength.
    pub alpha_mu: f64,
    /// Wishart degrees of freedom; `None` means family dimension + 2.
    pub alpha_w: Option<f64>,
    /// `T = prior_scale * I`.
    pub prior_scale: f64,
    /// `nu = prior_mean * 1`.
    pub prior_mean: f64,
}

impl Default for BgeHyper {
    fn default() -> Self {
        Self { alpha_mu: 1.0, alpha_w: None, prior_scale: 1.0, prior_mean: 0.0 }
    }
}

impl BgeHyper {
    pub fn degrees_of_freedom(&self, dim: usize) -> f64 {
        self.alpha_w.unwrap_or(dim as f64 + 2.0)
    }
}

fn ln_multivariate_gamma(l: usize, a: f64) -> f64 {
    let lf = l as f64;
    let mut s = lf * (lf - 1.0) / 4.0 * std::f64::consts::PI.ln();
    for j in 1..=l {
        s += ln_gamma(a + (1.0 - j as f64) / 2.0);
    }
    s
}

fn ln_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| DbnError::Model("BGe posterior scale is not positive definite".into()))?;
    Ok(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

fn sub(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

/// Family score from raw rows whose first column is the child.
///
/// Rows are sorted before accumulation so the value does not depend on the
/// order in which transitions are supplied.
pub fn bge_rows_score(rows: &[Vec<f64>], hyper: &BgeHyper) -> Result<f64> {
    let m = rows.len();
    if m == 0 {
        return Ok(0.0);
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) || d == 0 {
        return Err(DbnError::Dimension("ragged BGe rows".into()));
    }
    let alpha_w = hyper.degrees_of_freedom(d);
    if !(alpha_w > d as f64 - 1.0) {
        return Err(DbnError::Domain(format!("alpha_w = {alpha_w} must exceed family dimension - 1 = {}", d - 1)));
    }
    if !(hyper.alpha_mu > 0.0) || !(hyper.prior_scale > 0.0) {
        return Err(DbnError::Range("alpha_mu and prior_scale must be positive".into()));
    }
    let mut sorted: Vec<&Vec<f64>> = rows.iter().collect();
    sorted.sort_by(|a, b| a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));

    let mf = m as f64;
    let mut mean = vec![0.0; d];
    for r in &sorted {
        for (acc, v) in mean.iter_mut().zip(r.iter()) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= mf;
    }
    let mut scatter = DMatrix::<f64>::zeros(d, d);
    for r in &sorted {
        for a in 0..d {
            let da = r[a] - mean[a];
            for b in 0..=a {
                scatter[(a, b)] += da * (r[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            scatter[(b, a)] = scatter[(a, b)];
        }
    }
    let shrink = hyper.alpha_mu * mf / (hyper.alpha_mu + mf);
    let t = DMatrix::identity(d, d) * hyper.prior_scale;
    let r_mat = DMatrix::from_fn(d, d, |a, b| {
        t[(a, b)] + scatter[(a, b)] + shrink * (hyper.prior_mean - mean[a]) * (hyper.prior_mean - mean[b])
    });

    let log_marginal = |idx: &[usize]| -> Result<f64> {
        let l = idx.len();
        if l == 0 {
            return Ok(0.0);
        }
        let lf = l as f64;
        let dof = alpha_w - d as f64 + lf;
        Ok(lf / 2.0 * (hyper.alpha_mu / (mf + hyper.alpha_mu)).ln()
            + ln_multivariate_gamma(l, (mf + dof) / 2.0)
            - ln_multivariate_gamma(l, dof / 2.0)
            - lf * mf / 2.0 * std::f64::consts::PI.ln()
            + dof / 2.0 * ln_det_spd(&sub(&t, idx))?
            - (mf + dof) / 2.0 * ln_det_spd(&sub(&r_mat, idx))?)
    };
    let all: Vec<usize> = (0..d).collect();
    Ok(log_marginal(&all)? - log_marginal(&all[1..])?)
}

/// BGe score of `family` over transitions with child times from `first`.
pub fn bge_family_score(data: &TrajectoryDataset, family: &FamilySpec, hyper: &BgeHyper, first: usize) -> Result<f64> {
    check_family(data, family)?;
    if data.is_discrete() {
        return Err(DbnError::Domain("BGe requires continuous data".into()));
    }
    let (xs, ys) = family_design(data, family, first);
    let rows: Vec<Vec<f64>> = xs
        .into_iter()
        .zip(ys)
        .map(|(x, y)| std::iter::once(y).chain(x).collect())
        .collect();
    if rows.is_empty() {
        let d = family.len() + 1;
        if !(hyper.degrees_of_freedom(d) > d as f64 - 1.0) {
            return Err(DbnError::Domain("alpha_w too small for family dimension".into()));
        }
    }
    bge_rows_score(&rows, hyper)
}

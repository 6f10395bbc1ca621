//! Logistic transition model fitted by gradient ascent.

use std::collections::BTreeMap;

use super::counts::check_family;
use crate::dbn::{FamilySpec, Logistic, TrajectoryDataset};
use crate::error::{DbnError, Result};

const GRAD_TOL: f64 = 1e-8;
const MAX_ITER: usize = 10_000;
/// Coefficient magnitude beyond which an unpenalized fit is treated as diverging.
const DIVERGENCE_BOUND: f64 = 30.0;
/// Ridge used when the divergence guard refits separable data.
const GUARD_RIDGE: f64 = 1e-3;

/// Penalized logistic log-likelihood over weighted, de-duplicated rows.
///
/// Parameter vector layout is `[beta0, beta_1, ..., beta_k]`; the ridge
/// term `ridge * ||beta||^2` covers the intercept too.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    dim: usize,
    rows: Vec<(Vec<f64>, f64, f64)>,
    ridge: f64,
}

fn log1pexp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl LogisticProblem {
    /// `features[r]` are the parent values of row `r`, `targets[r]` is 0 or 1.
    pub fn new(features: &[Vec<f64>], targets: &[f64], ridge: f64) -> Result<Self> {
        let dim = features.first().map_or(0, Vec::len) + 1;
        if features.len() != targets.len() || features.iter().any(|f| f.len() + 1 != dim) {
            return Err(DbnError::Dimension("ragged logistic design".into()));
        }
        // rows with identical features and target collapse into one weighted row
        let mut agg: BTreeMap<(Vec<u64>, u64), f64> = BTreeMap::new();
        for (f, &y) in features.iter().zip(targets) {
            if y != 0.0 && y != 1.0 {
                return Err(DbnError::Domain("logistic targets must be binary".into()));
            }
            let key = (f.iter().map(|v| v.to_bits()).collect(), y.to_bits());
            *agg.entry(key).or_insert(0.0) += 1.0;
        }
        let rows = agg
            .into_iter()
            .map(|((f, y), w)| {
                let mut x = Vec::with_capacity(dim);
                x.push(1.0);
                x.extend(f.into_iter().map(f64::from_bits));
                (x, f64::from_bits(y), w)
            })
            .collect();
        Ok(Self { dim, rows, ridge })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Unpenalized log-likelihood.
    pub fn loglik(&self, beta: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|(x, y, w)| {
                let eta: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
                w * (y * eta - log1pexp(eta))
            })
            .sum()
    }

    pub fn objective(&self, beta: &[f64]) -> f64 {
        self.loglik(beta) - self.ridge * beta.iter().map(|b| b * b).sum::<f64>()
    }

    pub fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = beta.iter().map(|b| -2.0 * self.ridge * b).collect();
        for (x, y, w) in &self.rows {
            let eta: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
            let r = w * (y - crate::dbn::sigmoid(eta));
            for (gj, xj) in g.iter_mut().zip(x) {
                *gj += r * xj;
            }
        }
        g
    }

    /// Gradient ascent with Armijo backtracking. Returns `(beta, iterations, converged)`.
    pub fn maximize(&self, start: Vec<f64>) -> (Vec<f64>, usize, bool) {
        let mut beta = start;
        let mut f = self.objective(&beta);
        let mut step = 1.0 / self.rows.iter().map(|r| r.2).sum::<f64>().max(1.0);
        for it in 0..MAX_ITER {
            let g = self.gradient(&beta);
            let gn2: f64 = g.iter().map(|v| v * v).sum();
            if gn2.sqrt() < GRAD_TOL {
                return (beta, it, true);
            }
            step *= 2.0;
            loop {
                let cand: Vec<f64> = beta.iter().zip(&g).map(|(b, gi)| b + step * gi).collect();
                let fc = self.objective(&cand);
                if fc >= f + 0.5 * step * gn2 {
                    beta = cand;
                    f = fc;
                    break;
                }
                step *= 0.5;
                if step < 1e-300 {
                    // no ascent direction left at machine precision
                    return (beta, it, gn2.sqrt() < GRAD_TOL.sqrt());
                }
            }
            if beta.iter().any(|b| b.abs() > 10.0 * DIVERGENCE_BOUND) {
                return (beta, it + 1, false);
            }
        }
        let converged = self.gradient(&beta).iter().map(|v| v * v).sum::<f64>().sqrt() < GRAD_TOL;
        (beta, MAX_ITER, converged)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub params: Logistic,
    /// Unpenalized log-likelihood at the returned parameters.
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The unpenalized problem diverged (separable data) and the returned
    /// optimum uses the guard ridge instead of the requested one.
    pub diverged: bool,
}

/// Design rows `(parent values, child value)` of a family's usable transitions.
pub(crate) fn family_design(data: &TrajectoryDataset, family: &FamilySpec, first: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let node = family.node;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (n, t) in data.transitions(first.max(family.first_usable_time())) {
        xs.push(family.parents().iter().map(|&p| data.parent_value(n, t, node, p)).collect());
        ys.push(data.x(n, t, node));
    }
    (xs, ys)
}

/// Fits the logistic kernel of `family` to a binary dataset.
pub fn fit_logistic(data: &TrajectoryDataset, family: &FamilySpec, ridge: f64, first: usize) -> Result<LogisticFit> {
    check_family(data, family)?;
    if data.x_arity(family.node) != Some(2) {
        return Err(DbnError::Domain("logistic model requires a binary child".into()));
    }
    if ridge < 0.0 {
        return Err(DbnError::Range("ridge must be nonnegative".into()));
    }
    let (xs, ys) = family_design(data, family, first);
    if ys.is_empty() {
        return Err(DbnError::Data("no usable transitions".into()));
    }
    let problem = LogisticProblem::new(&xs, &ys, ridge)?;
    let (mut beta, mut iterations, mut converged) = problem.maximize(vec![0.0; problem.dim()]);
    let mut diverged = false;
    if beta.iter().any(|b| b.abs() > DIVERGENCE_BOUND) && ridge < GUARD_RIDGE {
        diverged = true;
        let guarded = LogisticProblem { ridge: GUARD_RIDGE, ..problem.clone() };
        let (b, it, c) = guarded.maximize(vec![0.0; problem.dim()]);
        beta = b;
        iterations += it;
        converged = c;
    }
    let loglik = problem.loglik(&beta);
    Ok(LogisticFit {
        params: Logistic { beta0: beta[0], beta: beta[1..].to_vec() },
        loglik,
        iterations,
        converged,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let k = rng.random_range(1..4);
            let xs: Vec<Vec<f64>> =
                (0..40).map(|_| (0..k).map(|_| f64::from(rng.random_range(0u8..2))).collect()).collect();
            let ys: Vec<f64> = (0..40).map(|_| f64::from(rng.random_range(0u8..2))).collect();
            let prob = LogisticProblem::new(&xs, &ys, rng.random_range(0.0..0.5)).unwrap();
            let beta: Vec<f64> = (0..=k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g = prob.gradient(&beta);
            for j in 0..=k {
                let h = 1e-6;
                let mut bp = beta.clone();
                let mut bm = beta.clone();
                bp[j] += h;
                bm[j] -= h;
                let fd = (prob.objective(&bp) - prob.objective(&bm)) / (2.0 * h);
                let scale = g[j].abs().max(1.0);
                assert!((fd - g[j]).abs() / scale < 1e-6, "coord {j}: fd {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn separable_data_triggers_guard() {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![f64::from(i % 2)]).collect();
        let ys: Vec<f64> = (0..20).map(|i| f64::from(i % 2)).collect();
        let prob = LogisticProblem::new(&xs, &ys, 0.0).unwrap();
        let (beta, _, _) = prob.maximize(vec![0.0, 0.0]);
        assert!(beta[1].abs() > DIVERGENCE_BOUND);
    }
}

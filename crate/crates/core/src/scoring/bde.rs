//! Bayesian Dirichlet scoring of discrete families.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::counts::{count_transitions_from, CountTable};
use crate::dbn::{Cpt, FamilySpec, TrajectoryDataset};
use crate::error::{DbnError, Result};

/// Dirichlet prior with equivalent sample size `ess` spread uniformly:
/// every (configuration, value) cell gets `ess / (q r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletPrior {
    pub ess: f64,
}

impl Default for DirichletPrior {
    fn default() -> Self {
        Self { ess: 1.0 }
    }
}

impl DirichletPrior {
    pub fn new(ess: f64) -> Self {
        Self { ess }
    }

    pub fn pseudo_count(&self, q: usize, r: usize) -> f64 {
        self.ess / (q * r) as f64
    }
}

/// Log marginal likelihood of a family:
///
/// `sum_xi [ lnG(a_xi) - lnG(a_xi + N_xi) + sum_k (lnG(a_k + N_k) - lnG(a_k)) ]`
///
/// with `a_xi = sum_k a_k`, the closed form of the Dirichlet-multinomial integral.
pub fn bde_family_score(counts: &CountTable, prior: &DirichletPrior) -> Result<f64> {
    let q = counts.num_configurations();
    let r = counts.child_arity;
    let a = prior.pseudo_count(q, r);
    if !(a > 0.0) || !a.is_finite() {
        return Err(DbnError::Range(format!("pseudo-count {a} must be positive")));
    }
    let a_row = a * r as f64;
    let ln_a = ln_gamma(a);
    let ln_a_row = ln_gamma(a_row);
    let mut score = 0.0;
    for xi in 0..q {
        let n = counts.total(xi);
        if n == 0 {
            continue;
        }
        let mut term = ln_a_row - ln_gamma(a_row + n as f64);
        for &c in counts.row(xi) {
            if c > 0 {
                term += ln_gamma(a + c as f64) - ln_a;
            }
        }
        score += term;
    }
    Ok(score)
}

/// BDe score of a binary node whose dynamic and static parents act
/// independently: the sum of the scores of the two factor families.
pub fn bde_factored_family_score(
    data: &TrajectoryDataset,
    family: &FamilySpec,
    prior: &DirichletPrior,
    first: usize,
) -> Result<f64> {
    let (dyn_p, stat_p) = family.split_static();
    let first = first.max(family.first_usable_time());
    let d = count_transitions_from(data, &FamilySpec::new(family.node, dyn_p)?, first)?;
    let mut score = bde_family_score(&d, prior)?;
    if !stat_p.is_empty() {
        let s = count_transitions_from(data, &FamilySpec::new(family.node, stat_p)?, first)?;
        score += bde_family_score(&s, prior)?;
    }
    Ok(score)
}

/// Posterior Dirichlet parameters `a_k + N_k` per configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletPosterior {
    pub child_arity: usize,
    pub parent_arities: Vec<usize>,
    pub alphas: Vec<Vec<f64>>,
}

pub fn dirichlet_posterior(counts: &CountTable, prior: &DirichletPrior) -> DirichletPosterior {
    let a = prior.pseudo_count(counts.num_configurations(), counts.child_arity);
    let alphas = (0..counts.num_configurations())
        .map(|xi| counts.row(xi).iter().map(|&c| a + c as f64).collect())
        .collect();
    DirichletPosterior { child_arity: counts.child_arity, parent_arities: counts.parent_arities.clone(), alphas }
}

impl DirichletPosterior {
    /// CPT of posterior means `(a_k + N_k) / sum`.
    pub fn mean(&self) -> Cpt {
        let theta = self
            .alphas
            .iter()
            .map(|row| {
                let s: f64 = row.iter().sum();
                row.iter().map(|v| v / s).collect()
            })
            .collect();
        Cpt { child_arity: self.child_arity, parent_arities: self.parent_arities.clone(), theta }
    }

    /// Draws one CPT from the posterior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Cpt {
        let theta = self
            .alphas
            .iter()
            .map(|row| loop {
                let draws: Vec<f64> =
                    row.iter().map(|&a| Gamma::new(a, 1.0).expect("positive posterior").sample(rng)).collect();
                let s: f64 = draws.iter().sum();
                if s > 0.0 {
                    break draws.iter().map(|v| v / s).collect();
                }
            })
            .collect();
        Cpt { child_arity: self.child_arity, parent_arities: self.parent_arities.clone(), theta }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn single(row: Vec<u64>) -> CountTable {
        let r = row.len();
        CountTable::from_rows(FamilySpec::empty(0), r, vec![], &[row]).unwrap()
    }

    #[test]
    fn beta_integral_case() {
        // alpha = (1,1), two ones and one zero: integral of theta^2 (1 - theta) = 1/12
        let s = bde_family_score(&single(vec![1, 2]), &DirichletPrior::new(2.0)).unwrap();
        assert!((s - (1.0f64 / 12.0).ln()).abs() < 1e-12);
        assert!((s + 2.4849).abs() < 1e-4);
    }

    #[test]
    fn zero_data_scores_zero() {
        assert_eq!(bde_family_score(&single(vec![0, 0]), &DirichletPrior::default()).unwrap(), 0.0);
    }

    #[test]
    fn nonpositive_prior_rejected() {
        assert!(bde_family_score(&single(vec![1, 1]), &DirichletPrior::new(0.0)).is_err());
    }

    #[test]
    fn posterior_update() {
        let post = dirichlet_posterior(&single(vec![1, 2]), &DirichletPrior::new(2.0));
        assert_eq!(post.alphas[0], vec![2.0, 3.0]);
        let post = dirichlet_posterior(&single(vec![2, 1]), &DirichletPrior::new(2.0));
        assert_eq!(post.alphas[0], vec![3.0, 2.0]);
        let m = post.mean();
        assert!((m.theta[0][0] - 0.6).abs() < 1e-15 && (m.theta[0][1] - 0.4).abs() < 1e-15);
        let prior_only = dirichlet_posterior(&single(vec![0, 0]), &DirichletPrior::new(2.0));
        assert_eq!(prior_only.alphas[0], vec![1.0, 1.0]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let draw = post.sample(&mut rng);
        assert!(draw.validate().is_ok());
    }
}

//! Sufficient statistics, parameter estimation and family scores.

mod bde;
mod bge;
mod cache;
mod counts;
mod criteria;
mod gaussian;
mod likelihood;
mod logistic;
mod mle;

pub use bde::{bde_factored_family_score, bde_family_score, dirichlet_posterior, DirichletPosterior, DirichletPrior};
pub use bge::{bge_family_score, bge_rows_score, BgeHyper};
pub use cache::{cached_family_score, family_score, format_score, structure_score, ScoreCache, ScoreKind, ScoreOptions};
pub use counts::{count_transitions, count_transitions_from, CountTable};
pub use criteria::{information_criterion, Criterion};
pub use gaussian::{fit_linear_gaussian, gaussian_loglik, GaussianFit, SIGMA2_FLOOR};
pub use likelihood::{loglik, loglik_cpt, loglik_from, node_loglik};
pub use logistic::{fit_logistic, LogisticFit, LogisticProblem};
pub use mle::{fit_cpts, mle_cpt, mle_factored, FactoredFit};


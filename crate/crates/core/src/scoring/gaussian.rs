use nalgebra::{DMatrix, DVector};

use super::counts::check_family;
use super::logistic::family_design;
use crate::dbn::{FamilySpec, LinearGaussian, TrajectoryDataset};
use crate::error::{DbnError, Result};

/// Ridge added to the normal equations so rank-deficient designs still solve.
const NORMAL_RIDGE: f64 = 1e-10;
/// Lower bound on the fitted noise variance; exact fits would otherwise
/// produce an infinite log-likelihood.
pub const SIGMA2_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    pub params: LinearGaussian,
    /// Mean squared residual before flooring.
    pub raw_sigma2: f64,
    pub loglik: f64,
    pub rows: usize,
}

/// Least-squares estimate of the linear-Gaussian kernel of `family`.
pub fn fit_linear_gaussian(data: &TrajectoryDataset, family: &FamilySpec, first: usize) -> Result<GaussianFit> {
    check_family(data, family)?;
    if data.is_discrete() {
        return Err(DbnError::Domain("linear Gaussian fit requires continuous data".into()));
    }
    let (xs, ys) = family_design(data, family, first);
    let m = ys.len();
    let k = family.len() + 1;
    if m < k {
        return Err(DbnError::Underdetermined { rows: m, params: k });
    }
    let design = DMatrix::from_fn(m, k, |r, c| if c == 0 { 1.0 } else { xs[r][c - 1] });
    let y = DVector::from_vec(ys);
    let mut gram = design.transpose() * &design;
    for d in 0..k {
        gram[(d, d)] += NORMAL_RIDGE;
    }
    let rhs = design.transpose() * &y;
    let beta = gram
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| gram.lu().solve(&rhs))
        .ok_or_else(|| DbnError::Optimizer("normal equations are singular".into()))?;
    let resid = &y - &design * &beta;
    let raw_sigma2 = resid.norm_squared() / m as f64;
    let sigma2 = raw_sigma2.max(SIGMA2_FLOOR);
    let loglik = gaussian_loglik(resid.norm_squared(), m, sigma2);
    Ok(GaussianFit {
        params: LinearGaussian { beta0: beta[0], beta: beta.iter().skip(1).copied().collect(), sigma2 },
        raw_sigma2,
        loglik,
        rows: m,
    })
}

/// Gaussian log-likelihood of `m` residuals with sum of squares `rss` at variance `sigma2`.
pub fn gaussian_loglik(rss: f64, m: usize, sigma2: f64) -> f64 {
    -0.5 * (m as f64 * (2.0 * std::f64::consts::PI * sigma2).ln() + rss / sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbn::{Domain, ParentRef};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn continuous(n_x: usize, n_traj: usize, horizon: usize, x: Vec<f64>) -> TrajectoryDataset {
        TrajectoryDataset::new(Domain::Continuous, n_x, 0, n_traj, horizon, x, vec![]).unwrap()
    }

    #[test]
    fn exact_fit() {
        // x1(t) = 2 x0(t)
        let mut x = Vec::new();
        for t in 0..6 {
            let v = t as f64 * 0.7 - 1.0;
            x.extend([v, 2.0 * v]);
        }
        let d = continuous(2, 1, 5, x);
        let fam = FamilySpec::new(1, vec![ParentRef::Intra(0)]).unwrap();
        let fit = fit_linear_gaussian(&d, &fam, 1).unwrap();
        assert!(fit.params.beta0.abs() < 1e-8);
        assert!((fit.params.beta[0] - 2.0).abs() < 1e-8);
        assert!(fit.raw_sigma2 < 1e-16);
    }

    #[test]
    fn independent_noise() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let x: Vec<f64> = (0..2 * 10_001).map(|_| StandardNormal.sample(&mut rng)).collect();
        let d = continuous(2, 1, 10_000, x);
        let fam = FamilySpec::new(1, vec![ParentRef::Intra(0), ParentRef::Inter(0)]).unwrap();
        let fit = fit_linear_gaussian(&d, &fam, 1).unwrap();
        assert!(fit.params.beta.iter().all(|b| b.abs() < 0.05));
        assert!((fit.params.sigma2 - 1.0).abs() < 0.1);
        let smaller = fit_linear_gaussian(&d, &FamilySpec::new(1, vec![ParentRef::Intra(0)]).unwrap(), 1).unwrap();
        assert!(fit.loglik >= smaller.loglik);
    }

    #[test]
    fn underdetermined() {
        let d = continuous(3, 1, 2, vec![0.1, 0.2, 0.3, 0.5, 0.1, 0.9, 0.3, 0.3, 0.7]);
        let fam = FamilySpec::new(0, vec![ParentRef::Intra(1), ParentRef::Intra(2)]).unwrap();
        assert!(matches!(fit_linear_gaussian(&d, &fam, 1), Err(DbnError::Underdetermined { rows: 2, params: 3 })));
    }
}

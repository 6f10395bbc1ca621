use serde::{Deserialize, Serialize};

use crate::error::{DbnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Aicc,
    Bic,
}

/// `-2 loglik + C(k, n)`; lower is better.
///
/// The AICc parsimony term is `(n + k) / (n - k - 2)`, which is not the
/// usual Hurvich-Tsai correction `2k + 2k(k+1)/(n-k-1)`.
pub fn information_criterion(loglik: f64, k: usize, n_eff: usize, kind: Criterion) -> Result<f64> {
    let (kf, nf) = (k as f64, n_eff as f64);
    let penalty = match kind {
        Criterion::Aic => 2.0 * kf,
        Criterion::Aicc => {
            if n_eff <= k + 2 {
                return Err(DbnError::Domain(format!("AICc needs n_eff > k + 2 (n_eff = {n_eff}, k = {k})")));
            }
            (nf + kf) / (nf - kf - 2.0)
        }
        Criterion::Bic => {
            if n_eff == 0 {
                return Err(DbnError::Domain("BIC needs at least one transition".into()));
            }
            kf * nf.ln()
        }
    };
    Ok(-2.0 * loglik + penalty)
}

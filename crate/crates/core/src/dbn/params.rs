use serde::{Deserialize, Serialize};

use super::config_index::{configuration_index, num_configurations};
use super::dataset::TrajectoryDataset;
use super::structure::{DbnStructure, FamilySpec};
use crate::error::{DbnError, Result};

const ROW_SUM_TOL: f64 = 1e-12;

/// Unrestricted conditional probability table. Row `xi` is the distribution
/// of the child given parent configuration `xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    pub child_arity: usize,
    pub parent_arities: Vec<usize>,
    pub theta: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn uniform(child_arity: usize, parent_arities: Vec<usize>) -> Self {
        let q = num_configurations(&parent_arities);
        Self { child_arity, parent_arities, theta: vec![vec![1.0 / child_arity as f64; child_arity]; q] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.len() != num_configurations(&self.parent_arities) {
            return Err(DbnError::Model(format!(
                "CPT has {} rows, parents define {} configurations",
                self.theta.len(),
                num_configurations(&self.parent_arities)
            )));
        }
        for (xi, row) in self.theta.iter().enumerate() {
            if row.len() != self.child_arity {
                return Err(DbnError::Model(format!("CPT row {xi} has length {}", row.len())));
            }
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(DbnError::Range(format!("CPT row {xi} has a probability outside [0,1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(DbnError::Model(format!("CPT row {xi} sums to {s}")));
            }
        }
        Ok(())
    }
}

/// Binary child with independent dynamic and static influence:
/// `p(X=1) = theta_dyn[xi_d] * theta_stat[xi_s]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoredCpt {
    pub dyn_arities: Vec<usize>,
    pub stat_arities: Vec<usize>,
    pub theta_dyn: Vec<f64>,
    pub theta_stat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyOr {
    pub lambda0: f64,
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    pub beta0: f64,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGaussian {
    pub beta0: f64,
    pub beta: Vec<f64>,
    pub sigma2: f64,
}

/// Transition parameters of one node, interpreted against the node's
/// ordered family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeParams {
    Cpt(Cpt),
    FactoredCpt(FactoredCpt),
    NoisyOr(NoisyOr),
    Logistic(Logistic),
    LinearGaussian(LinearGaussian),
}

/// Conditional law of a child given realized parent values.
#[derive(Debug, Clone, PartialEq)]
pub enum Conditional {
    Categorical(Vec<f64>),
    Gaussian { mean: f64, var: f64 },
}

impl Conditional {
    pub fn log_prob(&self, value: f64) -> f64 {
        match self {
            Conditional::Categorical(p) => p[value as usize].ln(),
            Conditional::Gaussian { mean, var } => {
                let r = value - mean;
                -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + r * r / var)
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dot(beta: &[f64], values: &[f64]) -> f64 {
    beta.iter().zip(values).map(|(b, v)| b * v).sum()
}

impl NodeParams {
    /// Number of free parameters.
    pub fn num_free(&self) -> usize {
        match self {
            NodeParams::Cpt(c) => c.theta.len() * (c.child_arity - 1),
            NodeParams::FactoredCpt(f) => f.theta_dyn.len() + f.theta_stat.len(),
            NodeParams::NoisyOr(n) => 1 + n.lambdas.len(),
            NodeParams::Logistic(l) => 1 + l.beta.len(),
            NodeParams::LinearGaussian(g) => 2 + g.beta.len(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, NodeParams::LinearGaussian(_))
    }

    /// Distribution of the child given its parents' values in family order.
    pub fn conditional(&self, parent_values: &[f64]) -> Result<Conditional> {
        match self {
            NodeParams::Cpt(c) => {
                let vals: Vec<usize> = parent_values.iter().map(|&v| v as usize).collect();
                let xi = configuration_index(&vals, &c.parent_arities)?;
                Ok(Conditional::Categorical(c.theta[xi].clone()))
            }
            NodeParams::FactoredCpt(f) => {
                let nd = f.dyn_arities.len();
                let dv: Vec<usize> = parent_values[..nd].iter().map(|&v| v as usize).collect();
                let sv: Vec<usize> = parent_values[nd..].iter().map(|&v| v as usize).collect();
                let p1 = f.theta_dyn[configuration_index(&dv, &f.dyn_arities)?]
                    * f.theta_stat[configuration_index(&sv, &f.stat_arities)?];
                let p1 = p1.clamp(0.0, 1.0);
                Ok(Conditional::Categorical(vec![1.0 - p1, p1]))
            }
            NodeParams::NoisyOr(n) => {
                let p1 = noisy_or_kernel(n.lambda0, &n.lambdas, parent_values)?;
                Ok(Conditional::Categorical(vec![1.0 - p1, p1]))
            }
            NodeParams::Logistic(l) => {
                let p1 = sigmoid(l.beta0 + dot(&l.beta, parent_values));
                Ok(Conditional::Categorical(vec![1.0 - p1, p1]))
            }
            NodeParams::LinearGaussian(g) => {
                Ok(Conditional::Gaussian { mean: g.beta0 + dot(&g.beta, parent_values), var: g.sigma2 })
            }
        }
    }

    /// Checks parameter shapes against `family` and the dataset's arities.
    pub fn check_family(&self, family: &FamilySpec, child_arity: Option<usize>, parent_arities: &[Option<usize>]) -> Result<()> {
        let k = family.len();
        let discrete_parents = || -> Result<Vec<usize>> {
            parent_arities
                .iter()
                .map(|a| a.ok_or_else(|| DbnError::Model("discrete model on continuous parents".into())))
                .collect()
        };
        let mismatch = |what: &str| Err(DbnError::Model(format!("node {}: {what}", family.node)));
        match self {
            NodeParams::Cpt(c) => {
                c.validate()?;
                if Some(c.child_arity) != child_arity || c.parent_arities != discrete_parents()? {
                    return mismatch("CPT arities do not match family");
                }
            }
            NodeParams::FactoredCpt(f) => {
                let (dyn_p, stat_p) = family.split_static();
                let ar = discrete_parents()?;
                if child_arity != Some(2)
                    || f.dyn_arities != ar[..dyn_p.len()]
                    || f.stat_arities != ar[dyn_p.len()..]
                    || f.theta_dyn.len() != num_configurations(&f.dyn_arities)
                    || f.theta_stat.len() != num_configurations(&f.stat_arities)
                    || stat_p.len() != f.stat_arities.len()
                {
                    return mismatch("factored CPT shape does not match family");
                }
                if f.theta_dyn.iter().chain(&f.theta_stat).any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(DbnError::Range("factored CPT entry outside [0,1]".into()));
                }
            }
            NodeParams::NoisyOr(n) => {
                if child_arity != Some(2) || n.lambdas.len() != k {
                    return mismatch("noisy-or needs a binary child and one lambda per parent");
                }
                if std::iter::once(&n.lambda0).chain(&n.lambdas).any(|l| !(0.0..=1.0).contains(l)) {
                    return Err(DbnError::Range("noisy-or lambda outside [0,1]".into()));
                }
            }
            NodeParams::Logistic(l) => {
                if child_arity != Some(2) || l.beta.len() != k {
                    return mismatch("logistic needs a binary child and one weight per parent");
                }
            }
            NodeParams::LinearGaussian(g) => {
                if child_arity.is_some() || g.beta.len() != k {
                    return mismatch("linear Gaussian needs a continuous child and one weight per parent");
                }
                if !(g.sigma2 > 0.0) {
                    return Err(DbnError::Range("sigma2 must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Noisy-or probability that the child is 1:
/// `1 - (1 - lambda0) * prod_l (1 - lambda_l)^{v_l}`.
pub fn noisy_or_kernel(lambda0: f64, lambdas: &[f64], parent_values: &[f64]) -> Result<f64> {
    if lambdas.len() != parent_values.len() {
        return Err(DbnError::Dimension("one lambda per parent value required".into()));
    }
    if std::iter::once(&lambda0).chain(lambdas).any(|l| !(0.0..=1.0).contains(l)) {
        return Err(DbnError::Range("noisy-or lambda outside [0,1]".into()));
    }
    let mut p0 = 1.0 - lambda0;
    for (&l, &v) in lambdas.iter().zip(parent_values) {
        p0 *= (1.0 - l).powf(v);
    }
    Ok(1.0 - p0)
}

/// Per-node transition parameters, indexed by dynamic variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub nodes: Vec<NodeParams>,
}

impl ParameterSet {
    /// Checks every node against its family in `structure` and the dataset domain.
    pub fn check(&self, structure: &DbnStructure, data: &TrajectoryDataset) -> Result<()> {
        if self.nodes.len() != structure.n_x || data.n_x() != structure.n_x || data.n_z() != structure.n_z {
            return Err(DbnError::Model("parameter set, structure and dataset sizes disagree".into()));
        }
        for (i, np) in self.nodes.iter().enumerate() {
            let fam = structure.family(i);
            let pa: Vec<Option<usize>> = fam.parents().iter().map(|&p| data.parent_arity(i, p)).collect();
            np.check_family(&fam, data.x_arity(i), &pa)?;
        }
        Ok(())
    }

    pub fn num_free(&self) -> usize {
        self.nodes.iter().map(NodeParams::num_free).sum()
    }
}

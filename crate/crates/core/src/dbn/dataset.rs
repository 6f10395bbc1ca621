use serde::{Deserialize, Serialize};

use super::structure::ParentRef;
use crate::error::{DbnError, Result};

/// Value domain of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Categorical values `0..arity`.
    Discrete { x_arities: Vec<usize>, z_arities: Vec<usize> },
    Continuous,
}

/// `N` trajectories of `T+1` slices over `n_x` dynamic variables, plus `n_z`
/// static covariates per trajectory.
///
/// Values are stored as `f64` in both domains; discrete values are exact
/// small integers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    domain: Domain,
    n_x: usize,
    n_z: usize,
    n_traj: usize,
    horizon: usize,
    x: Vec<f64>,
    z: Vec<f64>,
}

impl TrajectoryDataset {
    /// `x` is laid out as `[traj][time 0..=horizon][var]`, `z` as `[traj][var]`.
    pub fn new(
        domain: Domain,
        n_x: usize,
        n_z: usize,
        n_traj: usize,
        horizon: usize,
        x: Vec<f64>,
        z: Vec<f64>,
    ) -> Result<Self> {
        if x.len() != n_traj * (horizon + 1) * n_x {
            return Err(DbnError::Dimension(format!(
                "x has {} values, expected {}",
                x.len(),
                n_traj * (horizon + 1) * n_x
            )));
        }
        if z.len() != n_traj * n_z {
            return Err(DbnError::Dimension(format!("z has {} values, expected {}", z.len(), n_traj * n_z)));
        }
        let ds = Self { domain, n_x, n_z, n_traj, horizon, x, z };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        match &self.domain {
            Domain::Discrete { x_arities, z_arities } => {
                if x_arities.len() != self.n_x || z_arities.len() != self.n_z {
                    return Err(DbnError::Dimension("arity list length mismatch".into()));
                }
                if x_arities.iter().chain(z_arities).any(|&a| a == 0) {
                    return Err(DbnError::Range("arity must be positive".into()));
                }
                let check = |v: f64, a: usize, what: &str| {
                    if v.fract() != 0.0 || v < 0.0 || v >= a as f64 {
                        Err(DbnError::Range(format!("{what} value {v} not in 0..{a}")))
                    } else {
                        Ok(())
                    }
                };
                for (k, &v) in self.x.iter().enumerate() {
                    let var = k % self.n_x;
                    check(v, x_arities[var], &format!("x{var}"))?;
                }
                for (k, &v) in self.z.iter().enumerate() {
                    let var = k % self.n_z;
                    check(v, z_arities[var], &format!("z{var}"))?;
                }
            }
            Domain::Continuous => {
                if self.x.iter().chain(&self.z).any(|v| !v.is_finite()) {
                    return Err(DbnError::Data("non-finite value in continuous dataset".into()));
                }
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.domain, Domain::Discrete { .. })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn n_traj(&self) -> usize {
        self.n_traj
    }

    /// Number of time steps after the initial slice.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn x(&self, traj: usize, t: usize, var: usize) -> f64 {
        self.x[(traj * (self.horizon + 1) + t) * self.n_x + var]
    }

    #[inline]
    pub fn z(&self, traj: usize, var: usize) -> f64 {
        self.z[traj * self.n_z + var]
    }

    pub fn slice(&self, traj: usize, t: usize) -> &[f64] {
        let start = (traj * (self.horizon + 1) + t) * self.n_x;
        &self.x[start..start + self.n_x]
    }

    pub fn statics(&self, traj: usize) -> &[f64] {
        &self.z[traj * self.n_z..(traj + 1) * self.n_z]
    }

    pub fn raw_x(&self) -> &[f64] {
        &self.x
    }

    pub fn raw_z(&self) -> &[f64] {
        &self.z
    }

    pub fn x_arity(&self, var: usize) -> Option<usize> {
        match &self.domain {
            Domain::Discrete { x_arities, .. } => Some(x_arities[var]),
            Domain::Continuous => None,
        }
    }

    pub fn z_arity(&self, var: usize) -> Option<usize> {
        match &self.domain {
            Domain::Discrete { z_arities, .. } => Some(z_arities[var]),
            Domain::Continuous => None,
        }
    }

    /// Arity of parent `p` of `node`; `None` for continuous data.
    pub fn parent_arity(&self, node: usize, p: ParentRef) -> Option<usize> {
        match p {
            ParentRef::Inter(j) | ParentRef::Intra(j) => self.x_arity(j),
            ParentRef::Auto(_) => self.x_arity(node),
            ParentRef::Static(j) => self.z_arity(j),
        }
    }

    /// Value of parent `p` for the transition into `child_time` of `traj`.
    /// Caller guarantees `child_time >= p.time_offset()`.
    #[inline]
    pub fn parent_value(&self, traj: usize, child_time: usize, node: usize, p: ParentRef) -> f64 {
        match p {
            ParentRef::Inter(j) => self.x(traj, child_time - 1, j),
            ParentRef::Intra(j) => self.x(traj, child_time, j),
            ParentRef::Auto(lag) => self.x(traj, child_time - lag, node),
            ParentRef::Static(j) => self.z(traj, j),
        }
    }

    /// Iterates usable transitions `(traj, child_time)` with child times in
    /// `first..=horizon`, trajectory-major.
    pub fn transitions(&self, first: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let first = first.max(1);
        (0..self.n_traj).flat_map(move |n| (first..=self.horizon).map(move |t| (n, t)))
    }

    pub fn transition_count(&self, first: usize) -> usize {
        let first = first.max(1);
        if first > self.horizon {
            0
        } else {
            self.n_traj * (self.horizon + 1 - first)
        }
    }

    /// Restricts every trajectory to slices `start..=end`.
    pub fn time_window(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.horizon {
            return Err(DbnError::Range(format!("window {start}..={end} outside 0..={}", self.horizon)));
        }
        let mut x = Vec::with_capacity(self.n_traj * (end - start + 1) * self.n_x);
        for n in 0..self.n_traj {
            for t in start..=end {
                x.extend_from_slice(self.slice(n, t));
            }
        }
        Ok(Self {
            domain: self.domain.clone(),
            n_x: self.n_x,
            n_z: self.n_z,
            n_traj: self.n_traj,
            horizon: end - start,
            x,
            z: self.z.clone(),
        })
    }
}

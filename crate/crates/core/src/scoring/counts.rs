use crate::dbn::{num_configurations, FamilySpec, ParentRef, TrajectoryDataset};
use crate::error::{DbnError, Result};

/// Sufficient statistics of one discrete family: `N_{xi,k}` for every parent
/// configuration `xi` and child value `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    pub family: FamilySpec,
    pub child_arity: usize,
    pub parent_arities: Vec<usize>,
    counts: Vec<u64>,
    totals: Vec<u64>,
}

impl CountTable {
    /// Builds a table directly from per-configuration count rows.
    pub fn from_rows(family: FamilySpec, child_arity: usize, parent_arities: Vec<usize>, rows: &[Vec<u64>]) -> Result<Self> {
        if rows.len() != num_configurations(&parent_arities) || rows.iter().any(|r| r.len() != child_arity) {
            return Err(DbnError::Dimension("count rows do not match arities".into()));
        }
        let counts: Vec<u64> = rows.iter().flatten().copied().collect();
        let totals = rows.iter().map(|r| r.iter().sum()).collect();
        Ok(Self { family, child_arity, parent_arities, counts, totals })
    }

    pub fn num_configurations(&self) -> usize {
        self.totals.len()
    }

    #[inline]
    pub fn count(&self, xi: usize, k: usize) -> u64 {
        self.counts[xi * self.child_arity + k]
    }

    pub fn row(&self, xi: usize) -> &[u64] {
        &self.counts[xi * self.child_arity..(xi + 1) * self.child_arity]
    }

    #[inline]
    pub fn total(&self, xi: usize) -> u64 {
        self.totals[xi]
    }

    pub fn grand_total(&self) -> u64 {
        self.totals.iter().sum()
    }

    /// Maximized log-likelihood `sum N_{xi,k} log(N_{xi,k}/N_xi)`.
    pub fn max_loglik(&self) -> f64 {
        let mut ll = 0.0;
        for xi in 0..self.num_configurations() {
            let n = self.total(xi);
            if n == 0 {
                continue;
            }
            let ln_n = (n as f64).ln();
            for &c in self.row(xi) {
                if c > 0 {
                    ll += c as f64 * ((c as f64).ln() - ln_n);
                }
            }
        }
        ll
    }

    /// Free parameters of the unrestricted CPT, `q (r - 1)`.
    pub fn free_parameters(&self) -> usize {
        self.num_configurations() * (self.child_arity - 1)
    }
}

/// Checks that every parent referenced by `family` exists in `data`.
pub(crate) fn check_family(data: &TrajectoryDataset, family: &FamilySpec) -> Result<()> {
    if family.node >= data.n_x() {
        return Err(DbnError::Dimension(format!("node {} outside 0..{}", family.node, data.n_x())));
    }
    for &p in family.parents() {
        let ok = match p {
            ParentRef::Inter(j) | ParentRef::Intra(j) => j < data.n_x(),
            ParentRef::Auto(l) => l >= 1,
            ParentRef::Static(j) => j < data.n_z(),
        };
        if !ok {
            return Err(DbnError::Dimension(format!("parent {p} does not exist in the dataset")));
        }
    }
    Ok(())
}

/// Counts every usable transition of `family`. Child times start at the
/// family's first fully observed slice.
pub fn count_transitions(data: &TrajectoryDataset, family: &FamilySpec) -> Result<CountTable> {
    count_transitions_from(data, family, family.first_usable_time())
}

/// As [`count_transitions`] with child times starting no earlier than `first`.
pub fn count_transitions_from(data: &TrajectoryDataset, family: &FamilySpec, first: usize) -> Result<CountTable> {
    if !data.is_discrete() {
        return Err(DbnError::Domain("counting requires a discrete dataset".into()));
    }
    check_family(data, family)?;
    let node = family.node;
    let child_arity = data.x_arity(node).expect("discrete");
    let parent_arities: Vec<usize> =
        family.parents().iter().map(|&p| data.parent_arity(node, p).expect("discrete")).collect();
    let q = num_configurations(&parent_arities);
    let mut counts = vec![0u64; q * child_arity];
    let mut totals = vec![0u64; q];
    let first = first.max(family.first_usable_time());
    for (n, t) in data.transitions(first) {
        let mut xi = 0usize;
        let mut stride = 1usize;
        for (&p, &a) in family.parents().iter().zip(&parent_arities) {
            xi += data.parent_value(n, t, node, p) as usize * stride;
            stride *= a;
        }
        let k = data.x(n, t, node) as usize;
        counts[xi * child_arity + k] += 1;
        totals[xi] += 1;
    }
    Ok(CountTable { family: family.clone(), child_arity, parent_arities, counts, totals })
}

use crate::dbn::{DbnStructure, ParameterSet, TrajectoryDataset};
use crate::error::Result;

/// Log-likelihood of one node's transitions with child times from `first`.
pub fn node_loglik(
    data: &TrajectoryDataset,
    structure: &DbnStructure,
    params: &ParameterSet,
    node: usize,
    first: usize,
) -> Result<f64> {
    let fam = structure.family(node);
    let np = &params.nodes[node];
    let mut pv = Vec::with_capacity(fam.len());
    let mut ll = 0.0;
    for (n, t) in data.transitions(first.max(fam.first_usable_time())) {
        pv.clear();
        pv.extend(fam.parents().iter().map(|&p| data.parent_value(n, t, node, p)));
        ll += np.conditional(&pv)?.log_prob(data.x(n, t, node));
    }
    Ok(ll)
}

/// Log-likelihood of every usable transition under `params`, child times
/// from `max(1, structure.p)`. Returns `-inf` when an observed transition
/// has probability zero.
pub fn loglik(data: &TrajectoryDataset, structure: &DbnStructure, params: &ParameterSet) -> Result<f64> {
    loglik_from(data, structure, params, structure.p.max(1))
}

pub fn loglik_from(data: &TrajectoryDataset, structure: &DbnStructure, params: &ParameterSet, first: usize) -> Result<f64> {
    params.check(structure, data)?;
    let mut total = 0.0;
    for i in 0..structure.n_x {
        total += node_loglik(data, structure, params, i, first)?;
    }
    Ok(total)
}

/// [`loglik`] for CPT parameter sets.
pub fn loglik_cpt(data: &TrajectoryDataset, structure: &DbnStructure, params: &ParameterSet) -> Result<f64> {
    loglik(data, structure, params)
}

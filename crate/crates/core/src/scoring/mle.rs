use super::counts::{check_family, count_transitions_from, CountTable};
use crate::dbn::{
    num_configurations, Cpt, DbnStructure, FactoredCpt, FamilySpec, ParameterSet, TrajectoryDataset,
};
use crate::error::{DbnError, Result};

/// Count-ratio estimate `N_{xi,k} / N_xi`; unseen configurations get the
/// uniform distribution.
pub fn mle_cpt(counts: &CountTable) -> Cpt {
    let r = counts.child_arity;
    let theta = (0..counts.num_configurations())
        .map(|xi| {
            let n = counts.total(xi);
            if n == 0 {
                vec![1.0 / r as f64; r]
            } else {
                counts.row(xi).iter().map(|&c| c as f64 / n as f64).collect()
            }
        })
        .collect();
    Cpt { child_arity: r, parent_arities: counts.parent_arities.clone(), theta }
}

/// Result of [`mle_factored`].
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredFit {
    pub params: FactoredCpt,
    /// Set when some product `theta_dyn * theta_stat` had to be clipped into [0,1].
    pub clipped: bool,
}

fn ratio_of_ones(table: &CountTable) -> Vec<f64> {
    (0..table.num_configurations())
        .map(|xi| match table.total(xi) {
            0 => 0.5,
            n => table.count(xi, 1) as f64 / n as f64,
        })
        .collect()
}

/// Separate count-ratio estimates of the dynamic and static factors of a
/// binary node with independent dynamic and static influence.
///
/// Each factor is the frequency of `X = 1` among the usable transitions whose
/// dynamic (resp. static) parents match the configuration, so the static
/// factor pools all `T` transitions of every trajectory sharing `Z = z`. An
/// empty factor is fixed at 1, except that with no parents at all the dynamic
/// factor carries the marginal frequency.
pub fn mle_factored(data: &TrajectoryDataset, family: &FamilySpec, first: usize) -> Result<FactoredFit> {
    check_family(data, family)?;
    if data.x_arity(family.node) != Some(2) {
        return Err(DbnError::Domain("factored kernel requires a binary discrete child".into()));
    }
    let (dyn_p, stat_p) = family.split_static();
    let first = first.max(family.first_usable_time());
    let dyn_fam = FamilySpec::new(family.node, dyn_p)?;
    let stat_fam = FamilySpec::new(family.node, stat_p)?;
    let dyn_counts = count_transitions_from(data, &dyn_fam, first)?;
    let stat_counts = count_transitions_from(data, &stat_fam, first)?;
    let mut theta_dyn = ratio_of_ones(&dyn_counts);
    let mut theta_stat = ratio_of_ones(&stat_counts);
    if stat_fam.is_empty() {
        theta_stat = vec![1.0];
    } else if dyn_fam.is_empty() {
        theta_dyn = vec![1.0];
    }
    let clipped = theta_dyn.iter().any(|d| theta_stat.iter().any(|s| d * s > 1.0 || d * s < 0.0));
    debug_assert_eq!(theta_dyn.len(), num_configurations(&dyn_counts.parent_arities));
    Ok(FactoredFit {
        params: FactoredCpt {
            dyn_arities: dyn_counts.parent_arities,
            stat_arities: stat_counts.parent_arities,
            theta_dyn,
            theta_stat,
        },
        clipped,
    })
}

/// Fits an MLE CPT for every node of `structure`, counting child times from
/// `max(1, structure.p)`.
pub fn fit_cpts(data: &TrajectoryDataset, structure: &DbnStructure) -> Result<ParameterSet> {
    let first = structure.p.max(1);
    let nodes = (0..structure.n_x)
        .map(|i| count_transitions_from(data, &structure.family(i), first).map(|c| mle_cpt(&c).into()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ParameterSet { nodes })
}

impl From<Cpt> for crate::dbn::NodeParams {
    fn from(c: Cpt) -> Self {
        crate::dbn::NodeParams::Cpt(c)
    }
}

//! Domain types: structures, datasets, parameters and configuration indexing.

mod config_index;
mod dataset;
mod params;
mod structure;

pub use config_index::{configuration_index, configuration_values, num_configurations};
pub use dataset::{Domain, TrajectoryDataset};
pub use params::{
    noisy_or_kernel, sigmoid, Conditional, Cpt, FactoredCpt, LinearGaussian, Logistic, NodeParams, NoisyOr,
    ParameterSet,
};
pub use structure::{is_acyclic, parents_of, topological_order, Adjacency, DbnStructure, FamilySpec, ParentRef};

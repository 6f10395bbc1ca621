//! Ground-truth DBN generation and trajectory sampling.
//!
//! All randomness comes from ChaCha8 streams. A trajectory's stream is seeded
//! by [`derive_seed`]`(seed, trajectory)` so trajectories can be sampled in any
//! order, or in parallel, and still produce the same dataset.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dbn::{
    num_configurations, topological_order, Conditional, Cpt, DbnStructure, Domain, FactoredCpt, FamilySpec,
    LinearGaussian, Logistic, NodeParams, NoisyOr, ParameterSet, ParentRef, TrajectoryDataset,
};
use crate::error::{DbnError, Result};
use crate::par;

/// Replicate datasets per regime triple.
pub const DEFAULT_REPLICATES: usize = 10;

/// Spectral radius the linear-Gaussian generator keeps the lag dynamics under.
const STABLE_RADIUS: f64 = 0.95;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a parent seed and a stream index into a child seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Cpt,
    FactoredCpt,
    NoisyOr,
    Logistic,
    LinearGaussian,
}

impl ModelFamily {
    pub fn is_discrete(self) -> bool {
        self != ModelFamily::LinearGaussian
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeProbs {
    pub intra: f64,
    pub inter: f64,
    pub auto: f64,
    #[serde(rename = "static")]
    pub static_: f64,
}

impl EdgeProbs {
    pub fn uniform(p: f64) -> Self {
        Self { intra: p, inter: p, auto: p, static_: p }
    }
}

/// Parameters of the random ground-truth generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_x: usize,
    pub n_z: usize,
    pub p: usize,
    pub edge_prob: EdgeProbs,
    pub family: ModelFamily,
    /// Arity of dynamic variables for discrete families (forced to 2 for
    /// binary-only families).
    pub arity: usize,
    pub static_arity: usize,
    /// Symmetric Dirichlet concentration for CPT rows.
    pub dirichlet_alpha: f64,
    /// CPT rows are raised to `1/temperature` and renormalized; values below 1 sharpen.
    pub temperature: f64,
    /// Magnitude range of linear (Gaussian and logistic) weights.
    pub weight_range: (f64, f64),
    pub noise_sigma: f64,
    /// Range of per-parent noisy-or activation probabilities.
    pub noisy_or_range: (f64, f64),
    /// Range of the noisy-or leak probability.
    pub leak_range: (f64, f64),
    /// Cap on the number of parents of a node; extra parents are dropped at random.
    pub max_in_degree: usize,
    /// Rescale lag weights of linear-Gaussian models so the process is stable.
    pub stabilize: bool,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_x: 3,
            n_z: 0,
            p: 1,
            edge_prob: EdgeProbs { intra: 0.2, inter: 0.3, auto: 0.5, static_: 0.3 },
            family: ModelFamily::Cpt,
            arity: 2,
            static_arity: 2,
            dirichlet_alpha: 0.5,
            temperature: 1.0,
            weight_range: (0.5, 2.0),
            noise_sigma: 1.0,
            noisy_or_range: (0.5, 0.95),
            leak_range: (0.0, 0.2),
            max_in_degree: 4,
            stabilize: true,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let probs = [self.edge_prob.intra, self.edge_prob.inter, self.edge_prob.auto, self.edge_prob.static_];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(DbnError::Range("edge probabilities must lie in [0,1]".into()));
        }
        if self.weight_range.0 > self.weight_range.1 || self.weight_range.0 < 0.0 {
            return Err(DbnError::Range("weight_range must satisfy 0 <= lo <= hi".into()));
        }
        if !(self.noise_sigma > 0.0) {
            return Err(DbnError::Range("noise_sigma must be positive".into()));
        }
        if self.p == 0 || self.n_x == 0 {
            return Err(DbnError::Range("n_x and p must be positive".into()));
        }
        if self.family.is_discrete() && (self.arity < 2 || (self.n_z > 0 && self.static_arity < 2)) {
            return Err(DbnError::Range("discrete arities must be >= 2".into()));
        }
        if !(self.dirichlet_alpha > 0.0) || !(self.temperature > 0.0) {
            return Err(DbnError::Range("dirichlet_alpha and temperature must be positive".into()));
        }
        let in01 = |r: (f64, f64)| (0.0..=1.0).contains(&r.0) && (0.0..=1.0).contains(&r.1) && r.0 <= r.1;
        if !in01(self.noisy_or_range) || !in01(self.leak_range) {
            return Err(DbnError::Range("noisy-or ranges must be sub-intervals of [0,1]".into()));
        }
        Ok(())
    }

    fn child_arity(&self) -> usize {
        match self.family {
            ModelFamily::Cpt => self.arity,
            _ => 2,
        }
    }

    /// Value domain of datasets drawn from this generator.
    pub fn domain(&self) -> Domain {
        if self.family.is_discrete() {
            Domain::Discrete {
                x_arities: vec![self.child_arity(); self.n_x],
                z_arities: vec![self.static_arity; self.n_z],
            }
        } else {
            Domain::Continuous
        }
    }
}

/// A sampled ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub structure: DbnStructure,
    pub params: ParameterSet,
    pub domain: Domain,
}

fn signed_weight<R: Rng>(rng: &mut R, range: (f64, f64)) -> f64 {
    let mag = if range.1 > range.0 { rng.random_range(range.0..=range.1) } else { range.0 };
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

fn sample_structure<R: Rng>(cfg: &GeneratorConfig, rng: &mut R) -> DbnStructure {
    let n = cfg.n_x;
    let mut s = DbnStructure::empty(n, cfg.n_z, cfg.p);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.random_bool(cfg.edge_prob.intra) {
                s.intra.set(perm[a], perm[b], true);
            }
        }
    }
    for j in 0..n {
        for i in 0..n {
            if i != j && rng.random_bool(cfg.edge_prob.inter) {
                s.inter.set(j, i, true);
            }
        }
    }
    for i in 0..n {
        for lag in 1..=cfg.p {
            if rng.random_bool(cfg.edge_prob.auto) {
                s.auto_lags[i].insert(lag);
            }
        }
    }
    for j in 0..cfg.n_z {
        for i in 0..n {
            if rng.random_bool(cfg.edge_prob.static_) {
                s.static_edges.set(j, i, true);
            }
        }
    }
    for i in 0..n {
        let fam = s.family(i);
        if fam.len() > cfg.max_in_degree {
            let mut keep = fam.parents().to_vec();
            keep.shuffle(rng);
            keep.truncate(cfg.max_in_degree);
            let fam = FamilySpec::new(i, keep).expect("subset of a valid family");
            s.set_family(&fam);
        }
    }
    s
}

fn dirichlet_row<R: Rng>(rng: &mut R, k: usize, alpha: f64, temperature: f64) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("positive concentration");
    loop {
        let mut row: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
        let max = row.iter().cloned().fold(0.0, f64::max);
        if !(max > 0.0) {
            continue;
        }
        // scale before sharpening to keep powf away from underflow
        for v in &mut row {
            *v = (*v / max).powf(1.0 / temperature);
        }
        let s: f64 = row.iter().sum();
        for v in &mut row {
            *v /= s;
        }
        // absorb the rounding residue into the largest entry
        let resid = 1.0 - row.iter().sum::<f64>();
        let imax = row.iter().enumerate().fold(0, |b, (i, &v)| if v > row[b] { i } else { b });
        row[imax] += resid;
        return row;
    }
}

fn sample_node_params<R: Rng>(
    cfg: &GeneratorConfig,
    domain: &Domain,
    fam: &FamilySpec,
    rng: &mut R,
) -> NodeParams {
    let i = fam.node;
    let parent_arity = |p: ParentRef| match (domain, p) {
        (Domain::Discrete { x_arities, .. }, ParentRef::Inter(j) | ParentRef::Intra(j)) => x_arities[j],
        (Domain::Discrete { x_arities, .. }, ParentRef::Auto(_)) => x_arities[i],
        (Domain::Discrete { z_arities, .. }, ParentRef::Static(j)) => z_arities[j],
        (Domain::Continuous, _) => 0,
    };
    let k = fam.len();
    match cfg.family {
        ModelFamily::Cpt => {
            let parent_arities: Vec<usize> = fam.parents().iter().map(|&p| parent_arity(p)).collect();
            let q = num_configurations(&parent_arities);
            let r = cfg.child_arity();
            let theta = (0..q).map(|_| dirichlet_row(rng, r, cfg.dirichlet_alpha, cfg.temperature)).collect();
            NodeParams::Cpt(Cpt { child_arity: r, parent_arities, theta })
        }
        ModelFamily::FactoredCpt => {
            let (dyn_p, stat_p) = fam.split_static();
            let dyn_arities: Vec<usize> = dyn_p.iter().map(|&p| parent_arity(p)).collect();
            let stat_arities: Vec<usize> = stat_p.iter().map(|&p| parent_arity(p)).collect();
            let theta_dyn = (0..num_configurations(&dyn_arities)).map(|_| rng.random::<f64>()).collect();
            let theta_stat = (0..num_configurations(&stat_arities)).map(|_| rng.random::<f64>()).collect();
            NodeParams::FactoredCpt(FactoredCpt { dyn_arities, stat_arities, theta_dyn, theta_stat })
        }
        ModelFamily::NoisyOr => {
            let (lo, hi) = cfg.leak_range;
            let lambda0 = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let (lo, hi) = cfg.noisy_or_range;
            let lambdas = (0..k).map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo }).collect();
            NodeParams::NoisyOr(NoisyOr { lambda0, lambdas })
        }
        ModelFamily::Logistic => {
            let beta: Vec<f64> = (0..k).map(|_| signed_weight(rng, cfg.weight_range)).collect();
            let beta0 = -0.5 * beta.iter().sum::<f64>();
            NodeParams::Logistic(Logistic { beta0, beta })
        }
        ModelFamily::LinearGaussian => {
            let beta = (0..k).map(|_| signed_weight(rng, cfg.weight_range)).collect();
            NodeParams::LinearGaussian(LinearGaussian { beta0: 0.0, beta, sigma2: cfg.noise_sigma * cfg.noise_sigma })
        }
    }
}

/// Reduced-form lag matrices `A_tau (I - W)^{-1}` of a linear-Gaussian DBN,
/// in the row-vector convention `x(t) = sum_tau x(t-tau) M_tau + noise`.
fn reduced_lag_matrices(structure: &DbnStructure, params: &ParameterSet) -> Vec<DMatrix<f64>> {
    let n = structure.n_x;
    let mut w = DMatrix::zeros(n, n);
    let mut lags = vec![DMatrix::zeros(n, n); structure.p];
    for (i, np) in params.nodes.iter().enumerate() {
        let NodeParams::LinearGaussian(g) = np else { continue };
        for (&p, &b) in structure.family(i).parents().iter().zip(&g.beta) {
            match p {
                ParentRef::Intra(j) => w[(j, i)] = b,
                ParentRef::Inter(j) => lags[0][(j, i)] = b,
                ParentRef::Auto(l) => lags[l - 1][(i, i)] = b,
                ParentRef::Static(_) => {}
            }
        }
    }
    let inv = (DMatrix::identity(n, n) - w).try_inverse().expect("I - W is unipotent for a DAG");
    lags.into_iter().map(|a| a * &inv).collect()
}

/// Spectral radius estimate `||C^k||^(1/k)` of the companion matrix, k = 2^10.
fn companion_radius(lags: &[DMatrix<f64>]) -> f64 {
    let n = lags[0].nrows();
    let p = lags.len();
    let mut c = DMatrix::zeros(n * p, n * p);
    // state row vector [x(t-1), ..., x(t-p)] maps to [x(t), ..., x(t-p+1)]
    for (tau, a) in lags.iter().enumerate() {
        c.view_mut((tau * n, 0), (n, n)).copy_from(a);
    }
    for k in 1..p {
        for d in 0..n {
            c[((k - 1) * n + d, k * n + d)] = 1.0;
        }
    }
    let mut log_scale = 0.0;
    let mut m = c;
    let squarings = 10;
    for _ in 0..squarings {
        let norm = m.amax();
        if norm == 0.0 {
            return 0.0;
        }
        m /= norm;
        log_scale = 2.0 * (log_scale + norm.ln());
        m = &m * &m;
    }
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    ((log_scale + norm.ln()) / (1u64 << squarings) as f64).exp()
}

fn stabilize(structure: &DbnStructure, params: &mut ParameterSet) {
    for _ in 0..100 {
        let rho = companion_radius(&reduced_lag_matrices(structure, params));
        if rho < STABLE_RADIUS {
            return;
        }
        let shrink = 0.98 * STABLE_RADIUS / rho;
        for (i, np) in params.nodes.iter_mut().enumerate() {
            let NodeParams::LinearGaussian(g) = np else { continue };
            for (&p, b) in structure.family(i).parents().iter().zip(g.beta.iter_mut()) {
                if matches!(p, ParentRef::Inter(_) | ParentRef::Auto(_)) {
                    *b *= shrink;
                }
            }
        }
    }
}

/// Draws a random ground-truth DBN. Deterministic in `config.seed`.
pub fn sample_random_dbn(config: &GeneratorConfig) -> Result<GroundTruth> {
    config.validate()?;
    let mut rng = rng_for(config.seed, u64::MAX);
    let structure = sample_structure(config, &mut rng);
    let domain = config.domain();
    let nodes = (0..config.n_x)
        .map(|i| sample_node_params(config, &domain, &structure.family(i), &mut rng))
        .collect();
    let mut params = ParameterSet { nodes };
    if config.family == ModelFamily::LinearGaussian && config.stabilize {
        stabilize(&structure, &mut params);
    }
    Ok(GroundTruth { structure, params, domain })
}

fn sample_conditional<R: Rng>(c: &Conditional, rng: &mut R) -> f64 {
    match c {
        Conditional::Categorical(p) => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (k, &pk) in p.iter().enumerate() {
                acc += pk;
                if u < acc {
                    return k as f64;
                }
            }
            // u landed in the rounding gap; take the last value with mass
            p.iter().rposition(|&pk| pk > 0.0).unwrap_or(0) as f64
        }
        Conditional::Gaussian { mean, var } => {
            let e: f64 = StandardNormal.sample(rng);
            mean + var.sqrt() * e
        }
    }
}

/// Samples `n_traj` trajectories of `horizon + 1` slices.
///
/// Initial slices and static covariates are independent uniform categorical
/// (discrete) or standard normal (continuous). Nodes are sampled in
/// topological order of the intra graph. When a lagged parent reaches before
/// slice 0 the value at slice 0 is used; such transitions are never scored.
pub fn sample_trajectories(
    structure: &DbnStructure,
    params: &ParameterSet,
    domain: &Domain,
    n_traj: usize,
    horizon: usize,
    seed: u64,
) -> Result<TrajectoryDataset> {
    structure.validate()?;
    let n_x = structure.n_x;
    let n_z = structure.n_z;
    if params.nodes.len() != n_x {
        return Err(DbnError::Model("one parameter block per node required".into()));
    }
    let families = structure.families();
    for (fam, np) in families.iter().zip(&params.nodes) {
        let (child, parents) = match domain {
            Domain::Discrete { x_arities, z_arities } => {
                let pa = fam
                    .parents()
                    .iter()
                    .map(|&p| {
                        Some(match p {
                            ParentRef::Inter(j) | ParentRef::Intra(j) => x_arities[j],
                            ParentRef::Auto(_) => x_arities[fam.node],
                            ParentRef::Static(j) => z_arities[j],
                        })
                    })
                    .collect::<Vec<_>>();
                (Some(x_arities[fam.node]), pa)
            }
            Domain::Continuous => (None, vec![None; fam.len()]),
        };
        np.check_family(fam, child, &parents)?;
    }
    let order = topological_order(&structure.intra)?;

    let per_traj = par::map_indices(n_traj, |n| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut rng = rng_for(seed, n as u64);
        let z: Vec<f64> = match domain {
            Domain::Discrete { z_arities, .. } => z_arities.iter().map(|&a| rng.random_range(0..a) as f64).collect(),
            Domain::Continuous => (0..n_z).map(|_| StandardNormal.sample(&mut rng)).collect(),
        };
        let mut x = vec![0.0; (horizon + 1) * n_x];
        for v in 0..n_x {
            x[v] = match domain {
                Domain::Discrete { x_arities, .. } => rng.random_range(0..x_arities[v]) as f64,
                Domain::Continuous => StandardNormal.sample(&mut rng),
            };
        }
        let mut pv = Vec::new();
        for t in 1..=horizon {
            for &i in &order {
                pv.clear();
                for &p in families[i].parents() {
                    let val = match p {
                        ParentRef::Inter(j) => x[(t - 1) * n_x + j],
                        ParentRef::Intra(j) => x[t * n_x + j],
                        ParentRef::Auto(lag) => x[t.saturating_sub(lag) * n_x + i],
                        ParentRef::Static(j) => z[j],
                    };
                    pv.push(val);
                }
                let cond = params.nodes[i].conditional(&pv)?;
                x[t * n_x + i] = sample_conditional(&cond, &mut rng);
            }
        }
        Ok((x, z))
    });

    let mut xs = Vec::with_capacity(n_traj * (horizon + 1) * n_x);
    let mut zs = Vec::with_capacity(n_traj * n_z);
    for r in per_traj {
        let (x, z) = r?;
        xs.extend(x);
        zs.extend(z);
    }
    TrajectoryDataset::new(domain.clone(), n_x, n_z, n_traj, horizon, xs, zs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeLabel {
    Favorable,
    HighDimensional,
    Custom,
}

/// Size triple `(n, N, T)`: variables, trajectories, time steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SizeTriple {
    pub n: usize,
    pub n_traj: usize,
    pub horizon: usize,
}

impl SizeTriple {
    pub const fn new(n: usize, n_traj: usize, horizon: usize) -> Self {
        Self { n, n_traj, horizon }
    }
}

impl std::fmt::Display for SizeTriple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.n, self.n_traj, self.horizon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub label: RegimeLabel,
    pub triples: Vec<SizeTriple>,
}

impl RegimeSpec {
    /// Enough samples per variable for identification.
    pub fn favorable() -> Self {
        Self {
            label: RegimeLabel::Favorable,
            triples: vec![
                SizeTriple::new(3, 30, 10),
                SizeTriple::new(5, 50, 50),
                SizeTriple::new(10, 100, 200),
                SizeTriple::new(20, 400, 400),
                SizeTriple::new(30, 600, 500),
            ],
        }
    }

    /// Few samples relative to the number of candidate edges.
    pub fn high_dimensional() -> Self {
        Self {
            label: RegimeLabel::HighDimensional,
            triples: vec![
                SizeTriple::new(3, 5, 10),
                SizeTriple::new(5, 10, 20),
                SizeTriple::new(10, 20, 40),
                SizeTriple::new(20, 40, 50),
                SizeTriple::new(30, 60, 100),
            ],
        }
    }

    pub fn custom(triples: Vec<SizeTriple>) -> Self {
        Self { label: RegimeLabel::Custom, triples }
    }

    pub fn validate(&self) -> Result<()> {
        if self.triples.iter().any(|t| t.n == 0 || t.n_traj == 0 || t.horizon == 0) {
            return Err(DbnError::Range("regime triples must be positive".into()));
        }
        Ok(())
    }
}

/// One generated dataset of a regime sweep.
#[derive(Debug, Clone)]
pub struct RegimeInstance {
    pub triple_index: usize,
    pub triple: SizeTriple,
    pub replicate: usize,
    pub seed: u64,
    pub truth: GroundTruth,
    pub dataset: TrajectoryDataset,
}

/// Seed of replicate `replicate` of triple `triple_index` under a master seed.
pub fn instance_seed(master: u64, triple_index: usize, replicate: usize) -> u64 {
    derive_seed(derive_seed(master, triple_index as u64), replicate as u64)
}

/// Generates `replicates` (truth, dataset) pairs per triple. The template's
/// `n_x` is overridden by each triple's `n`.
pub fn regime_datasets(
    regime: &RegimeSpec,
    template: &GeneratorConfig,
    replicates: usize,
) -> Result<Vec<RegimeInstance>> {
    regime.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..regime.triples.len()).flat_map(|ti| (0..replicates).map(move |r| (ti, r))).collect();
    par::map_slice(&jobs, |&(ti, r)| {
        let triple = regime.triples[ti];
        let seed = instance_seed(template.seed, ti, r);
        generate_instance(template, triple, seed).map(|(truth, dataset)| RegimeInstance {
            triple_index: ti,
            triple,
            replicate: r,
            seed,
            truth,
            dataset,
        })
    })
    .into_iter()
    .collect()
}

/// Draws a truth and a dataset for one size triple.
pub fn generate_instance(
    template: &GeneratorConfig,
    triple: SizeTriple,
    seed: u64,
) -> Result<(GroundTruth, TrajectoryDataset)> {
    let cfg = GeneratorConfig { n_x: triple.n, seed: derive_seed(seed, 0), ..template.clone() };
    let truth = sample_random_dbn(&cfg)?;
    let data = sample_trajectories(
        &truth.structure,
        &truth.params,
        &truth.domain,
        triple.n_traj,
        triple.horizon,
        derive_seed(seed, 1),
    )?;
    Ok((truth, data))
}

//! Decomposable per-family scores and a concurrent memo table.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::bde::{bde_family_score, DirichletPrior};
use super::bge::{bge_family_score, BgeHyper};
use super::counts::count_transitions_from;
use super::criteria::{information_criterion, Criterion};
use super::gaussian::fit_linear_gaussian;
use crate::dbn::{DbnStructure, FamilySpec, ParentRef, TrajectoryDataset};
use crate::error::{DbnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    #[serde(rename = "ll")]
    LogLik,
    Aic,
    Aicc,
    Bic,
    Bde,
    Bge,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 6] =
        [ScoreKind::LogLik, ScoreKind::Aic, ScoreKind::Aicc, ScoreKind::Bic, ScoreKind::Bde, ScoreKind::Bge];

    pub fn criterion(self) -> Option<Criterion> {
        match self {
            ScoreKind::Aic => Some(Criterion::Aic),
            ScoreKind::Aicc => Some(Criterion::Aicc),
            ScoreKind::Bic => Some(Criterion::Bic),
            _ => None,
        }
    }

    pub fn supports(self, discrete: bool) -> bool {
        match self {
            ScoreKind::Bde => discrete,
            ScoreKind::Bge => !discrete,
            _ => true,
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreKind::LogLik => "ll",
            ScoreKind::Aic => "aic",
            ScoreKind::Aicc => "aicc",
            ScoreKind::Bic => "bic",
            ScoreKind::Bde => "bde",
            ScoreKind::Bge => "bge",
        })
    }
}

impl std::str::FromStr for ScoreKind {
    type Err = DbnError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "ll" | "loglik" => ScoreKind::LogLik,
            "aic" => ScoreKind::Aic,
            "aicc" => ScoreKind::Aicc,
            "bic" => ScoreKind::Bic,
            "bde" | "bdeu" => ScoreKind::Bde,
            "bge" => ScoreKind::Bge,
            _ => return Err(DbnError::Parse(format!("unknown score kind {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreOptions {
    /// Dirichlet equivalent sample size for BDe.
    pub ess: f64,
    pub bge: BgeHyper,
    /// Earliest child time scored. Learners pass `max(1, p)` so every
    /// candidate family sees the same transitions.
    pub first: usize,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self { ess: 1.0, bge: BgeHyper::default(), first: 1 }
    }
}

/// Score of one family, oriented so that higher is better.
///
/// Criterion kinds return `-(-2 ll + C)`. A family the criterion cannot
/// score (AICc outside its domain, too few rows for a Gaussian fit) gets
/// `-inf` so searches treat it as infeasible.
pub fn family_score(data: &TrajectoryDataset, family: &FamilySpec, kind: ScoreKind, opts: &ScoreOptions) -> Result<f64> {
    let discrete = data.is_discrete();
    if !kind.supports(discrete) {
        return Err(DbnError::Domain(format!("{kind} score is not defined for this data domain")));
    }
    let first = opts.first.max(family.first_usable_time());
    if kind == ScoreKind::Bge {
        return bge_family_score(data, family, &opts.bge, first);
    }
    let (ll, k, n_eff) = if discrete {
        let counts = count_transitions_from(data, family, first)?;
        if kind == ScoreKind::Bde {
            return bde_family_score(&counts, &DirichletPrior::new(opts.ess));
        }
        (counts.max_loglik(), counts.free_parameters(), counts.grand_total() as usize)
    } else {
        match fit_linear_gaussian(data, family, first) {
            Ok(fit) => (fit.loglik, family.len() + 2, fit.rows),
            Err(DbnError::Underdetermined { .. }) => return Ok(f64::NEG_INFINITY),
            Err(e) => return Err(e),
        }
    };
    match kind.criterion() {
        None => Ok(ll),
        Some(c) => match information_criterion(ll, k, n_eff, c) {
            Ok(v) => Ok(-v),
            Err(DbnError::Domain(_)) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        },
    }
}

/// Sum of family scores over every node.
pub fn structure_score(data: &TrajectoryDataset, structure: &DbnStructure, kind: ScoreKind, opts: &ScoreOptions) -> Result<f64> {
    structure.validate()?;
    let mut total = 0.0;
    for fam in structure.families() {
        total += family_score(data, &fam, kind, opts)?;
    }
    Ok(total)
}

/// Memoized [`family_score`] for one dataset, kind and option set.
///
/// Safe for concurrent use; values are deterministic so racing inserts of
/// the same key store identical bits.
#[derive(Debug)]
pub struct ScoreCache {
    kind: ScoreKind,
    opts: ScoreOptions,
    map: RwLock<HashMap<FamilySpec, f64>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl ScoreCache {
    pub fn new(kind: ScoreKind, opts: ScoreOptions) -> Self {
        Self { kind, opts, map: RwLock::new(HashMap::new()), hits: AtomicU64::new(0), misses: AtomicU64::new(0) }
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn options(&self) -> &ScoreOptions {
        &self.opts
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("score cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn score(&self, data: &TrajectoryDataset, family: &FamilySpec) -> Result<f64> {
        if let Some(&v) = self.map.read().expect("score cache poisoned").get(family) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(v);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let v = family_score(data, family, self.kind, &self.opts)?;
        self.map.write().expect("score cache poisoned").insert(family.clone(), v);
        Ok(v)
    }

    /// Scores the entries of `families` not yet cached, in parallel.
    pub fn populate(&self, data: &TrajectoryDataset, families: &[FamilySpec]) -> Result<()> {
        let missing: Vec<&FamilySpec> = {
            let map = self.map.read().expect("score cache poisoned");
            let mut seen = std::collections::HashSet::new();
            families.iter().filter(|f| !map.contains_key(*f) && seen.insert(*f)).collect()
        };
        if missing.is_empty() {
            return Ok(());
        }
        let scored = crate::par::map_slice(&missing, |f| family_score(data, f, self.kind, &self.opts));
        let mut map = self.map.write().expect("score cache poisoned");
        for (f, v) in missing.into_iter().zip(scored) {
            map.insert(f.clone(), v?);
        }
        Ok(())
    }

    /// One line per entry, `node\tparents\tkind\tvalue`, sorted by node then
    /// canonical parent list. Values carry 17 significant digits; an empty
    /// parent set prints as `-`.
    pub fn dump(&self) -> String {
        let map = self.map.read().expect("score cache poisoned");
        let mut entries: Vec<(&FamilySpec, &f64)> = map.iter().collect();
        entries.sort_by(|a, b| (a.0.node, a.0.parents()).cmp(&(b.0.node, b.0.parents())));
        let mut out = String::new();
        for (f, v) in entries {
            let parents = if f.is_empty() { "-".to_string() } else { f.key() };
            out.push_str(&format!("{}\t{}\t{}\t{}\n", f.node, parents, self.kind, format_score(*v)));
        }
        out
    }
}

/// Formats with 17 significant digits.
pub fn format_score(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Memoized lookup with the parent list given in any order.
pub fn cached_family_score(cache: &ScoreCache, data: &TrajectoryDataset, node: usize, parents: &[ParentRef]) -> Result<f64> {
    cache.score(data, &FamilySpec::new(node, parents.to_vec())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbn::Domain;

    fn binary_data() -> TrajectoryDataset {
        let x: Vec<f64> = (0..3 * 2 * 11).map(|i| f64::from(((i * 7 + i / 5) % 3 == 0) as u8)).collect();
        TrajectoryDataset::new(Domain::Discrete { x_arities: vec![2, 2], z_arities: vec![] }, 2, 0, 3, 10, x, vec![]).unwrap()
    }

    #[test]
    fn permuted_parents_hit() {
        let d = binary_data();
        let cache = ScoreCache::new(ScoreKind::Bic, ScoreOptions::default());
        let a = cached_family_score(&cache, &d, 0, &[ParentRef::Intra(1), ParentRef::Inter(0)]).unwrap();
        let b = cached_family_score(&cache, &d, 0, &[ParentRef::Inter(0), ParentRef::Intra(1)]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!((cache.hits(), cache.misses(), cache.len()), (1, 1, 1));
        let c = cached_family_score(&cache, &d, 1, &[ParentRef::Inter(0)]).unwrap();
        assert_eq!(cache.len(), 2);
        let fresh = family_score(&d, &FamilySpec::new(1, vec![ParentRef::Inter(0)]).unwrap(), ScoreKind::Bic, &ScoreOptions::default()).unwrap();
        assert_eq!(c.to_bits(), fresh.to_bits());
    }

    #[test]
    fn dump_lines() {
        let d = binary_data();
        let cache = ScoreCache::new(ScoreKind::LogLik, ScoreOptions::default());
        cache.score(&d, &FamilySpec::new(1, vec![ParentRef::Inter(1)]).unwrap()).unwrap();
        cache.score(&d, &FamilySpec::empty(0)).unwrap();
        let dump = cache.dump();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("0\t-\tll\t"));
        assert!(lines[1].starts_with("1\tinter:1\tll\t"));
        let v: f64 = lines[0].split('\t').nth(3).unwrap().parse().unwrap();
        assert_eq!(v.to_bits(), cache.score(&d, &FamilySpec::empty(0)).unwrap().to_bits());
    }

    #[test]
    fn kind_round_trip() {
        for k in ScoreKind::ALL {
            assert_eq!(k.to_string().parse::<ScoreKind>().unwrap(), k);
        }
    }
}

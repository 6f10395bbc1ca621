use super::dp::{best_dag, LocalTable};
use super::{require_transitions, subsets_up_to, Deadline, LearnerReport, SearchConfig, TraceEntry};
use crate::dbn::{DbnStructure, FamilySpec, ParentRef, TrajectoryDataset};
use crate::error::{DbnError, Result};
use crate::scoring::ScoreCache;

/// Largest `n_x` accepted by [`exact_search`].
pub const EXACT_MAX_NODES: usize = 12;

pub fn exact_search(data: &TrajectoryDataset, cfg: &SearchConfig) -> Result<LearnerReport> {
    exact_search_until(data, cfg, &Deadline::never())
}

/// Maximizes the summed family score over every structure allowed by `cfg`.
///
/// For each node and each allowed intra parent set, every combination of
/// temporal parents is scored and the best kept; the intra sets are then
/// combined by dynamic programming over node subsets. Temporal parents never
/// close a cycle, so the result is the global optimum.
pub fn exact_search_until(data: &TrajectoryDataset, cfg: &SearchConfig, deadline: &Deadline) -> Result<LearnerReport> {
    cfg.validate()?;
    let n = data.n_x();
    if n > EXACT_MAX_NODES {
        return Err(DbnError::Size(format!("exact search supports at most {EXACT_MAX_NODES} dynamic variables, got {n}")));
    }
    let opts = cfg.score_options();
    require_transitions(data, opts.first)?;
    let cache = ScoreCache::new(cfg.score, opts);

    let mut locals: Vec<LocalTable> = Vec::with_capacity(n);
    for i in 0..n {
        let intra_sets = subsets_up_to(&cfg.intra_candidates(n, i), cfg.max_intra_parents);
        let temporal_sets = subsets_up_to(&cfg.temporal_candidates(n, data.n_z(), i), cfg.max_temporal_parents);
        let mut families = Vec::with_capacity(intra_sets.len() * temporal_sets.len());
        for s in &intra_sets {
            for t in &temporal_sets {
                families.push(FamilySpec::new(i, s.iter().chain(t).copied().collect())?);
            }
        }
        cache.populate(data, &families)?;
        deadline.check()?;
        let mut table: LocalTable = vec![None; 1 << n];
        for fam in families {
            let mask = fam.parents().iter().fold(0usize, |m, p| match p {
                ParentRef::Intra(j) => m | 1 << j,
                _ => m,
            });
            let score = cache.score(data, &fam)?;
            let better = match &table[mask] {
                None => true,
                Some((s, f)) => score > *s || (score == *s && fam.parents() < f.parents()),
            };
            if better {
                table[mask] = Some((score, fam));
            }
        }
        locals.push(table);
    }
    let families = best_dag(&locals, deadline)?;
    let structure = DbnStructure::from_families(n, data.n_z(), cfg.p, &families);
    let mut score = 0.0;
    for fam in &families {
        score += cache.score(data, fam)?;
    }
    Ok(LearnerReport {
        learner: "exact".into(),
        structure,
        params: None,
        score,
        score_kind: cfg.score.to_string(),
        objective: None,
        converged: true,
        trace: vec![TraceEntry { iteration: 0, score, h: None }],
        weights: None,
        seed: cfg.seed,
        wall_ms: None,
    })
}

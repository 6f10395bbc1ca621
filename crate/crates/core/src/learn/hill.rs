use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{require_transitions, Deadline, LearnerReport, SearchConfig, TraceEntry};
use crate::dbn::{Adjacency, DbnStructure, FamilySpec, ParentRef, TrajectoryDataset};
use crate::error::Result;
use crate::scoring::{family_score, ScoreCache};
use crate::simulate::rng_for;

/// A single-edge change. `Reverse` turns the intra edge `from -> to` into `to -> from`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Move {
    Add { node: usize, parent: ParentRef },
    Delete { node: usize, parent: ParentRef },
    Reverse { from: usize, to: usize },
}

fn is_intra(p: &ParentRef) -> bool {
    matches!(p, ParentRef::Intra(_))
}

fn intra_count(f: &FamilySpec) -> usize {
    f.parents().iter().filter(|p| is_intra(p)).count()
}

fn reaches(adj: &Adjacency, from: usize, to: usize) -> bool {
    let n = adj.rows();
    let mut seen = vec![false; n];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(u) = stack.pop() {
        if u == to {
            return true;
        }
        for v in 0..n {
            if adj.get(u, v) && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    false
}

fn intra_graph(families: &[FamilySpec]) -> Adjacency {
    let mut adj = Adjacency::square(families.len());
    for f in families {
        for p in f.parents() {
            if let ParentRef::Intra(j) = p {
                adj.set(*j, f.node, true);
            }
        }
    }
    adj
}

/// Every legal move from `families` with the families it produces.
fn neighbours(families: &[FamilySpec], pools: &[Vec<ParentRef>], cfg: &SearchConfig) -> Vec<(Move, Vec<FamilySpec>)> {
    let intra = intra_graph(families);
    let mut out = Vec::new();
    for (i, fam) in families.iter().enumerate() {
        let n_intra = intra_count(fam);
        let n_temporal = fam.len() - n_intra;
        for &c in &pools[i] {
            if fam.contains(c) {
                out.push((Move::Delete { node: i, parent: c }, vec![fam.without(c)]));
                if let ParentRef::Intra(j) = c {
                    let other = &families[j];
                    if intra_count(other) < cfg.max_intra_parents {
                        let mut g = intra.clone();
                        g.set(j, i, false);
                        if !reaches(&g, j, i) {
                            let new_other = other.with(ParentRef::Intra(i)).expect("valid intra parent");
                            out.push((Move::Reverse { from: j, to: i }, vec![fam.without(c), new_other]));
                        }
                    }
                }
            } else {
                let legal = match c {
                    ParentRef::Intra(j) => n_intra < cfg.max_intra_parents && !reaches(&intra, i, j),
                    _ => n_temporal < cfg.max_temporal_parents,
                };
                if legal {
                    out.push((Move::Add { node: i, parent: c }, vec![fam.with(c).expect("candidate not present")]));
                }
            }
        }
    }
    out
}

fn pools(cfg: &SearchConfig, n: usize, n_z: usize) -> Vec<Vec<ParentRef>> {
    (0..n)
        .map(|i| {
            let mut p = cfg.temporal_candidates(n, n_z, i);
            p.extend(cfg.intra_candidates(n, i));
            p.sort();
            p
        })
        .collect()
}

fn random_start(cfg: &SearchConfig, pools: &[Vec<ParentRef>], restart: usize) -> Vec<FamilySpec> {
    let n = pools.len();
    let mut rng = rng_for(cfg.seed, restart as u64);
    let mut parents: Vec<Vec<ParentRef>> = vec![Vec::new(); n];
    if cfg.intra {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        for a in 0..n {
            for b in (a + 1)..n {
                if rng.random_bool(cfg.restart_edge_prob) {
                    let child = perm[b];
                    if parents[child].len() < cfg.max_intra_parents {
                        parents[child].push(ParentRef::Intra(perm[a]));
                    }
                }
            }
        }
    }
    for (i, pool) in pools.iter().enumerate() {
        let mut temporal = 0;
        for &c in pool.iter().filter(|c| !is_intra(c)) {
            if rng.random_bool(cfg.restart_edge_prob) && temporal < cfg.max_temporal_parents {
                parents[i].push(c);
                temporal += 1;
            }
        }
    }
    parents
        .into_iter()
        .enumerate()
        .map(|(i, p)| FamilySpec::new(i, p).expect("distinct candidates"))
        .collect()
}

struct Climb {
    families: Vec<FamilySpec>,
    score: f64,
    trace: Vec<TraceEntry>,
    converged: bool,
}

fn total(scores: &[f64]) -> f64 {
    scores.iter().sum()
}

fn climb(
    data: &TrajectoryDataset,
    cfg: &SearchConfig,
    cache: &ScoreCache,
    pools: &[Vec<ParentRef>],
    mut families: Vec<FamilySpec>,
    deadline: &Deadline,
) -> Result<Climb> {
    cache.populate(data, &families)?;
    let mut scores: Vec<f64> = families.iter().map(|f| cache.score(data, f)).collect::<Result<_>>()?;
    let mut trace = vec![TraceEntry { iteration: 0, score: total(&scores), h: None }];
    let mut converged = false;
    for it in 1..=cfg.max_moves {
        deadline.check()?;
        let moves = neighbours(&families, pools, cfg);
        let proposed: Vec<FamilySpec> = moves.iter().flat_map(|(_, f)| f.iter().cloned()).collect();
        cache.populate(data, &proposed)?;
        let mut best: Option<(f64, usize)> = None;
        for (k, (_, fams)) in moves.iter().enumerate() {
            let mut delta = 0.0;
            for f in fams {
                delta += cache.score(data, f)? - scores[f.node];
            }
            if delta > 0.0 && best.is_none_or(|(d, _)| delta > d) {
                best = Some((delta, k));
            }
        }
        let Some((_, k)) = best else {
            converged = true;
            break;
        };
        for f in &moves[k].1 {
            scores[f.node] = cache.score(data, f)?;
            families[f.node] = f.clone();
        }
        trace.push(TraceEntry { iteration: it, score: total(&scores), h: None });
    }
    Ok(Climb { score: total(&scores), families, trace, converged })
}

pub fn hill_climb(data: &TrajectoryDataset, cfg: &SearchConfig) -> Result<LearnerReport> {
    hill_climb_until(data, cfg, &Deadline::never())
}

/// Steepest-ascent search from the empty graph and `restarts - 1` random
/// graphs; the best local optimum is returned (earliest start on ties).
pub fn hill_climb_until(data: &TrajectoryDataset, cfg: &SearchConfig, deadline: &Deadline) -> Result<LearnerReport> {
    cfg.validate()?;
    let opts = cfg.score_options();
    require_transitions(data, opts.first)?;
    let n = data.n_x();
    let pools = pools(cfg, n, data.n_z());
    let cache = ScoreCache::new(cfg.score, opts);
    let runs = crate::par::map_indices(cfg.restarts, |r| {
        let start = if r == 0 { (0..n).map(FamilySpec::empty).collect() } else { random_start(cfg, &pools, r) };
        climb(data, cfg, &cache, &pools, start, deadline)
    });
    let mut best: Option<Climb> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.score > b.score) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    let structure = DbnStructure::from_families(n, data.n_z(), cfg.p, &best.families);
    Ok(LearnerReport {
        learner: "hill_climb".into(),
        structure,
        params: None,
        score: best.score,
        score_kind: cfg.score.to_string(),
        objective: None,
        converged: best.converged,
        trace: best.trace,
        weights: None,
        seed: cfg.seed,
        wall_ms: None,
    })
}

/// Moves from `structure` that strictly increase the score, with their gains.
/// Empty exactly when `structure` is a local optimum of [`hill_climb`].
pub fn improving_moves(data: &TrajectoryDataset, structure: &DbnStructure, cfg: &SearchConfig) -> Result<Vec<(Move, f64)>> {
    let opts = cfg.score_options();
    let pools = pools(cfg, data.n_x(), data.n_z());
    let families = structure.families();
    let current: Vec<f64> = families.iter().map(|f| family_score(data, f, cfg.score, &opts)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (mv, fams) in neighbours(&families, &pools, cfg) {
        let mut delta = 0.0;
        for f in &fams {
            delta += family_score(data, f, cfg.score, &opts)? - current[f.node];
        }
        if delta > 0.0 {
            out.push((mv, delta));
        }
    }
    Ok(out)
}

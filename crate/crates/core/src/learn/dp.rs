//! Optimal intra-slice DAG from per-node local score tables.
//!
//! `local[i][mask]` is the best family of node `i` whose intra parents are
//! exactly the nodes in `mask` (bit `i` never set), or `None` when that set is
//! not allowed. Higher scores win; equal scores go to the lexicographically
//! smaller parent list.

use super::Deadline;
use crate::dbn::FamilySpec;
use crate::error::Result;

pub(crate) type LocalTable = Vec<Option<(f64, FamilySpec)>>;

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

fn beats(a: &(f64, FamilySpec), b: &(f64, FamilySpec)) -> bool {
    let (sa, sb) = (sanitize(a.0), sanitize(b.0));
    sa > sb || (sa == sb && a.1.parents() < b.1.parents())
}

/// For every candidate set `U` the mask of the best allowed subset of `U`.
fn best_parent_sets(local: &LocalTable, node: usize, n: usize) -> Vec<Option<usize>> {
    let full = 1usize << n;
    let mut best: Vec<Option<usize>> = vec![None; full];
    for u in 0..full {
        if u & (1 << node) != 0 {
            continue;
        }
        let mut cur = local[u].as_ref().map(|_| u);
        let mut rest = u;
        while rest != 0 {
            let j = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if let Some(m) = best[u ^ (1 << j)] {
                let better = match cur {
                    None => true,
                    Some(c) => beats(local[m].as_ref().unwrap(), local[c].as_ref().unwrap()),
                };
                if better {
                    cur = Some(m);
                }
            }
        }
        best[u] = cur;
    }
    best
}

/// Returns one family per node maximizing the sum of local scores over all
/// acyclic intra graphs.
pub(crate) fn best_dag(locals: &[LocalTable], deadline: &Deadline) -> Result<Vec<FamilySpec>> {
    let n = locals.len();
    let full = 1usize << n;
    let bps: Vec<Vec<Option<usize>>> = crate::par::map_indices(n, |i| best_parent_sets(&locals[i], i, n));
    deadline.check()?;
    // net[w]: best total over node set w when its members are ordered before the rest
    let mut net = vec![f64::NEG_INFINITY; full];
    let mut sink = vec![usize::MAX; full];
    net[0] = 0.0;
    for w in 1..full {
        let mut rest = w;
        while rest != 0 {
            let s = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let prev = w ^ (1 << s);
            let Some(m) = bps[s][prev] else { continue };
            let total = net[prev] + sanitize(locals[s][m].as_ref().unwrap().0);
            if sink[w] == usize::MAX || total > net[w] {
                net[w] = total;
                sink[w] = s;
            }
        }
        if w % 4096 == 0 {
            deadline.check()?;
        }
    }
    let mut families = vec![None; n];
    let mut w = full - 1;
    while w != 0 {
        let s = sink[w];
        let prev = w ^ (1 << s);
        let m = bps[s][prev].expect("sink chosen with a feasible parent set");
        families[s] = Some(locals[s][m].as_ref().unwrap().1.clone());
        w = prev;
    }
    Ok(families.into_iter().map(|f| f.expect("every node assigned")).collect())
}

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dbn::{DbnStructure, ParentRef};
use crate::error::{DbnError, Result};
use crate::learn::LearnerReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeClass {
    Intra,
    Inter,
    Auto,
    Static,
}

impl EdgeClass {
    pub const ALL: [EdgeClass; 4] = [EdgeClass::Intra, EdgeClass::Inter, EdgeClass::Auto, EdgeClass::Static];

    pub fn of(parent: ParentRef) -> Self {
        match parent {
            ParentRef::Intra(_) => EdgeClass::Intra,
            ParentRef::Inter(_) => EdgeClass::Inter,
            ParentRef::Auto(_) => EdgeClass::Auto,
            ParentRef::Static(_) => EdgeClass::Static,
        }
    }
}

/// A candidate edge `parent -> node`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub node: usize,
    pub parent: ParentRef,
}

/// Every candidate edge of a transition graph in a fixed order: intra, inter
/// (`j != i`), auto lags `1..=p`, static; each block ordered by `(from, to)`.
///
/// An inter self edge `X_i(t) -> X_i(t+1)` is the lag-1 auto edge and maps to
/// that slot.
#[derive(Debug, Clone)]
pub struct EdgeUniverse {
    n_x: usize,
    n_z: usize,
    p: usize,
    edges: Vec<Edge>,
    index: HashMap<Edge, usize>,
}

impl EdgeUniverse {
    pub fn new(n_x: usize, n_z: usize, p: usize) -> Self {
        let mut edges = Vec::new();
        for j in 0..n_x {
            for i in (0..n_x).filter(|&i| i != j) {
                edges.push(Edge { node: i, parent: ParentRef::Intra(j) });
            }
        }
        for j in 0..n_x {
            for i in (0..n_x).filter(|&i| i != j) {
                edges.push(Edge { node: i, parent: ParentRef::Inter(j) });
            }
        }
        for i in 0..n_x {
            for tau in 1..=p {
                edges.push(Edge { node: i, parent: ParentRef::Auto(tau) });
            }
        }
        for s in 0..n_z {
            for i in 0..n_x {
                edges.push(Edge { node: i, parent: ParentRef::Static(s) });
            }
        }
        let index = edges.iter().enumerate().map(|(k, &e)| (e, k)).collect();
        Self { n_x, n_z, p, edges, index }
    }

    /// Universe covering both structures; they must agree on `n_x` and `n_z`.
    pub fn covering(a: &DbnStructure, b: &DbnStructure) -> Result<Self> {
        if a.n_x != b.n_x || a.n_z != b.n_z {
            return Err(DbnError::Dimension(format!(
                "structures have (n_x, n_z) = ({}, {}) and ({}, {})",
                a.n_x, a.n_z, b.n_x, b.n_z
            )));
        }
        Ok(Self::new(a.n_x, a.n_z, a.p.max(b.p).max(1)))
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn index_of(&self, node: usize, parent: ParentRef) -> Option<usize> {
        let parent = match parent {
            ParentRef::Inter(j) if j == node => ParentRef::Auto(1),
            p => p,
        };
        self.index.get(&Edge { node, parent }).copied()
    }

    /// Edge indicator vector of `s`.
    pub fn indicator(&self, s: &DbnStructure) -> Result<Vec<bool>> {
        if s.n_x != self.n_x || s.n_z != self.n_z || s.p > self.p {
            return Err(DbnError::Dimension(format!(
                "structure (n_x={}, n_z={}, p={}) outside universe (n_x={}, n_z={}, p={})",
                s.n_x, s.n_z, s.p, self.n_x, self.n_z, self.p
            )));
        }
        let mut v = vec![false; self.len()];
        for fam in s.families() {
            for &parent in fam.parents() {
                let k = self.index_of(fam.node, parent).expect("family parent lies in the universe");
                v[k] = true;
            }
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReversalCost {
    /// A reversed intra edge is one removal plus one addition.
    #[default]
    Two,
    One,
}

/// Structural Hamming distance over the covering edge universe.
pub fn shd(predicted: &DbnStructure, truth: &DbnStructure) -> Result<usize> {
    shd_with(predicted, truth, ReversalCost::Two)
}

pub fn shd_with(predicted: &DbnStructure, truth: &DbnStructure, reversal: ReversalCost) -> Result<usize> {
    let u = EdgeUniverse::covering(predicted, truth)?;
    let a = u.indicator(predicted)?;
    let b = u.indicator(truth)?;
    let mut d = a.iter().zip(&b).filter(|(x, y)| x != y).count();
    if reversal == ReversalCost::One {
        let n = predicted.n_x;
        for j in 0..n {
            for i in 0..n {
                let rev = predicted.intra.get(j, i)
                    && !predicted.intra.get(i, j)
                    && truth.intra.get(i, j)
                    && !truth.intra.get(j, i);
                if rev {
                    d -= 1;
                }
            }
        }
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Auroc {
    pub value: f64,
    /// Truth has no positive or no negative edge; `value` is then 0.5.
    pub degenerate: bool,
}

/// Probability that a random positive edge outscores a random negative one,
/// ties counting one half.
pub fn auroc(scores: &[f64], truth: &[bool]) -> Result<Auroc> {
    if scores.len() != truth.len() {
        return Err(DbnError::Dimension(format!("{} scores for {} edges", scores.len(), truth.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(DbnError::Range("edge scores contain NaN".into()));
    }
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Ok(Auroc { value: 0.5, degenerate: true });
    }
    // Mann-Whitney U from mid-ranks of the pooled scores.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            end += 1;
        }
        let mid = (k + 1 + end) as f64 / 2.0;
        rank_sum += mid * order[k..end].iter().filter(|&&e| truth[e]).count() as f64;
        k = end;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(Auroc { value: u / (pos * neg) as f64, degenerate: false })
}

/// [`auroc`] restricted to each edge class of `universe`.
pub fn auroc_by_class(universe: &EdgeUniverse, scores: &[f64], truth: &[bool]) -> Result<Vec<(EdgeClass, Auroc)>> {
    if scores.len() != universe.len() || truth.len() != universe.len() {
        return Err(DbnError::Dimension("scores and truth must cover the universe".into()));
    }
    EdgeClass::ALL
        .iter()
        .map(|&c| {
            let idx: Vec<usize> = (0..universe.len()).filter(|&k| EdgeClass::of(universe.edges[k].parent) == c).collect();
            let s: Vec<f64> = idx.iter().map(|&k| scores[k]).collect();
            let t: Vec<bool> = idx.iter().map(|&k| truth[k]).collect();
            auroc(&s, &t).map(|a| (c, a))
        })
        .collect()
}

/// Ranking scores of a learner's edges: absolute weights when the learner
/// reports them, otherwise the 0/1 indicator of its structure.
pub fn edge_scores(report: &LearnerReport, universe: &EdgeUniverse) -> Result<Vec<f64>> {
    let Some(wr) = &report.weights else {
        return Ok(universe.indicator(&report.structure)?.into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect());
    };
    let get = |m: &[Vec<f64>], r: usize, c: usize| m.get(r).and_then(|row| row.get(c)).map_or(0.0, |v| v.abs());
    Ok(universe
        .edges()
        .iter()
        .map(|e| match e.parent {
            ParentRef::Intra(j) => get(&wr.w, j, e.node),
            ParentRef::Inter(j) => wr.a.first().map_or(0.0, |a| get(a, j, e.node)),
            ParentRef::Auto(tau) => wr.a.get(tau - 1).map_or(0.0, |a| get(a, e.node, e.node)),
            ParentRef::Static(s) => get(&wr.b, s, e.node),
        })
        .collect())
}

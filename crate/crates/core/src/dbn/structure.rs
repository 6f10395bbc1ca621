use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{DbnError, Result};

/// Dense boolean adjacency, `get(from, to)` is the edge `from -> to`.
///
/// Serialized as nested arrays of 0/1 with one row per source node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Adjacency {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl Adjacency {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![false; rows * cols] }
    }

    pub fn square(n: usize) -> Self {
        Self::new(n, n)
    }

    /// Builds a square adjacency from a list of `(from, to)` edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut a = Self::square(n);
        for &(f, t) in edges {
            a.set(f, t, true);
        }
        a
    }

    pub fn from_rows(rows: Vec<Vec<bool>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(DbnError::Dimension("ragged adjacency rows".into()));
        }
        Ok(Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> bool {
        self.data[from * self.cols + to]
    }

    #[inline]
    pub fn set(&mut self, from: usize, to: usize, value: bool) {
        self.data[from * self.cols + to] = value;
    }

    pub fn edge_count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Edges in row-major `(from, to)` order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows).flat_map(move |f| (0..self.cols).filter(move |&t| self.get(f, t)).map(move |t| (f, t)))
    }

    pub fn to_rows(&self) -> Vec<Vec<bool>> {
        self.data.chunks(self.cols.max(1)).take(self.rows).map(<[bool]>::to_vec).collect()
    }
}

impl Serialize for Adjacency {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<u8>> = (0..self.rows)
            .map(|r| (0..self.cols).map(|c| u8::from(self.get(r, c))).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Adjacency {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<u8>> = Vec::deserialize(d)?;
        let rows = rows
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|v| match v {
                        0 => Ok(false),
                        1 => Ok(true),
                        other => Err(serde::de::Error::custom(format!("adjacency entry {other} is not 0/1"))),
                    })
                    .collect::<std::result::Result<Vec<bool>, D::Error>>()
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Adjacency::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// A parent of a node's transition, tagged by edge class.
///
/// The derived ordering (inter, intra, auto, static; each ascending) is the
/// global parent-ordering convention used for configuration indexing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "index")]
pub enum ParentRef {
    /// `X_j(t)` parent of `X_i(t+1)`.
    Inter(usize),
    /// `X_j(t+1)` parent of `X_i(t+1)`.
    Intra(usize),
    /// `X_i(t+1-lag)` parent of `X_i(t+1)`, lag >= 1.
    Auto(usize),
    /// Static covariate `Z_j`.
    Static(usize),
}

impl ParentRef {
    /// Number of slices back the parent value is read from.
    pub fn time_offset(self) -> usize {
        match self {
            ParentRef::Inter(_) => 1,
            ParentRef::Intra(_) | ParentRef::Static(_) => 0,
            ParentRef::Auto(lag) => lag,
        }
    }
}

impl fmt::Display for ParentRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParentRef::Inter(j) => write!(f, "inter:{j}"),
            ParentRef::Intra(j) => write!(f, "intra:{j}"),
            ParentRef::Auto(l) => write!(f, "auto:{l}"),
            ParentRef::Static(j) => write!(f, "static:{j}"),
        }
    }
}

impl std::str::FromStr for ParentRef {
    type Err = DbnError;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, idx) = s
            .split_once(':')
            .ok_or_else(|| DbnError::Parse(format!("parent `{s}` is not of the form kind:index")))?;
        let idx: usize = idx.trim().parse().map_err(|_| DbnError::Parse(format!("bad index in `{s}`")))?;
        match kind.trim() {
            "inter" => Ok(ParentRef::Inter(idx)),
            "intra" => Ok(ParentRef::Intra(idx)),
            "auto" => Ok(ParentRef::Auto(idx)),
            "static" => Ok(ParentRef::Static(idx)),
            other => Err(DbnError::Parse(format!("unknown parent kind `{other}`"))),
        }
    }
}

/// A node and its ordered parent list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FamilySpec {
    pub node: usize,
    parents: Vec<ParentRef>,
}

impl FamilySpec {
    /// Canonicalizes the parent order; duplicate tags are rejected.
    pub fn new(node: usize, mut parents: Vec<ParentRef>) -> Result<Self> {
        parents.sort_unstable();
        if parents.windows(2).any(|w| w[0] == w[1]) {
            return Err(DbnError::Model(format!("duplicate parent in family of node {node}")));
        }
        if parents.iter().any(|p| matches!(p, ParentRef::Auto(0))) {
            return Err(DbnError::Range("auto lag must be >= 1".into()));
        }
        if parents.contains(&ParentRef::Intra(node)) {
            return Err(DbnError::Model(format!("node {node} cannot be its own intra parent")));
        }
        Ok(Self { node, parents })
    }

    pub fn empty(node: usize) -> Self {
        Self { node, parents: Vec::new() }
    }

    pub fn parents(&self) -> &[ParentRef] {
        &self.parents
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn contains(&self, p: ParentRef) -> bool {
        self.parents.binary_search(&p).is_ok()
    }

    /// Returns a copy with `p` added (no-op if present).
    pub fn with(&self, p: ParentRef) -> Result<Self> {
        let mut ps = self.parents.clone();
        if !ps.contains(&p) {
            ps.push(p);
        }
        Self::new(self.node, ps)
    }

    pub fn without(&self, p: ParentRef) -> Self {
        Self { node: self.node, parents: self.parents.iter().copied().filter(|&q| q != p).collect() }
    }

    /// Largest number of slices any parent reaches back.
    pub fn max_offset(&self) -> usize {
        self.parents.iter().map(|p| p.time_offset()).max().unwrap_or(0)
    }

    /// First child time with every parent observed. Child times start at 1.
    pub fn first_usable_time(&self) -> usize {
        self.max_offset().max(1)
    }

    /// Per-parent availability flags for a child at slice `child_time`.
    pub fn availability(&self, child_time: usize) -> Vec<bool> {
        self.parents.iter().map(|p| p.time_offset() <= child_time).collect()
    }

    /// Parents that are split into the time-dependent and static blocks.
    pub fn split_static(&self) -> (Vec<ParentRef>, Vec<ParentRef>) {
        self.parents.iter().partition(|p| !matches!(p, ParentRef::Static(_)))
    }

    pub fn key(&self) -> String {
        self.parents.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
    }
}

/// The graph superset of a DBN: intra-slice DAG, lag-1 edges, per-node
/// autoregressive lags and static-covariate edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "StructureRepr")]
pub struct DbnStructure {
    pub n_x: usize,
    pub n_z: usize,
    pub p: usize,
    pub intra: Adjacency,
    pub inter: Adjacency,
    pub auto_lags: Vec<BTreeSet<usize>>,
    pub static_edges: Adjacency,
}

#[derive(Deserialize)]
struct StructureRepr {
    n_x: usize,
    n_z: usize,
    p: usize,
    intra: Adjacency,
    inter: Adjacency,
    auto_lags: Vec<BTreeSet<usize>>,
    static_edges: Adjacency,
}

impl From<StructureRepr> for DbnStructure {
    // a matrix with no rows serializes as `[]` and loses its column count
    fn from(r: StructureRepr) -> Self {
        let shape = |a: Adjacency, rows: usize, cols: usize| if a.rows() == 0 { Adjacency::new(rows, cols) } else { a };
        Self {
            n_x: r.n_x,
            n_z: r.n_z,
            p: r.p,
            intra: shape(r.intra, r.n_x, r.n_x),
            inter: shape(r.inter, r.n_x, r.n_x),
            auto_lags: r.auto_lags,
            static_edges: shape(r.static_edges, r.n_z, r.n_x),
        }
    }
}

impl DbnStructure {
    pub fn empty(n_x: usize, n_z: usize, p: usize) -> Self {
        Self {
            n_x,
            n_z,
            p: p.max(1),
            intra: Adjacency::square(n_x),
            inter: Adjacency::square(n_x),
            auto_lags: vec![BTreeSet::new(); n_x],
            static_edges: Adjacency::new(n_z, n_x),
        }
    }

    /// Checks all structural invariants.
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(DbnError::Range("maximum lag p must be >= 1".into()));
        }
        let sq = |a: &Adjacency, what: &str| {
            if a.rows() != self.n_x || a.cols() != self.n_x {
                Err(DbnError::Dimension(format!("{what} must be {0}x{0}", self.n_x)))
            } else {
                Ok(())
            }
        };
        sq(&self.intra, "intra")?;
        sq(&self.inter, "inter")?;
        if self.static_edges.rows() != self.n_z || self.static_edges.cols() != self.n_x {
            return Err(DbnError::Dimension(format!("static_edges must be {}x{}", self.n_z, self.n_x)));
        }
        if self.auto_lags.len() != self.n_x {
            return Err(DbnError::Dimension("auto_lags needs one entry per dynamic variable".into()));
        }
        for i in 0..self.n_x {
            if self.intra.get(i, i) {
                return Err(DbnError::Model(format!("intra self-loop on node {i}")));
            }
            if let Some(&bad) = self.auto_lags[i].iter().find(|&&l| l == 0 || l > self.p) {
                return Err(DbnError::Range(format!("lag {bad} of node {i} outside 1..={}", self.p)));
            }
            if self.inter.get(i, i) && self.auto_lags[i].contains(&1) {
                return Err(DbnError::Model(format!(
                    "node {i} has its lag-1 self edge both as inter and as auto lag"
                )));
            }
        }
        topological_order(&self.intra).map(|_| ())
    }

    /// Ordered family of `node` (see [`parents_of`]).
    pub fn family(&self, node: usize) -> FamilySpec {
        let mut parents = Vec::new();
        for j in 0..self.n_x {
            if self.inter.get(j, node) {
                parents.push(ParentRef::Inter(j));
            }
        }
        for j in 0..self.n_x {
            if self.intra.get(j, node) {
                parents.push(ParentRef::Intra(j));
            }
        }
        parents.extend(self.auto_lags[node].iter().map(|&l| ParentRef::Auto(l)));
        for j in 0..self.n_z {
            if self.static_edges.get(j, node) {
                parents.push(ParentRef::Static(j));
            }
        }
        FamilySpec { node, parents }
    }

    /// Replaces the parents of `family.node`.
    pub fn set_family(&mut self, family: &FamilySpec) {
        let i = family.node;
        for j in 0..self.n_x {
            self.inter.set(j, i, false);
            self.intra.set(j, i, false);
        }
        for j in 0..self.n_z {
            self.static_edges.set(j, i, false);
        }
        self.auto_lags[i].clear();
        for &p in family.parents() {
            match p {
                ParentRef::Inter(j) => self.inter.set(j, i, true),
                ParentRef::Intra(j) => self.intra.set(j, i, true),
                ParentRef::Auto(l) => {
                    self.auto_lags[i].insert(l);
                }
                ParentRef::Static(j) => self.static_edges.set(j, i, true),
            }
        }
    }

    pub fn families(&self) -> Vec<FamilySpec> {
        (0..self.n_x).map(|i| self.family(i)).collect()
    }

    pub fn from_families(n_x: usize, n_z: usize, p: usize, families: &[FamilySpec]) -> Self {
        let mut s = Self::empty(n_x, n_z, p);
        for f in families {
            s.set_family(f);
        }
        s
    }

    pub fn edge_count(&self) -> usize {
        self.intra.edge_count()
            + self.inter.edge_count()
            + self.auto_lags.iter().map(BTreeSet::len).sum::<usize>()
            + self.static_edges.edge_count()
    }

    /// Largest lag used by any node's family.
    pub fn max_used_offset(&self) -> usize {
        (0..self.n_x).map(|i| self.family(i).max_offset()).max().unwrap_or(0)
    }
}

/// Ordered parent family of `node`: inter first, then intra, then auto lags
/// ascending, then static. Use [`FamilySpec::availability`] to see which
/// parents are observed at a given child time.
pub fn parents_of(structure: &DbnStructure, node: usize) -> FamilySpec {
    structure.family(node)
}

/// True iff the directed graph has no cycle.
pub fn is_acyclic(adj: &Adjacency) -> Result<bool> {
    if !adj.is_square() {
        return Err(DbnError::Dimension(format!("adjacency is {}x{}, expected square", adj.rows(), adj.cols())));
    }
    Ok(find_cycle(adj).is_none())
}

/// Depth-first search with white/grey/black marking; returns one cycle if any.
pub(crate) fn find_cycle(adj: &Adjacency) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Grey,
        Black,
    }
    let n = adj.rows();
    let mut color = vec![Color::White; n];
    let mut parent = vec![usize::MAX; n];
    for root in 0..n {
        if color[root] != Color::White {
            continue;
        }
        // (node, next child to visit)
        let mut stack = vec![(root, 0usize)];
        color[root] = Color::Grey;
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if *next < n {
                let v = *next;
                *next += 1;
                if !adj.get(u, v) {
                    continue;
                }
                match color[v] {
                    Color::White => {
                        parent[v] = u;
                        color[v] = Color::Grey;
                        stack.push((v, 0));
                    }
                    Color::Grey => {
                        let mut cycle = vec![v];
                        let mut w = u;
                        while w != v {
                            cycle.push(w);
                            w = parent[w];
                        }
                        cycle[1..].reverse();
                        return Some(cycle);
                    }
                    Color::Black => {}
                }
            } else {
                color[u] = Color::Black;
                stack.pop();
            }
        }
    }
    None
}

/// Kahn's algorithm with smallest-index-first tie-breaking.
pub fn topological_order(adj: &Adjacency) -> Result<Vec<usize>> {
    if !adj.is_square() {
        return Err(DbnError::Dimension(format!("adjacency is {}x{}, expected square", adj.rows(), adj.cols())));
    }
    let n = adj.rows();
    let mut indeg: Vec<usize> = (0..n).map(|v| (0..n).filter(|&u| adj.get(u, v)).count()).collect();
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&v| indeg[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(u)) = ready.pop() {
        order.push(u);
        for v in 0..n {
            if adj.get(u, v) {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    ready.push(Reverse(v));
                }
            }
        }
    }
    if order.len() < n {
        let cycle = find_cycle(adj).unwrap_or_default();
        return Err(DbnError::Cycle { cycle });
    }
    Ok(order)
}

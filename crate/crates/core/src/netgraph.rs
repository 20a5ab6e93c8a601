//! Radial network model: buses, switchable lines, damage sets, connectivity
//! analysis, and degree-centrality preassignment of DER docking candidates.
//!
//! All operations are pure functions of their inputs; a loaded model is
//! immutable and safe to share across solver workers.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use thiserror::Error;

pub type NodeId = u32;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("empty network")]
    EmptyNetwork,
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("edge ({from},{to}) references missing node {missing}")]
    DanglingEdge {
        from: NodeId,
        to: NodeId,
        missing: NodeId,
    },
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("cyclic undamaged graph: edge ({0},{1}) closes a cycle")]
    CyclicGraph(NodeId, NodeId),
    #[error("node {node}: negative load {value}")]
    NegativeLoad { node: NodeId, value: f64 },
    #[error("node {node}: negative priority {value}")]
    NegativePriority { node: NodeId, value: f64 },
    #[error("node {node}: negative max_gen {value}")]
    NegativeMaxGen { node: NodeId, value: f64 },
    #[error("line ({from},{to}): max_flow {value} must be positive")]
    NonPositiveFlowCap { from: NodeId, to: NodeId, value: f64 },
    #[error("unknown line {0}")]
    UnknownLine(LineKey),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Directed-as-listed line identifier, serialized as `"from-to"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LineKey {
    pub from: NodeId,
    pub to: NodeId,
}

impl LineKey {
    pub fn new(from: NodeId, to: NodeId) -> Self {
        LineKey { from, to }
    }
}

impl fmt::Display for LineKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.from, self.to)
    }
}

impl std::str::FromStr for LineKey {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| format!("bad line key `{s}`, expected `from-to`"))?;
        Ok(LineKey {
            from: a.trim().parse().map_err(|e| format!("bad line key `{s}`: {e}"))?,
            to: b.trim().parse().map_err(|e| format!("bad line key `{s}`: {e}"))?,
        })
    }
}

impl Serialize for LineKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LineKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-step demand; a scalar is broadcast over the horizon.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum LoadProfile {
    Scalar(f64),
    PerStep(Vec<f64>),
}

impl LoadProfile {
    /// Demand at 1-based time step `t`, or None when a per-step profile is
    /// shorter than requested.
    pub fn at(&self, t: u32) -> Option<f64> {
        match self {
            LoadProfile::Scalar(v) => Some(*v),
            LoadProfile::PerStep(v) => v.get(t as usize - 1).copied(),
        }
    }

    fn min_value(&self) -> f64 {
        match self {
            LoadProfile::Scalar(v) => *v,
            LoadProfile::PerStep(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bus {
    pub id: NodeId,
    pub load: LoadProfile,
    #[serde(default)]
    pub priority: f64,
    #[serde(default)]
    pub max_gen: f64,
    #[serde(default)]
    pub substation: bool,
    /// Filled by [`NetworkModel::mark_candidates`] after preassignment.
    #[serde(default)]
    pub der_candidate: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Line {
    pub from: NodeId,
    pub to: NodeId,
    pub max_flow: f64,
    #[serde(default)]
    pub damaged: bool,
}

impl Line {
    pub fn key(&self) -> LineKey {
        LineKey::new(self.from, self.to)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkModel {
    #[serde(rename = "nodes")]
    pub buses: Vec<Bus>,
    #[serde(rename = "edges")]
    pub lines: Vec<Line>,
    #[serde(skip)]
    pub substation_ids: BTreeSet<NodeId>,
    /// node id -> (neighbor, edge index), ascending by neighbor id.
    #[serde(skip)]
    adjacency: BTreeMap<NodeId, Vec<(NodeId, usize)>>,
}

impl NetworkModel {
    pub fn from_parts(buses: Vec<Bus>, lines: Vec<Line>) -> Result<Self, NetworkError> {
        let mut net = NetworkModel {
            buses,
            lines,
            substation_ids: BTreeSet::new(),
            adjacency: BTreeMap::new(),
        };
        net.rebuild_index()?;
        Ok(net)
    }

    pub fn load_from_path(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let mut net: NetworkModel = serde_json::from_str(text)?;
        net.rebuild_index()?;
        Ok(net)
    }

    fn rebuild_index(&mut self) -> Result<(), NetworkError> {
        if self.buses.is_empty() {
            return Err(NetworkError::EmptyNetwork);
        }
        let mut ids = BTreeSet::new();
        for b in &self.buses {
            if !ids.insert(b.id) {
                return Err(NetworkError::DuplicateNode(b.id));
            }
            let min_load = b.load.min_value();
            if min_load < 0.0 {
                return Err(NetworkError::NegativeLoad {
                    node: b.id,
                    value: min_load,
                });
            }
            if b.priority < 0.0 {
                return Err(NetworkError::NegativePriority {
                    node: b.id,
                    value: b.priority,
                });
            }
            if b.max_gen < 0.0 {
                return Err(NetworkError::NegativeMaxGen {
                    node: b.id,
                    value: b.max_gen,
                });
            }
        }
        self.substation_ids = self
            .buses
            .iter()
            .filter(|b| b.substation)
            .map(|b| b.id)
            .collect();
        self.adjacency = ids.iter().map(|&id| (id, Vec::new())).collect();
        for (idx, line) in self.lines.iter().enumerate() {
            if line.from == line.to {
                return Err(NetworkError::SelfLoop(line.from));
            }
            for (end, other) in [(line.from, line.to), (line.to, line.from)] {
                if !ids.contains(&end) {
                    return Err(NetworkError::DanglingEdge {
                        from: line.from,
                        to: line.to,
                        missing: end,
                    });
                }
                let _ = other;
            }
            if !(line.max_flow > 0.0) {
                return Err(NetworkError::NonPositiveFlowCap {
                    from: line.from,
                    to: line.to,
                    value: line.max_flow,
                });
            }
            self.adjacency
                .get_mut(&line.from)
                .unwrap()
                .push((line.to, idx));
            self.adjacency
                .get_mut(&line.to)
                .unwrap()
                .push((line.from, idx));
        }
        for nbrs in self.adjacency.values_mut() {
            nbrs.sort_unstable();
        }
        // Full topology (damage ignored) must be a forest.
        let mut uf = UnionFind::new(&ids);
        for line in &self.lines {
            if !uf.union(line.from, line.to) {
                return Err(NetworkError::CyclicGraph(line.from, line.to));
            }
        }
        Ok(())
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.adjacency.keys().copied().collect()
    }

    pub fn bus(&self, id: NodeId) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    pub fn line_index(&self, key: LineKey) -> Result<usize, NetworkError> {
        self.lines
            .iter()
            .position(|l| l.key() == key)
            .ok_or(NetworkError::UnknownLine(key))
    }

    /// Indices of lines flagged damaged in the input file.
    pub fn damaged_indices(&self) -> BTreeSet<usize> {
        self.lines
            .iter()
            .enumerate()
            .filter(|(_, l)| l.damaged)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn candidate_ids(&self) -> Vec<NodeId> {
        self.buses
            .iter()
            .filter(|b| b.der_candidate)
            .map(|b| b.id)
            .collect()
    }

    pub fn mark_candidates(&mut self, candidates: &BTreeSet<NodeId>) {
        for b in &mut self.buses {
            b.der_candidate = candidates.contains(&b.id);
        }
    }

    /// BFS partition of all nodes after removing `removed` edges, ordered by
    /// each component's smallest node id. BFS visits neighbors ascending.
    pub fn connected_components(&self, removed: &BTreeSet<usize>) -> Vec<BTreeSet<NodeId>> {
        let mut seen: BTreeSet<NodeId> = BTreeSet::new();
        let mut out = Vec::new();
        for &start in self.adjacency.keys() {
            if seen.contains(&start) {
                continue;
            }
            let mut comp = BTreeSet::new();
            let mut queue = VecDeque::from([start]);
            seen.insert(start);
            while let Some(u) = queue.pop_front() {
                comp.insert(u);
                for &(v, e) in &self.adjacency[&u] {
                    if removed.contains(&e) || seen.contains(&v) {
                        continue;
                    }
                    seen.insert(v);
                    queue.push_back(v);
                }
            }
            out.push(comp);
        }
        out
    }

    /// True iff the subgraph on `on_edges` has no cycle.
    pub fn is_forest(&self, on_edges: &BTreeSet<usize>) -> bool {
        let ids: BTreeSet<NodeId> = self.adjacency.keys().copied().collect();
        let mut uf = UnionFind::new(&ids);
        for &e in on_edges {
            let line = &self.lines[e];
            if !uf.union(line.from, line.to) {
                return false;
            }
        }
        true
    }
}

/// Rule for how many candidates a substation-free component receives.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PreassignRule {
    /// Components of at least this many nodes also get the second-highest
    /// degree node.
    pub second_candidate_threshold: usize,
}

impl Default for PreassignRule {
    fn default() -> Self {
        PreassignRule {
            second_candidate_threshold: 10,
        }
    }
}

/// Degree-centrality preassignment: in every component that lost its
/// substation, select the highest-degree node (degree counted inside the
/// component with damaged edges removed; ties go to the smallest id). Large
/// components also receive the runner-up per `rule`.
pub fn preassign_ders(
    net: &NetworkModel,
    damaged: &BTreeSet<usize>,
    rule: &PreassignRule,
) -> BTreeSet<NodeId> {
    let mut picked = BTreeSet::new();
    for comp in net.connected_components(damaged) {
        if comp.iter().any(|id| net.substation_ids.contains(id)) {
            continue;
        }
        let mut degrees: Vec<(NodeId, usize)> = comp
            .iter()
            .map(|&id| {
                let deg = net.adjacency[&id]
                    .iter()
                    .filter(|&&(v, e)| !damaged.contains(&e) && comp.contains(&v))
                    .count();
                (id, deg)
            })
            .collect();
        // Highest degree first, smallest id wins ties.
        degrees.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        picked.insert(degrees[0].0);
        if comp.len() >= rule.second_candidate_threshold && degrees.len() > 1 {
            picked.insert(degrees[1].0);
        }
    }
    picked
}

struct UnionFind {
    parent: BTreeMap<NodeId, NodeId>,
}

impl UnionFind {
    fn new(ids: &BTreeSet<NodeId>) -> Self {
        UnionFind {
            parent: ids.iter().map(|&i| (i, i)).collect(),
        }
    }

    fn find(&mut self, mut x: NodeId) -> NodeId {
        while self.parent[&x] != x {
            let p = self.parent[&x];
            let gp = self.parent[&p];
            self.parent.insert(x, gp);
            x = gp;
        }
        x
    }

    /// Returns false when both endpoints were already connected.
    fn union(&mut self, a: NodeId, b: NodeId) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return false;
        }
        self.parent.insert(ra, rb);
        true
    }
}

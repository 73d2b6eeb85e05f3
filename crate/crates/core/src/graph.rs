//! Citation graphs: loading, cleaning into a DAG, orderings and the
//! descriptive statistics computed before any model fitting.
//!
//! Node indices are 0-based and follow the order of the node list. An edge
//! `from -> to` means `from` cites `to`, so in any topological order the
//! citing article comes first and the reordered adjacency is upper
//! triangular.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense 0/1 adjacency matrix, `adj[[r, s]] == 1` iff `r` cites `s`.
pub type Adjacency = Array2<u8>;

pub const NODES_HEADER: [&str; 4] = ["id", "label", "year", "month"];
pub const EDGES_HEADER: [&str; 2] = ["from", "to"];

const YEAR_RANGE: std::ops::RangeInclusive<i32> = 1800..=2100;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Option<Self> {
        let id = id.into();
        if id.is_empty() {
            None
        } else {
            Some(NodeId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeMeta {
    pub id: NodeId,
    pub label: Option<String>,
    pub year: Option<i32>,
    /// 1-12; only meaningful when `year` is set.
    pub month: Option<u8>,
}

impl NodeMeta {
    pub fn bare(id: NodeId) -> Self {
        NodeMeta {
            id,
            label: None,
            year: None,
            month: None,
        }
    }

    /// Chronological comparison. `None` when the two cannot be told apart:
    /// a missing year on either side, or the same year without two distinct
    /// months.
    pub fn chronology(&self, other: &NodeMeta) -> Option<std::cmp::Ordering> {
        let (ya, yb) = (self.year?, other.year?);
        if ya != yb {
            return Some(ya.cmp(&yb));
        }
        match (self.month, other.month) {
            (Some(ma), Some(mb)) if ma != mb => Some(ma.cmp(&mb)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
}

/// Deduplicated list of citations, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeList {
    edges: Vec<Edge>,
}

impl EdgeList {
    pub fn new(pairs: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut edges = Vec::new();
        for (i, e) in pairs.into_iter().enumerate() {
            if e.from == e.to {
                return Err(Error::SelfLoop {
                    row: i + 1,
                    id: e.from.0,
                });
            }
            if seen.insert(e.clone()) {
                edges.push(e);
            }
        }
        Ok(EdgeList { edges })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }
}

/// A permutation of node indices: `order[p]` is the node at position `p`.
/// Positions are 0-based in memory and reported 1-based in output files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ordering(Vec<usize>);

impl Ordering {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &v in &order {
            if v >= n || seen[v] {
                return Err(Error::config(format!("not a permutation of 0..{n}")));
            }
            seen[v] = true;
        }
        Ok(Ordering(order))
    }

    pub fn identity(n: usize) -> Self {
        Ordering((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn node_at(&self, position: usize) -> usize {
        self.0[position]
    }

    /// `positions()[node]` is the 0-based position of `node`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (p, &node) in self.0.iter().enumerate() {
            pos[node] = p;
        }
        pos
    }

    pub fn inverse(&self) -> Ordering {
        Ordering(self.positions())
    }

    pub fn swap(&mut self, p: usize, q: usize) {
        self.0.swap(p, q);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemovalReason {
    YearOrder,
    TieRandom,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovedEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub reason: RemovalReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub seed: u64,
    pub removed: Vec<RemovedEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityMode {
    /// `m / (n(n-1)/2)`: a DAG can hold at most half the ordered pairs.
    DagHalved,
    /// `m / (n(n-1))`.
    DirectedFull,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CitationGraph {
    nodes: Vec<NodeMeta>,
    index: HashMap<NodeId, usize>,
    /// Edges as node indices, in input order.
    edges: Vec<(usize, usize)>,
    adj: Adjacency,
}

impl CitationGraph {
    pub fn new(nodes: Vec<NodeMeta>, edges: &EdgeList) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.id.clone(), i).is_some() {
                return Err(Error::DuplicateNode(node.id.0.clone()));
            }
        }
        let lookup = |id: &NodeId| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::UnknownNode(id.0.clone()))
        };
        let pairs = edges
            .iter()
            .map(|e| Ok((lookup(&e.from)?, lookup(&e.to)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_indexed(nodes, index, pairs))
    }

    /// Builds a graph whose node set is every id mentioned in `edges`, in
    /// order of first appearance, without metadata.
    pub fn from_edges(edges: &EdgeList) -> Self {
        let mut nodes = Vec::new();
        let mut seen = HashSet::new();
        for e in edges.iter() {
            for id in [&e.from, &e.to] {
                if seen.insert(id.clone()) {
                    nodes.push(NodeMeta::bare(id.clone()));
                }
            }
        }
        Self::new(nodes, edges).expect("node set covers every endpoint")
    }

    fn from_indexed(
        nodes: Vec<NodeMeta>,
        index: HashMap<NodeId, usize>,
        edges: Vec<(usize, usize)>,
    ) -> Self {
        let n = nodes.len();
        let mut adj = Adjacency::zeros((n, n));
        for &(r, s) in &edges {
            adj[[r, s]] = 1;
        }
        CitationGraph {
            nodes,
            index,
            edges,
            adj,
        }
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[NodeMeta] {
        &self.nodes
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adj
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, index: usize) -> &NodeId {
        &self.nodes[index].id
    }

    pub fn ids(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.id.0.clone()).collect()
    }

    pub fn edge_list(&self) -> EdgeList {
        EdgeList {
            edges: self
                .edges
                .iter()
                .map(|&(r, s)| Edge {
                    from: self.nodes[r].id.clone(),
                    to: self.nodes[s].id.clone(),
                })
                .collect(),
        }
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        self.adj
            .rows()
            .into_iter()
            .map(|row| row.iter().filter(|&&v| v == 1).count())
            .collect()
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        self.adj
            .columns()
            .into_iter()
            .map(|col| col.iter().filter(|&&v| v == 1).count())
            .collect()
    }

    fn witness(&self, cycle: Vec<usize>) -> Error {
        Error::CycleFound(cycle.into_iter().map(|i| self.nodes[i].id.0.clone()).collect())
    }
}

fn header_matches(headers: &csv::StringRecord, expected: &[&str]) -> bool {
    headers.len() == expected.len() && headers.iter().zip(expected).all(|(h, e)| h.trim() == *e)
}

fn row_of(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

fn parse_opt<T: std::str::FromStr>(field: &str, what: &str, row: usize) -> Result<Option<T>> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    field.parse().map(Some).map_err(|_| Error::Parse {
        row,
        msg: format!("malformed {what} `{field}`"),
    })
}

/// Parses `nodes.csv` (header `id,label,year,month`, empty cells for missing values).
pub fn parse_nodes(text: &str) -> Result<Vec<NodeMeta>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if !header_matches(&headers, &NODES_HEADER) {
        return Err(Error::Parse {
            row: 1,
            msg: format!("expected header `{}`", NODES_HEADER.join(",")),
        });
    }
    let mut seen = HashSet::new();
    let mut nodes = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = row_of(&record);
        let id = NodeId::new(record[0].trim()).ok_or_else(|| Error::Parse {
            row,
            msg: "empty node id".into(),
        })?;
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateNode(id.0));
        }
        let label = Some(record[1].to_string()).filter(|l| !l.is_empty());
        let year: Option<i32> = parse_opt(&record[2], "year", row)?;
        let month: Option<u8> = parse_opt(&record[3], "month", row)?;
        if let Some(y) = year {
            if !YEAR_RANGE.contains(&y) {
                return Err(Error::Parse {
                    row,
                    msg: format!("implausible year {y}"),
                });
            }
        }
        if let Some(m) = month {
            if !(1..=12).contains(&m) {
                return Err(Error::Parse {
                    row,
                    msg: format!("month {m} outside 1-12"),
                });
            }
            if year.is_none() {
                return Err(Error::Parse {
                    row,
                    msg: "month given without year".into(),
                });
            }
        }
        nodes.push(NodeMeta {
            id,
            label,
            year,
            month,
        });
    }
    Ok(nodes)
}

/// Parses `edges.csv` (header `from,to`); duplicates are dropped, self-loops rejected.
pub fn parse_edges(text: &str) -> Result<EdgeList> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if !header_matches(&headers, &EDGES_HEADER) {
        return Err(Error::Parse {
            row: 1,
            msg: format!("expected header `{}`", EDGES_HEADER.join(",")),
        });
    }
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = row_of(&record);
        let endpoint = |i: usize| {
            NodeId::new(record[i].trim()).ok_or_else(|| Error::Parse {
                row,
                msg: "empty endpoint".into(),
            })
        };
        let (from, to) = (endpoint(0)?, endpoint(1)?);
        if from == to {
            return Err(Error::SelfLoop { row, id: from.0 });
        }
        let edge = Edge { from, to };
        if seen.insert(edge.clone()) {
            edges.push(edge);
        }
    }
    Ok(EdgeList { edges })
}

pub fn write_nodes_csv(nodes: &[NodeMeta]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(NODES_HEADER)?;
    for node in nodes {
        w.write_record([
            node.id.as_str(),
            node.label.as_deref().unwrap_or(""),
            &node.year.map(|y| y.to_string()).unwrap_or_default(),
            &node.month.map(|m| m.to_string()).unwrap_or_default(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8 input"))
}

pub fn write_edges_csv(edges: &EdgeList) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EDGES_HEADER)?;
    for e in edges.iter() {
        w.write_record([e.from.as_str(), e.to.as_str()])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8 input"))
}

/// Breaks every 2-cycle by deleting the citation from the chronologically
/// earlier article to the later one. Pairs that cannot be ordered by
/// year/month lose one of their two edges uniformly at random.
///
/// Pairs are visited in input edge order and each tie consumes exactly one
/// draw from a ChaCha8 stream seeded with `seed`.
pub fn remove_mutual_edges(graph: &CitationGraph, seed: u64) -> (CitationGraph, CleanReport) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drop = HashSet::new();
    let mut removed = Vec::new();
    for &(r, s) in &graph.edges {
        if graph.adj[[s, r]] == 0 || drop.contains(&(r, s)) || drop.contains(&(s, r)) {
            continue;
        }
        let (victim, reason) = match graph.nodes[r].chronology(&graph.nodes[s]) {
            Some(std::cmp::Ordering::Less) => ((r, s), RemovalReason::YearOrder),
            Some(_) => ((s, r), RemovalReason::YearOrder),
            None if rng.random_bool(0.5) => ((r, s), RemovalReason::TieRandom),
            None => ((s, r), RemovalReason::TieRandom),
        };
        drop.insert(victim);
        removed.push(RemovedEdge {
            from: graph.nodes[victim.0].id.clone(),
            to: graph.nodes[victim.1].id.clone(),
            reason,
        });
    }
    let edges = graph
        .edges
        .iter()
        .copied()
        .filter(|e| !drop.contains(e))
        .collect();
    let cleaned = CitationGraph::from_indexed(graph.nodes.clone(), graph.index.clone(), edges);
    (cleaned, CleanReport { seed, removed })
}

/// Returns a directed cycle as node indices (first node repeated at the end),
/// or `None` if the adjacency is acyclic.
pub fn find_cycle(adj: &Adjacency) -> Option<Vec<usize>> {
    const WHITE: u8 = 0;
    const GREY: u8 = 1;
    const BLACK: u8 = 2;
    let n = adj.nrows();
    let mut colour = vec![WHITE; n];
    let mut parent = vec![usize::MAX; n];
    for root in 0..n {
        if colour[root] != WHITE {
            continue;
        }
        // (node, next neighbour to inspect)
        let mut stack = vec![(root, 0usize)];
        colour[root] = GREY;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            let row = adj.row(v);
            let mut advanced = false;
            while *next < n {
                let w = *next;
                *next += 1;
                if row[w] == 0 {
                    continue;
                }
                match colour[w] {
                    WHITE => {
                        colour[w] = GREY;
                        parent[w] = v;
                        stack.push((w, 0));
                        advanced = true;
                        break;
                    }
                    GREY => {
                        let mut cycle = vec![v];
                        let mut u = v;
                        while u != w {
                            u = parent[u];
                            cycle.push(u);
                        }
                        cycle.reverse();
                        cycle.push(w);
                        return Some(cycle);
                    }
                    _ => {}
                }
            }
            if !advanced {
                colour[v] = BLACK;
                stack.pop();
            }
        }
    }
    None
}

pub fn assert_dag(graph: &CitationGraph) -> Result<()> {
    match find_cycle(&graph.adj) {
        None => Ok(()),
        Some(cycle) => Err(graph.witness(cycle)),
    }
}

/// Kahn's algorithm; among nodes with no remaining citers, the one with the
/// largest `priority` goes first.
pub fn topological_order_by<K: Ord>(
    adj: &Adjacency,
    priority: impl Fn(usize) -> K,
) -> Option<Ordering> {
    let n = adj.nrows();
    let mut indegree: Vec<usize> = adj
        .columns()
        .into_iter()
        .map(|c| c.iter().filter(|&&v| v == 1).count())
        .collect();
    let mut ready: BinaryHeap<(K, usize)> = (0..n)
        .filter(|&v| indegree[v] == 0)
        .map(|v| (priority(v), v))
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some((_, v)) = ready.pop() {
        order.push(v);
        for (w, &e) in adj.row(v).iter().enumerate() {
            if e == 1 {
                indegree[w] -= 1;
                if indegree[w] == 0 {
                    ready.push((priority(w), w));
                }
            }
        }
    }
    (order.len() == n).then_some(Ordering(order))
}

/// A topological order where, among the available articles, the latest
/// year goes first (unknown years last), then the lexicographically
/// smallest id.
pub fn topological_order(graph: &CitationGraph) -> Result<Ordering> {
    topological_order_by(&graph.adj, |v| {
        let node = &graph.nodes[v];
        (node.year, Reverse(node.id.as_str()))
    })
    .ok_or_else(|| {
        let cycle = find_cycle(&graph.adj).expect("Kahn stalls only on a cycle");
        graph.witness(cycle)
    })
}

/// `out[[p, q]] = m[[o[p], o[q]]]`.
pub fn reorder<T: Clone>(m: &Array2<T>, o: &Ordering) -> Result<Array2<T>> {
    let n = o.len();
    if m.dim() != (n, n) {
        return Err(Error::dims(format!("{n}x{n}"), format!("{:?}", m.dim())));
    }
    let idx = o.as_slice();
    Ok(Array2::from_shape_fn((n, n), |(p, q)| {
        m[[idx[p], idx[q]]].clone()
    }))
}

/// `out[p] = m[o[p]]` for an `n x k` row matrix.
pub fn reorder_rows<T: Clone>(m: &Array2<T>, o: &Ordering) -> Result<Array2<T>> {
    if m.nrows() != o.len() {
        return Err(Error::dims(format!("{} rows", o.len()), m.nrows()));
    }
    let idx = o.as_slice();
    Ok(Array2::from_shape_fn(m.dim(), |(p, i)| m[[idx[p], i]].clone()))
}

pub fn is_upper_triangular(m: &Adjacency) -> bool {
    m.indexed_iter().all(|((p, q), &v)| p < q || v == 0)
}

pub fn density_of(n: usize, m: usize, mode: DensityMode) -> Result<f64> {
    if n < 2 {
        return Err(Error::TooFewNodes(n));
    }
    let pairs = (n * (n - 1)) as f64;
    Ok(match mode {
        DensityMode::DagHalved => m as f64 / (pairs / 2.0),
        DensityMode::DirectedFull => m as f64 / pairs,
    })
}

pub fn density(graph: &CitationGraph, mode: DensityMode) -> Result<f64> {
    density_of(graph.n(), graph.m(), mode)
}

/// Restricts the graph to `keep`, preserving node and edge order.
pub fn induced_subgraph<'a>(
    graph: &CitationGraph,
    keep: impl IntoIterator<Item = &'a str>,
) -> Result<CitationGraph> {
    let mut mask = vec![false; graph.n()];
    for id in keep {
        let i = graph
            .index_of(id)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))?;
        mask[i] = true;
    }
    let mut remap = vec![usize::MAX; graph.n()];
    let mut nodes = Vec::new();
    let mut index = HashMap::new();
    for (i, node) in graph.nodes.iter().enumerate().filter(|(i, _)| mask[*i]) {
        remap[i] = nodes.len();
        index.insert(node.id.clone(), nodes.len());
        nodes.push(node.clone());
    }
    let edges = graph
        .edges
        .iter()
        .filter(|&&(r, s)| mask[r] && mask[s])
        .map(|&(r, s)| (remap[r], remap[s]))
        .collect();
    Ok(CitationGraph::from_indexed(nodes, index, edges))
}

//! Weighted directed cause→effect concept graphs and bounded-hop queries.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = u64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Follow cause→effect orientation.
    #[default]
    Directed,
    Undirected,
}

/// Hop bound, direction and optional deleted node for reachability queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReachabilitySpec {
    pub max_hops: usize,
    pub direction: Direction,
    pub excluded_node: Option<NodeId>,
}

impl Default for ReachabilitySpec {
    fn default() -> Self {
        Self {
            max_hops: 3,
            direction: Direction::Directed,
            excluded_node: None,
        }
    }
}

impl ReachabilitySpec {
    pub fn new(max_hops: usize, direction: Direction) -> Result<Self> {
        if max_hops == 0 {
            return Err(Error::InvalidArgument("max_hops must be at least 1".into()));
        }
        Ok(Self {
            max_hops,
            direction,
            excluded_node: None,
        })
    }

    pub fn excluding(mut self, node: NodeId) -> Self {
        self.excluded_node = Some(node);
        self
    }

    pub fn without_exclusion(mut self) -> Self {
        self.excluded_node = None;
        self
    }
}

/// Edge orientation used by a single traversal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Traverse {
    Forward,
    Backward,
    Both,
}

impl Traverse {
    pub(crate) fn forward(direction: Direction) -> Self {
        match direction {
            Direction::Directed => Traverse::Forward,
            Direction::Undirected => Traverse::Both,
        }
    }

    pub(crate) fn backward(direction: Direction) -> Self {
        match direction {
            Direction::Directed => Traverse::Backward,
            Direction::Undirected => Traverse::Both,
        }
    }
}

/// Immutable weighted directed graph. Nodes are stored densely in ascending
/// id order; adjacency lists are sorted by neighbour index.
#[derive(Clone, Debug)]
pub struct CausalGraph {
    ids: Vec<NodeId>,
    terms: Vec<String>,
    index: HashMap<NodeId, usize>,
    out_edges: Vec<Vec<(usize, f64)>>,
    in_edges: Vec<Vec<(usize, f64)>>,
    n_edges: usize,
}

impl CausalGraph {
    /// Builds and validates a graph from node and edge lists.
    pub fn from_parts(
        nodes: impl IntoIterator<Item = (NodeId, String)>,
        edges: impl IntoIterator<Item = (NodeId, NodeId, f64)>,
    ) -> Result<Self> {
        let mut nodes: Vec<(NodeId, String)> = nodes.into_iter().collect();
        nodes.sort_by_key(|(id, _)| *id);
        for pair in nodes.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::Integrity(format!("duplicate node id {}", pair[0].0)));
            }
        }
        if let Some((id, _)) = nodes.iter().find(|(_, t)| t.trim().is_empty()) {
            return Err(Error::Integrity(format!("node {id} has an empty term")));
        }
        let (ids, terms): (Vec<_>, Vec<_>) = nodes.into_iter().unzip();
        let index: HashMap<NodeId, usize> =
            ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

        let n = ids.len();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        let mut n_edges = 0;
        for (src, dst, w) in edges {
            let s = *index.get(&src).ok_or_else(|| {
                Error::Integrity(format!("edge {src}->{dst} references unknown node {src}"))
            })?;
            let d = *index.get(&dst).ok_or_else(|| {
                Error::Integrity(format!("edge {src}->{dst} references unknown node {dst}"))
            })?;
            if s == d {
                return Err(Error::Integrity(format!("self-loop on node {src}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Integrity(format!(
                    "edge {src}->{dst} has non-positive or non-finite weight {w}"
                )));
            }
            out_edges[s].push((d, w));
            in_edges[d].push((s, w));
            n_edges += 1;
        }
        for (i, adj) in out_edges.iter_mut().enumerate() {
            adj.sort_by_key(|&(j, _)| j);
            if let Some(pair) = adj.windows(2).find(|p| p[0].0 == p[1].0) {
                return Err(Error::Integrity(format!(
                    "duplicate edge {}->{}",
                    ids[i], ids[pair[0].0]
                )));
            }
        }
        for adj in in_edges.iter_mut() {
            adj.sort_by_key(|&(j, _)| j);
        }

        Ok(Self {
            ids,
            terms,
            index,
            out_edges,
            in_edges,
            n_edges,
        })
    }

    /// Reads the nodes (`id\tterm`) and edges (`src\tdst\tweight`) TSV streams.
    pub fn load<N: Read, E: Read>(nodes: N, edges: E) -> Result<Self> {
        let nodes = read_nodes(nodes, "nodes")?;
        let edges = read_edges(edges, "edges")?;
        Self::from_parts(nodes, edges)
    }

    pub fn load_files(nodes: impl AsRef<Path>, edges: impl AsRef<Path>) -> Result<Self> {
        let (np, ep) = (nodes.as_ref(), edges.as_ref());
        let nodes = read_nodes(
            std::fs::File::open(np).map_err(Error::io_at(np))?,
            &np.display().to_string(),
        )?;
        let edges = read_edges(
            std::fs::File::open(ep).map_err(Error::io_at(ep))?,
            &ep.display().to_string(),
        )?;
        Self::from_parts(nodes, edges)
    }

    pub fn write_nodes_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "id\tterm")?;
        for (id, term) in self.ids.iter().zip(&self.terms) {
            writeln!(out, "{id}\t{term}")?;
        }
        Ok(())
    }

    pub fn write_edges_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "src\tdst\tweight")?;
        for (src, dst, w) in self.edges() {
            writeln!(out, "{src}\t{dst}\t{w}")?;
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.n_edges
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    /// Node ids in ascending order.
    pub fn node_ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn term(&self, id: NodeId) -> Result<&str> {
        Ok(&self.terms[self.idx(id)?])
    }

    /// All edges as `(src, dst, weight)`, ordered by `(src, dst)`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.out_edges
            .iter()
            .enumerate()
            .flat_map(move |(s, adj)| adj.iter().map(move |&(d, w)| (self.ids[s], self.ids[d], w)))
    }

    /// Outgoing `(dst, weight)` pairs of `id`.
    pub fn successors(&self, id: NodeId) -> Result<impl Iterator<Item = (NodeId, f64)> + '_> {
        let i = self.idx(id)?;
        Ok(self.out_edges[i]
            .iter()
            .map(move |&(j, w)| (self.ids[j], w)))
    }

    /// Incoming `(src, weight)` pairs of `id`.
    pub fn predecessors(&self, id: NodeId) -> Result<impl Iterator<Item = (NodeId, f64)> + '_> {
        let i = self.idx(id)?;
        Ok(self.in_edges[i].iter().map(move |&(j, w)| (self.ids[j], w)))
    }

    pub fn degree(&self, id: NodeId) -> Result<(usize, usize)> {
        let i = self.idx(id)?;
        Ok((self.in_edges[i].len(), self.out_edges[i].len()))
    }

    /// Peripheral node: exactly one incident edge in either direction.
    pub fn is_edge_node(&self, id: NodeId) -> Result<bool> {
        let (i, o) = self.degree(id)?;
        Ok(i + o == 1)
    }

    /// Largest incident edge weight, or `None` for an isolated node.
    pub fn max_incident_weight(&self, id: NodeId) -> Result<Option<f64>> {
        let i = self.idx(id)?;
        Ok(self.out_edges[i]
            .iter()
            .chain(&self.in_edges[i])
            .map(|&(_, w)| w)
            .reduce(f64::max))
    }

    /// Nodes `y != start` reachable from `start` within `spec.max_hops` hops,
    /// with `spec.excluded_node` deleted from the graph.
    pub fn khop_reachable(
        &self,
        start: NodeId,
        spec: &ReachabilitySpec,
    ) -> Result<BTreeSet<NodeId>> {
        let s = self.idx(start)?;
        let excluded = self.excluded_idx(spec)?;
        if excluded == Some(s) {
            return Err(Error::InvalidArgument(format!(
                "start node {start} is the excluded node"
            )));
        }
        let mut bfs = Bfs::new(self.node_count());
        let hits = bfs.run(
            self,
            s,
            spec.max_hops,
            Traverse::forward(spec.direction),
            excluded,
        );
        Ok(hits.iter().map(|&i| self.ids[i]).collect())
    }

    /// Widest-path value: the maximum over paths `x ⇝ y` of at most
    /// `spec.max_hops` hops of the minimum edge weight along the path.
    pub fn bottleneck_weight(
        &self,
        x: NodeId,
        y: NodeId,
        spec: &ReachabilitySpec,
    ) -> Result<Option<f64>> {
        let xi = self.idx(x)?;
        let yi = self.idx(y)?;
        if xi == yi {
            return Err(Error::InvalidArgument(format!(
                "bottleneck weight needs distinct nodes, got {x} twice"
            )));
        }
        let excluded = self.excluded_idx(spec)?;
        if excluded == Some(xi) {
            return Err(Error::InvalidArgument(format!(
                "start node {x} is the excluded node"
            )));
        }
        if excluded == Some(yi) {
            return Ok(None);
        }
        Ok(self.widest_within(
            xi,
            yi,
            spec.max_hops,
            Traverse::forward(spec.direction),
            excluded,
        ))
    }

    fn widest_within(
        &self,
        xi: usize,
        yi: usize,
        max_hops: usize,
        traverse: Traverse,
        excluded: Option<usize>,
    ) -> Option<f64> {
        let best = self.widest_from(xi, max_hops, traverse, excluded);
        (best[yi] > f64::NEG_INFINITY).then_some(best[yi])
    }

    /// Widest-path values from `xi` to every node within `max_hops` hops;
    /// unreachable nodes and `xi` itself hold `NEG_INFINITY`.
    pub(crate) fn widest_from(
        &self,
        xi: usize,
        max_hops: usize,
        traverse: Traverse,
        excluded: Option<usize>,
    ) -> Vec<f64> {
        // best[v] = widest walk x ⇝ v using at most h hops; a cycle never
        // raises a bottleneck, so walks and simple paths agree.
        let n = self.node_count();
        let mut best = vec![f64::NEG_INFINITY; n];
        best[xi] = f64::INFINITY;
        let mut frontier = vec![xi];
        for _ in 0..max_hops {
            let mut next = best.clone();
            let mut changed = Vec::new();
            for &u in &frontier {
                for (v, w) in self.neighbours(u, traverse) {
                    if Some(v) == excluded || v == xi {
                        continue;
                    }
                    let cand = best[u].min(w);
                    if cand > next[v] {
                        if next[v] == best[v] {
                            changed.push(v);
                        }
                        next[v] = cand;
                    }
                }
            }
            if changed.is_empty() {
                break;
            }
            best = next;
            frontier = changed;
        }
        best[xi] = f64::NEG_INFINITY;
        best
    }

    pub(crate) fn idx(&self, id: NodeId) -> Result<usize> {
        self.index.get(&id).copied().ok_or(Error::UnknownNode(id))
    }

    pub(crate) fn id_at(&self, i: usize) -> NodeId {
        self.ids[i]
    }

    fn excluded_idx(&self, spec: &ReachabilitySpec) -> Result<Option<usize>> {
        spec.excluded_node.map(|e| self.idx(e)).transpose()
    }

    pub(crate) fn neighbours(
        &self,
        u: usize,
        traverse: Traverse,
    ) -> impl Iterator<Item = (usize, f64)> + '_ {
        let none: &[(usize, f64)] = &[];
        let (first, second) = match traverse {
            Traverse::Forward => (&self.out_edges[u][..], none),
            Traverse::Backward => (&self.in_edges[u][..], none),
            Traverse::Both => (&self.out_edges[u][..], &self.in_edges[u][..]),
        };
        first.iter().chain(second).copied()
    }
}

/// Reusable bounded breadth-first search.
pub(crate) struct Bfs {
    seen: Vec<u32>,
    stamp: u32,
    hits: Vec<usize>,
}

impl Bfs {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            seen: vec![0; n],
            stamp: 0,
            hits: Vec::new(),
        }
    }

    /// Returns nodes reached from `start` in 1..=max_hops hops, excluding
    /// `start` itself, in discovery order.
    pub(crate) fn run(
        &mut self,
        g: &CausalGraph,
        start: usize,
        max_hops: usize,
        traverse: Traverse,
        excluded: Option<usize>,
    ) -> &[usize] {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.seen.fill(0);
            self.stamp = 1;
        }
        let stamp = self.stamp;
        self.hits.clear();
        self.seen[start] = stamp;
        if let Some(e) = excluded {
            self.seen[e] = stamp;
        }
        let mut frontier: Vec<usize> = vec![start];
        for _ in 0..max_hops {
            let mut next = Vec::new();
            for &u in &frontier {
                for (v, _) in g.neighbours(u, traverse) {
                    if self.seen[v] != stamp {
                        self.seen[v] = stamp;
                        next.push(v);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            self.hits.extend_from_slice(&next);
            frontier = next;
        }
        &self.hits
    }

    /// Whether `v` was reached by the last run.
    pub(crate) fn marked(&self, v: usize) -> bool {
        self.seen[v] == self.stamp
    }
}

fn tsv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .quoting(false)
        .flexible(true)
        .from_reader(input)
}

fn records<R: Read>(input: R, source: &str, header: &[&str]) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (i, rec) in tsv_reader(input).records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(i + 1);
            Error::parse(source, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 1);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = rec
            .iter()
            .map(|f| f.trim_end_matches('\r').to_string())
            .collect();
        if !saw_header {
            saw_header = true;
            let got: Vec<&str> = fields.iter().map(|s| s.trim()).collect();
            if got != header {
                return Err(Error::parse(
                    source,
                    line,
                    format!(
                        "expected header `{}`, found `{}`",
                        header.join("\\t"),
                        got.join("\\t")
                    ),
                ));
            }
            continue;
        }
        if fields.len() != header.len() {
            return Err(Error::parse(
                source,
                line,
                format!("expected {} columns, found {}", header.len(), fields.len()),
            ));
        }
        rows.push((line, fields));
    }
    if !saw_header {
        return Err(Error::parse(source, 1, "missing header line"));
    }
    Ok(rows)
}

fn parse_id(field: &str, source: &str, line: usize) -> Result<NodeId> {
    field
        .trim()
        .parse::<NodeId>()
        .map_err(|_| Error::parse(source, line, format!("invalid node id `{field}`")))
}

fn read_nodes<R: Read>(input: R, source: &str) -> Result<Vec<(NodeId, String)>> {
    records(input, source, &["id", "term"])?
        .into_iter()
        .map(|(line, f)| {
            let id = parse_id(&f[0], source, line)?;
            Ok((id, f[1].trim().to_string()))
        })
        .collect()
}

fn read_edges<R: Read>(input: R, source: &str) -> Result<Vec<(NodeId, NodeId, f64)>> {
    records(input, source, &["src", "dst", "weight"])?
        .into_iter()
        .map(|(line, f)| {
            let src = parse_id(&f[0], source, line)?;
            let dst = parse_id(&f[1], source, line)?;
            let w = f[2]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(source, line, format!("invalid weight `{}`", f[2])))?;
            Ok((src, dst, w))
        })
        .collect()
}

/// The seven-node worked example around instrument candidate 368, all
/// weights 1.0.
pub fn worked_example_graph() -> CausalGraph {
    const NODES: [NodeId; 7] = [368, 1402, 1308, 2000, 322, 2179, 1630];
    const EDGES: [(NodeId, NodeId); 9] = [
        (368, 1402),
        (368, 1308),
        (1402, 2000),
        (1402, 322),
        (1308, 2000),
        (1308, 322),
        (1308, 2179),
        (1308, 1630),
        (2179, 368),
    ];
    CausalGraph::from_parts(
        NODES.iter().map(|&id| (id, format!("concept {id}"))),
        EDGES.iter().map(|&(s, d)| (s, d, 1.0)),
    )
    .expect("worked example is valid")
}

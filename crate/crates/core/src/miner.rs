//! Instrumental-variable pattern mining: enumeration of `(Z, A, B)` triples,
//! the three-point quality rubric, summary statistics and subgraph overlap.
//!
//! A triple qualifies when `A` lies within the hop bound of `Z`, `B` lies
//! within the hop bound of `A`, and `Z` and `B` are not connected (in either
//! direction) once `A` is deleted. [`ExclusionMode::Literal`] runs the last
//! test on the full graph instead, which rejects every chain short enough for
//! `Z ⇝ A ⇝ B` itself to fit inside the hop bound.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::graph::{Bfs, CausalGraph, NodeId, ReachabilitySpec, Traverse};

/// Default rubric threshold for `w_za` and `w_ab`.
pub const DEFAULT_WEIGHT_THRESHOLD: f64 = 5.0;

pub const TRIPLES_HEADER: &str =
    "z\ta\tb\tz_term\ta_term\tb_term\tedge_node\tw_za\tw_ab\tscore\tquality";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionMode {
    /// Delete `A` before testing `Z ⇝ B` and `B ⇝ Z`.
    #[default]
    ARemoved,
    /// Test `Z ⇝ B` and `B ⇝ Z` on the full graph.
    Literal,
}

impl FromStr for ExclusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a-removed" | "a_removed" => Ok(Self::ARemoved),
            "literal" => Ok(Self::Literal),
            other => Err(Error::InvalidArgument(format!(
                "unknown exclusion mode `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    Low,
    Middle,
    High,
}

impl Quality {
    pub fn from_score(score: u8) -> Self {
        match score {
            0 => Quality::Low,
            3.. => Quality::High,
            _ => Quality::Middle,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Quality::Low => "low",
            Quality::Middle => "middle",
            Quality::High => "high",
        }
    }
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Quality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(Quality::Low),
            "middle" => Ok(Quality::Middle),
            "high" => Ok(Quality::High),
            other => Err(Error::InvalidArgument(format!("unknown quality `{other}`"))),
        }
    }
}

/// One scored `(Z, A, B)` pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IvTriple {
    pub z: NodeId,
    pub a: NodeId,
    pub b: NodeId,
    pub z_is_edge_node: bool,
    pub w_za: Option<f64>,
    pub w_ab: Option<f64>,
    pub score: u8,
    pub quality: Quality,
}

impl IvTriple {
    /// Applies the rubric: one point each for an edge-node `Z`, `w_za ≥ t`
    /// and `w_ab ≥ t`. Absent weights score nothing.
    pub fn from_parts(
        (z, a, b): (NodeId, NodeId, NodeId),
        z_is_edge_node: bool,
        w_za: Option<f64>,
        w_ab: Option<f64>,
        threshold: f64,
    ) -> Self {
        let over = |w: Option<f64>| w.is_some_and(|w| w >= threshold);
        let score = u8::from(z_is_edge_node) + u8::from(over(w_za)) + u8::from(over(w_ab));
        Self {
            z,
            a,
            b,
            z_is_edge_node,
            w_za,
            w_ab,
            score,
            quality: Quality::from_score(score),
        }
    }

    pub fn key(&self) -> (NodeId, NodeId, NodeId) {
        (self.z, self.a, self.b)
    }
}

/// Enumerates every qualifying `(z, a, b)`, sorted ascending.
///
/// `spec.excluded_node` is ignored; the miner chooses its own deletions.
pub fn enumerate_iv_triples(
    g: &CausalGraph,
    spec: &ReachabilitySpec,
    mode: ExclusionMode,
    execution: Execution,
) -> Result<Vec<(NodeId, NodeId, NodeId)>> {
    if g.is_empty() {
        return Err(Error::InvalidArgument("cannot mine an empty graph".into()));
    }
    if spec.max_hops == 0 {
        return Err(Error::InvalidArgument("max_hops must be at least 1".into()));
    }
    let n = g.node_count();
    let per_z = exec::map_range(execution, n, |z| triples_for(g, z, spec, mode));
    Ok(per_z
        .into_iter()
        .flatten()
        .map(|(z, a, b)| (g.id_at(z), g.id_at(a), g.id_at(b)))
        .collect())
}

fn triples_for(
    g: &CausalGraph,
    z: usize,
    spec: &ReachabilitySpec,
    mode: ExclusionMode,
) -> Vec<(usize, usize, usize)> {
    let n = g.node_count();
    let k = spec.max_hops;
    let fwd = Traverse::forward(spec.direction);
    let back = Traverse::backward(spec.direction);

    let mut scratch = Bfs::new(n);
    let mut z_fwd = Bfs::new(n);
    let mut z_back = Bfs::new(n);

    let mut reach_z = scratch.run(g, z, k, fwd, None).to_vec();
    reach_z.sort_unstable();
    if mode == ExclusionMode::Literal {
        z_fwd.run(g, z, k, fwd, None);
        z_back.run(g, z, k, back, None);
    }

    let mut out = Vec::new();
    for &a in &reach_z {
        let mut reach_a = scratch.run(g, a, k, fwd, None).to_vec();
        reach_a.sort_unstable();
        if mode == ExclusionMode::ARemoved {
            z_fwd.run(g, z, k, fwd, Some(a));
            z_back.run(g, z, k, back, Some(a));
        }
        // In a-removed mode `a` is marked as a visited sentinel, but it never
        // appears in `reach_a`.
        out.extend(
            reach_a
                .iter()
                .filter(|&&b| b != z && !z_fwd.marked(b) && !z_back.marked(b))
                .map(|&b| (z, a, b)),
        );
    }
    out
}

/// Scores one triple with unexcluded widest-path weights.
pub fn score_triple(
    g: &CausalGraph,
    (z, a, b): (NodeId, NodeId, NodeId),
    spec: &ReachabilitySpec,
    threshold: f64,
) -> Result<IvTriple> {
    if z == a || a == b || z == b {
        return Err(Error::InvalidArgument(format!(
            "triple ({z}, {a}, {b}) is not pairwise distinct"
        )));
    }
    g.idx(b)?;
    let spec = spec.without_exclusion();
    let edge = g.is_edge_node(z)?;
    let w_za = g.bottleneck_weight(z, a, &spec)?;
    let w_ab = g.bottleneck_weight(a, b, &spec)?;
    Ok(IvTriple::from_parts((z, a, b), edge, w_za, w_ab, threshold))
}

/// Scores a batch of triples, sharing widest-path computations per source.
pub fn score_triples(
    g: &CausalGraph,
    triples: &[(NodeId, NodeId, NodeId)],
    spec: &ReachabilitySpec,
    threshold: f64,
    execution: Execution,
) -> Result<Vec<IvTriple>> {
    let fwd = Traverse::forward(spec.direction);
    let mut sources = BTreeSet::new();
    for &(z, a, b) in triples {
        if z == a || a == b || z == b {
            return Err(Error::InvalidArgument(format!(
                "triple ({z}, {a}, {b}) is not pairwise distinct"
            )));
        }
        g.idx(b)?;
        sources.insert(g.idx(z)?);
        sources.insert(g.idx(a)?);
    }
    let sources: Vec<usize> = sources.into_iter().collect();
    let widest = exec::map(execution, &sources, |&s| {
        g.widest_from(s, spec.max_hops, fwd, None)
    });
    let widest: BTreeMap<usize, Vec<f64>> = sources.into_iter().zip(widest).collect();
    let lookup = |from: usize, to: usize| {
        let w = widest[&from][to];
        (w > f64::NEG_INFINITY).then_some(w)
    };

    triples
        .iter()
        .map(|&(z, a, b)| {
            let (zi, ai, bi) = (g.idx(z)?, g.idx(a)?, g.idx(b)?);
            Ok(IvTriple::from_parts(
                (z, a, b),
                g.is_edge_node(z)?,
                lookup(zi, ai),
                lookup(ai, bi),
                threshold,
            ))
        })
        .collect()
}

/// Enumerates and scores in one pass.
pub fn mine(
    g: &CausalGraph,
    spec: &ReachabilitySpec,
    mode: ExclusionMode,
    threshold: f64,
    execution: Execution,
) -> Result<Vec<IvTriple>> {
    let keys = enumerate_iv_triples(g, spec, mode, execution)?;
    score_triples(g, &keys, spec, threshold, execution)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub min: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub max: f64,
}

impl Distribution {
    pub fn of(counts: &[usize]) -> Self {
        if counts.is_empty() {
            return Self::default();
        }
        let n = counts.len() as f64;
        let mean = counts.iter().sum::<usize>() as f64 / n;
        let var = counts
            .iter()
            .map(|&c| (c as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        Self {
            min: *counts.iter().min().unwrap() as f64,
            mean,
            std: var.sqrt(),
            max: *counts.iter().max().unwrap() as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiningStats {
    /// Every node is an instrument candidate.
    pub n_nodes: usize,
    /// Distinct ordered `(z, a)` with `a` within the hop bound of `z`.
    pub n_za_pairs: usize,
    pub n_zab_triples: usize,
    pub per_z_pairs: Distribution,
    pub per_z: Distribution,
}

/// Summarises mined triples over all nodes of `g` (zero-count nodes included).
pub fn summarize(
    triples: &[IvTriple],
    g: &CausalGraph,
    spec: &ReachabilitySpec,
    execution: Execution,
) -> Result<MiningStats> {
    let spec = spec.without_exclusion();
    let pairs: Vec<usize> = exec::map(execution, g.node_ids(), |&z| {
        g.khop_reachable(z, &spec).map(|r| r.len()).unwrap_or(0)
    });
    let mut per_z: BTreeMap<NodeId, usize> = g.node_ids().iter().map(|&z| (z, 0)).collect();
    for t in triples {
        *per_z.get_mut(&t.z).ok_or(Error::UnknownNode(t.z))? += 1;
    }
    let counts: Vec<usize> = per_z.into_values().collect();
    Ok(MiningStats {
        n_nodes: g.node_count(),
        n_za_pairs: pairs.iter().sum(),
        n_zab_triples: triples.len(),
        per_z_pairs: Distribution::of(&pairs),
        per_z: Distribution::of(&counts),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityPartition {
    pub n_low: usize,
    pub n_middle: usize,
    pub n_high: usize,
    pub n_triples_with_edge_node_z: usize,
    pub n_distinct_edge_node_z: usize,
}

impl QualityPartition {
    pub fn total(&self) -> usize {
        self.n_low + self.n_middle + self.n_high
    }
}

pub fn quality_partition(triples: &[IvTriple]) -> QualityPartition {
    let mut p = QualityPartition::default();
    let mut edge_z = BTreeSet::new();
    for t in triples {
        match t.quality {
            Quality::Low => p.n_low += 1,
            Quality::Middle => p.n_middle += 1,
            Quality::High => p.n_high += 1,
        }
        if t.z_is_edge_node {
            p.n_triples_with_edge_node_z += 1;
            edge_z.insert(t.z);
        }
    }
    p.n_distinct_edge_node_z = edge_z.len();
    p
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub exclusive_left: Vec<NodeId>,
    pub exclusive_right: Vec<NodeId>,
    pub shared: Vec<NodeId>,
    pub n_exclusive_left: usize,
    pub n_exclusive_right: usize,
    pub n_shared: usize,
}

/// Compares the sets of distinct instrument nodes `Z` of two triple lists.
pub fn compare_subgraphs(left: &[IvTriple], right: &[IvTriple]) -> OverlapReport {
    let l: BTreeSet<NodeId> = left.iter().map(|t| t.z).collect();
    let r: BTreeSet<NodeId> = right.iter().map(|t| t.z).collect();
    let exclusive_left: Vec<_> = l.difference(&r).copied().collect();
    let exclusive_right: Vec<_> = r.difference(&l).copied().collect();
    let shared: Vec<_> = l.intersection(&r).copied().collect();
    OverlapReport {
        n_exclusive_left: exclusive_left.len(),
        n_exclusive_right: exclusive_right.len(),
        n_shared: shared.len(),
        exclusive_left,
        exclusive_right,
        shared,
    }
}

fn fmt_weight(w: Option<f64>) -> String {
    w.map_or_else(|| "NA".to_string(), |w| w.to_string())
}

/// Writes the triples TSV; terms come from `g`.
pub fn write_triples_tsv<W: Write>(
    g: &CausalGraph,
    triples: &[IvTriple],
    mut out: W,
) -> Result<()> {
    writeln!(out, "{TRIPLES_HEADER}")?;
    for t in triples {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            t.z,
            t.a,
            t.b,
            g.term(t.z)?,
            g.term(t.a)?,
            g.term(t.b)?,
            t.z_is_edge_node,
            fmt_weight(t.w_za),
            fmt_weight(t.w_ab),
            t.score,
            t.quality,
        )?;
    }
    Ok(())
}

/// Reads a triples TSV written by [`write_triples_tsv`].
pub fn read_triples_tsv<R: Read>(mut input: R, source: &str) -> Result<Vec<IvTriple>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == TRIPLES_HEADER => {}
        _ => return Err(Error::parse(source, 1, "missing triples header")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 11 {
            return Err(Error::parse(
                source,
                line_no,
                format!("expected 11 columns, found {}", f.len()),
            ));
        }
        let bad = |what: &str| Error::parse(source, line_no, format!("invalid {what}"));
        let id = |s: &str, what: &str| s.parse::<NodeId>().map_err(|_| bad(what));
        let weight = |s: &str, what: &str| -> Result<Option<f64>> {
            if s == "NA" {
                Ok(None)
            } else {
                s.parse::<f64>().map(Some).map_err(|_| bad(what))
            }
        };
        let t = IvTriple {
            z: id(f[0], "z")?,
            a: id(f[1], "a")?,
            b: id(f[2], "b")?,
            z_is_edge_node: f[6].parse().map_err(|_| bad("edge_node"))?,
            w_za: weight(f[7], "w_za")?,
            w_ab: weight(f[8], "w_ab")?,
            score: f[9].parse().map_err(|_| bad("score"))?,
            quality: f[10].parse().map_err(|_| bad("quality"))?,
        };
        if t.score > 3 || Quality::from_score(t.score) != t.quality {
            return Err(bad("score/quality pair"));
        }
        out.push(t);
    }
    Ok(out)
}

//! Seeded generators for test assets: random causal graphs, a brute-force
//! IV-triple oracle, labelled text corpora, and confounded panels with known
//! structural coefficients.

use std::collections::VecDeque;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::econ::{Column, PanelTable};
use crate::error::{Error, Result};
use crate::graph::{CausalGraph, Direction, NodeId, ReachabilitySpec};
use crate::miner::ExclusionMode;
use crate::textfeat::Document;

/// Largest graph the cubic oracle accepts.
pub const ORACLE_MAX_NODES: usize = 300;

/// Each ordered pair `u != v` gets an edge with probability `edge_prob`,
/// weight uniform in `weight_range`. Node `i` is named `n<i>`.
pub fn gen_random_graph(
    n_nodes: usize,
    edge_prob: f64,
    weight_range: (f64, f64),
    seed: u64,
) -> Result<CausalGraph> {
    if n_nodes == 0 {
        return Err(Error::InvalidArgument("n_nodes must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::InvalidArgument(format!(
            "edge probability {edge_prob} outside [0, 1]"
        )));
    }
    let (lo, hi) = weight_range;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "weight range ({lo}, {hi}) must be positive and ordered"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n_nodes as NodeId {
        for v in 0..n_nodes as NodeId {
            if u != v && rng.random::<f64>() < edge_prob {
                let w = if hi > lo {
                    rng.random_range(lo..=hi)
                } else {
                    lo
                };
                edges.push((u, v, w));
            }
        }
    }
    CausalGraph::from_parts((0..n_nodes as NodeId).map(|i| (i, format!("n{i}"))), edges)
}

/// Plain BFS hop distances from `src`, skipping `skip`.
fn hop_distances(adj: &[Vec<usize>], src: usize, skip: Option<usize>) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[src] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap_or(0);
        for &v in &adj[u] {
            if Some(v) != skip && dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// All-pairs hop distance matrix; row `s` holds distances from `s`.
fn all_pairs(adj: &[Vec<usize>], skip: Option<usize>) -> Vec<Vec<Option<usize>>> {
    (0..adj.len())
        .map(|s| {
            if Some(s) == skip {
                vec![None; adj.len()]
            } else {
                hop_distances(adj, s, skip)
            }
        })
        .collect()
}

/// Checks every ordered triple of distinct nodes against the IV predicates
/// with hop distances computed from scratch. Output is sorted by `(z, a, b)`.
pub fn brute_force_iv_oracle(
    g: &CausalGraph,
    spec: &ReachabilitySpec,
    mode: ExclusionMode,
) -> Result<Vec<(NodeId, NodeId, NodeId)>> {
    let n = g.node_count();
    if n > ORACLE_MAX_NODES {
        return Err(Error::InvalidArgument(format!(
            "oracle is limited to {ORACLE_MAX_NODES} nodes, graph has {n}"
        )));
    }
    let ids = g.node_ids();
    let pos = |id: NodeId| ids.binary_search(&id).expect("edge endpoints are nodes");
    let mut adj = vec![Vec::new(); n];
    for (s, d, _) in g.edges() {
        adj[pos(s)].push(pos(d));
        if spec.direction == Direction::Undirected {
            adj[pos(d)].push(pos(s));
        }
    }
    let k = spec.max_hops;
    let within = |d: Option<usize>| d.is_some_and(|d| d >= 1 && d <= k);
    let full = all_pairs(&adj, None);

    let mut out = Vec::new();
    for a in 0..n {
        let cut = match mode {
            ExclusionMode::ARemoved => Some(all_pairs(&adj, Some(a))),
            ExclusionMode::Literal => None,
        };
        let test = cut.as_ref().unwrap_or(&full);
        for z in (0..n).filter(|&z| z != a) {
            if !within(full[z][a]) {
                continue;
            }
            for b in (0..n).filter(|&b| b != a && b != z) {
                if within(full[a][b]) && !within(test[z][b]) && !within(test[b][z]) {
                    out.push((ids[z], ids[a], ids[b]));
                }
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusParams {
    pub n_docs: usize,
    /// Background words shared by both classes.
    pub vocab: Vec<String>,
    /// `(label, marker terms)` for the two classes.
    pub classes: [(String, Vec<String>); 2],
    /// Chance that a marker slot is filled from the other class.
    pub noise_rate: f64,
    pub background_len: usize,
    pub markers_per_doc: usize,
    pub seed: u64,
}

impl CorpusParams {
    /// Shareholder- vs. stakeholder-flavoured markers over a synthetic
    /// background vocabulary.
    pub fn finance_default(n_docs: usize, noise_rate: f64, seed: u64) -> Self {
        let words = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        Self {
            n_docs,
            vocab: (0..300).map(|i| format!("term{i:03}")).collect(),
            classes: [
                (
                    "shareholder".into(),
                    words(&[
                        "dividend",
                        "share buyback",
                        "earnings per share",
                        "shareholder value",
                        "stock price",
                        "return on equity",
                    ]),
                ),
                (
                    "stakeholder".into(),
                    words(&[
                        "community",
                        "employee welfare",
                        "sustainability",
                        "supplier relations",
                        "environmental impact",
                        "social responsibility",
                    ]),
                ),
            ],
            noise_rate,
            background_len: 120,
            markers_per_doc: 9,
            seed,
        }
    }

    /// `term\tscore` rows: markers score high, background words low.
    pub fn similarity_table(&self) -> String {
        let mut out = String::from("term\tscore\n");
        for (i, m) in self.classes.iter().flat_map(|(_, ms)| ms).enumerate() {
            out.push_str(&format!("{m}\t{:.2}\n", 0.9 - 0.02 * i as f64));
        }
        for (i, w) in self.vocab.iter().enumerate().step_by(10) {
            out.push_str(&format!("{w}\t{:.2}\n", 0.05 + 0.01 * (i % 40) as f64));
        }
        out
    }
}

/// Documents alternate between the two classes. Foreign markers are capped
/// below half of each document's marker slots, so own-class marker counts
/// always exceed foreign ones.
pub fn gen_classification_corpus(params: &CorpusParams) -> Result<Vec<Document>> {
    let [(l0, m0), (l1, m1)] = &params.classes;
    if l0 == l1 {
        return Err(Error::InvalidArgument("class labels must differ".into()));
    }
    if m0.is_empty() || m1.is_empty() {
        return Err(Error::InvalidArgument(
            "each class needs at least one marker term".into(),
        ));
    }
    if m0.iter().any(|m| m1.contains(m)) {
        return Err(Error::InvalidArgument("marker term sets overlap".into()));
    }
    if params.vocab.is_empty() && params.background_len > 0 {
        return Err(Error::InvalidArgument(
            "background vocabulary is empty".into(),
        ));
    }
    if !(0.0..=1.0).contains(&params.noise_rate) {
        return Err(Error::InvalidArgument(format!(
            "noise rate {} outside [0, 1]",
            params.noise_rate
        )));
    }
    if params.markers_per_doc == 0 {
        return Err(Error::InvalidArgument(
            "markers_per_doc must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let max_foreign = (params.markers_per_doc - 1) / 2;
    let binom = Binomial::new(params.markers_per_doc as u64, params.noise_rate)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let width = params.n_docs.max(1).to_string().len().max(4);

    let docs = (0..params.n_docs)
        .map(|i| {
            let class = i % 2;
            let (own, other) = if class == 0 { (m0, m1) } else { (m1, m0) };
            let n_foreign = (binom.sample(&mut rng) as usize).min(max_foreign);
            let mut tokens: Vec<String> = (0..params.background_len)
                .map(|_| params.vocab.choose(&mut rng).expect("non-empty").clone())
                .collect();
            for slot in 0..params.markers_per_doc {
                let pool = if slot < n_foreign { other } else { own };
                let marker = pool.choose(&mut rng).expect("non-empty").clone();
                let at = rng.random_range(0..=tokens.len());
                tokens.insert(at, marker);
            }
            Document {
                id: format!("doc{i:0width$}"),
                text: tokens.join(" "),
                label: Some(params.classes[class].0.clone()),
            }
        })
        .collect();
    Ok(docs)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupEffects {
    pub n_industries: usize,
    pub n_years: usize,
    /// Standard deviation of per-level intercepts.
    pub intercept_sd: f64,
}

/// Structural coefficients for `A = πZ + αU + ν`, `B = βA + γU + ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScmParams {
    pub pi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma_nu: f64,
    pub sigma_eps: f64,
    pub n: usize,
    pub seed: u64,
    pub groups: Option<GroupEffects>,
}

impl Default for ScmParams {
    fn default() -> Self {
        Self {
            pi: 1.0,
            alpha: 1.0,
            beta: 2.0,
            gamma: 1.0,
            sigma_nu: 1.0,
            sigma_eps: 1.0,
            n: 10_000,
            seed: 42,
            groups: None,
        }
    }
}

impl ScmParams {
    fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::InvalidArgument(format!(
                "n = {} is below 10",
                self.n
            )));
        }
        if !(self.sigma_nu > 0.0 && self.sigma_eps > 0.0) {
            return Err(Error::InvalidArgument(
                "noise standard deviations must be positive".into(),
            ));
        }
        if let Some(g) = self.groups {
            if g.n_industries < 1
                || g.n_years < 1
                || g.intercept_sd.is_nan()
                || g.intercept_sd < 0.0
            {
                return Err(Error::InvalidArgument(
                    "group counts must be positive and intercept sd >= 0".into(),
                ));
            }
        }
        Ok(())
    }

    /// Population OLS bias of regressing `B` on `A`: `γα / Var(A)` with unit
    /// variance `Z` and `U` (group intercepts ignored).
    pub fn ols_bias(&self) -> f64 {
        let var_a = self.pi * self.pi + self.alpha * self.alpha + self.sigma_nu * self.sigma_nu;
        self.gamma * self.alpha / var_a
    }
}

/// Full draw including the unobserved confounder.
#[derive(Clone, Debug, PartialEq)]
pub struct ScmSample {
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub industry: Option<Vec<usize>>,
    pub year: Option<Vec<usize>>,
}

pub fn gen_scm_sample(params: &ScmParams) -> Result<ScmSample> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.n;
    let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

    // Group intercepts are drawn once per level, before any row.
    let groups = params.groups.map(|g| {
        let ind_a: Vec<f64> = (0..g.n_industries)
            .map(|_| g.intercept_sd * normal(&mut rng))
            .collect();
        let ind_b: Vec<f64> = (0..g.n_industries)
            .map(|_| g.intercept_sd * normal(&mut rng))
            .collect();
        let yr_a: Vec<f64> = (0..g.n_years)
            .map(|_| g.intercept_sd * normal(&mut rng))
            .collect();
        let yr_b: Vec<f64> = (0..g.n_years)
            .map(|_| g.intercept_sd * normal(&mut rng))
            .collect();
        (g, ind_a, ind_b, yr_a, yr_b)
    });

    let mut s = ScmSample {
        z: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        b: Vec::with_capacity(n),
        industry: groups.as_ref().map(|_| Vec::with_capacity(n)),
        year: groups.as_ref().map(|_| Vec::with_capacity(n)),
    };
    for _ in 0..n {
        let z = normal(&mut rng);
        let u = normal(&mut rng);
        let nu = params.sigma_nu * normal(&mut rng);
        let eps = params.sigma_eps * normal(&mut rng);
        let (mut shift_a, mut shift_b) = (0.0, 0.0);
        if let Some((g, ind_a, ind_b, yr_a, yr_b)) = &groups {
            let i = rng.random_range(0..g.n_industries);
            let y = rng.random_range(0..g.n_years);
            shift_a = ind_a[i] + yr_a[y];
            shift_b = ind_b[i] + yr_b[y];
            s.industry.as_mut().expect("groups").push(i);
            s.year.as_mut().expect("groups").push(y);
        }
        let a = params.pi * z + params.alpha * u + nu + shift_a;
        let b = params.beta * a + params.gamma * u + eps + shift_b;
        s.z.push(z);
        s.u.push(u);
        s.a.push(a);
        s.b.push(b);
    }
    Ok(s)
}

/// Observable panel: columns `z`, `a`, `b`, and `industry`/`year` when group
/// effects are on. The confounder is not emitted.
pub fn gen_scm_panel(params: &ScmParams) -> Result<PanelTable> {
    let s = gen_scm_sample(params)?;
    let mut t = PanelTable::new()
        .with_column("z", Column::Numeric(s.z))?
        .with_column("a", Column::Numeric(s.a))?
        .with_column("b", Column::Numeric(s.b))?;
    if let (Some(ind), Some(yr)) = (s.industry, s.year) {
        t.push_column(
            "industry",
            Column::Text(ind.iter().map(|i| format!("ind{i:02}")).collect()),
        )?;
        t.push_column(
            "year",
            Column::Numeric(yr.iter().map(|&y| 2015.0 + y as f64).collect()),
        )?;
    }
    Ok(t)
}

//! Weighted term-frequency features: documents × concepts, each cell the
//! concept's count in the preprocessed document times the concept weight.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::graph::CausalGraph;

/// Default similarity cut-off for similarity-based concept lists.
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.55;

/// Common English function words, already in preprocessed form.
pub const ENGLISH_STOPWORDS: &[&str] = &[
    "a",
    "about",
    "above",
    "after",
    "again",
    "against",
    "ain",
    "all",
    "am",
    "an",
    "and",
    "any",
    "are",
    "aren",
    "arent",
    "as",
    "at",
    "be",
    "because",
    "been",
    "before",
    "being",
    "below",
    "between",
    "both",
    "but",
    "by",
    "can",
    "couldn",
    "couldnt",
    "d",
    "did",
    "didn",
    "didnt",
    "do",
    "does",
    "doesn",
    "doesnt",
    "doing",
    "don",
    "dont",
    "down",
    "during",
    "each",
    "few",
    "for",
    "from",
    "further",
    "had",
    "hadn",
    "hadnt",
    "has",
    "hasn",
    "hasnt",
    "have",
    "haven",
    "havent",
    "having",
    "he",
    "her",
    "here",
    "hers",
    "herself",
    "him",
    "himself",
    "his",
    "how",
    "i",
    "if",
    "in",
    "into",
    "is",
    "isn",
    "isnt",
    "it",
    "its",
    "itself",
    "just",
    "ll",
    "m",
    "ma",
    "me",
    "mightn",
    "mightnt",
    "more",
    "most",
    "mustn",
    "mustnt",
    "my",
    "myself",
    "needn",
    "neednt",
    "no",
    "nor",
    "not",
    "now",
    "o",
    "of",
    "off",
    "on",
    "once",
    "only",
    "or",
    "other",
    "our",
    "ours",
    "ourselves",
    "out",
    "over",
    "own",
    "re",
    "s",
    "same",
    "shan",
    "shant",
    "she",
    "shes",
    "should",
    "shouldn",
    "shouldnt",
    "shouldve",
    "so",
    "some",
    "such",
    "t",
    "than",
    "that",
    "thatll",
    "the",
    "their",
    "theirs",
    "them",
    "themselves",
    "then",
    "there",
    "these",
    "they",
    "this",
    "those",
    "through",
    "to",
    "too",
    "under",
    "until",
    "up",
    "ve",
    "very",
    "was",
    "wasn",
    "wasnt",
    "we",
    "were",
    "weren",
    "werent",
    "what",
    "when",
    "where",
    "which",
    "while",
    "who",
    "whom",
    "why",
    "will",
    "with",
    "won",
    "wont",
    "wouldn",
    "wouldnt",
    "y",
    "you",
    "youd",
    "youll",
    "your",
    "youre",
    "yours",
    "yourself",
    "yourselves",
    "youve",
];

pub type Stopwords = HashSet<String>;

pub fn english_stopwords() -> Stopwords {
    ENGLISH_STOPWORDS.iter().map(|s| s.to_string()).collect()
}

/// One word per line; blank lines and `#` comments ignored. Words are
/// normalised like document text.
pub fn read_stopwords<R: Read>(mut input: R) -> Result<Stopwords> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .flat_map(normalize_tokens)
        .collect())
}

/// Lowercases, strips every character that is neither alphanumeric nor
/// whitespace, and splits on whitespace.
fn normalize_tokens(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// Tokens of `text` with symbols and stopwords removed.
pub fn preprocess_document(text: &str, stopwords: &Stopwords) -> Vec<String> {
    normalize_tokens(text)
        .into_iter()
        .filter(|t| !stopwords.contains(t))
        .collect()
}

/// Non-overlapping, left-to-right occurrences of `term` (already tokenised)
/// in `tokens`.
pub fn term_frequency(tokens: &[String], term: &[String]) -> usize {
    if term.is_empty() || term.len() > tokens.len() {
        return 0;
    }
    let mut count = 0;
    let mut i = 0;
    while i + term.len() <= tokens.len() {
        if tokens[i..i + term.len()] == *term {
            count += 1;
            i += term.len();
        } else {
            i += 1;
        }
    }
    count
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConceptSource {
    Similarity,
    GraphWeighted,
    GraphUnweighted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    /// Normalised: lowercase, symbols stripped, single spaces.
    pub term: String,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptList {
    pub entries: Vec<Concept>,
    pub source_kind: ConceptSource,
}

impl ConceptList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|c| c.term.as_str())
    }

    /// Same terms with every weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|e| Concept {
                    term: e.term.clone(),
                    weight: e.weight * c,
                })
                .collect(),
            source_kind: self.source_kind,
        }
    }

    /// Reads a `term\tscore` table and keeps rows with `score ≥ threshold`,
    /// weighted by their score. May return an empty list.
    pub fn from_similarity<R: Read>(input: R, threshold: f64, source: &str) -> Result<Self> {
        let mut text = String::new();
        let mut input = input;
        input.read_to_string(&mut text)?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h))
                if h.trim_end()
                    .split('\t')
                    .map(str::trim)
                    .eq(["term", "score"]) => {}
            _ => return Err(Error::parse(source, 1, "expected header `term\\tscore`")),
        }
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
            if f.len() != 2 {
                return Err(Error::parse(
                    source,
                    line_no,
                    format!("expected 2 columns, found {}", f.len()),
                ));
            }
            let score: f64 = f[1]
                .trim()
                .parse()
                .map_err(|_| Error::parse(source, line_no, format!("invalid score `{}`", f[1])))?;
            if !(-1.0..=1.0).contains(&score) {
                return Err(Error::parse(
                    source,
                    line_no,
                    format!("score {score} outside [-1, 1]"),
                ));
            }
            let term = normalize_tokens(f[0]).join(" ");
            if term.is_empty() {
                return Err(Error::parse(
                    source,
                    line_no,
                    "term is empty after normalisation",
                ));
            }
            if !seen.insert(term.clone()) {
                return Err(Error::parse(
                    source,
                    line_no,
                    format!("duplicate term `{term}`"),
                ));
            }
            if score >= threshold {
                entries.push(Concept {
                    term,
                    weight: score,
                });
            }
        }
        Ok(Self {
            entries,
            source_kind: ConceptSource::Similarity,
        })
    }

    /// One concept per node term. Weighted lists use the node's largest
    /// incident edge weight and drop isolated nodes; unweighted lists give
    /// every node weight 1. Terms colliding after normalisation are merged,
    /// keeping the larger weight.
    pub fn from_graph(g: &CausalGraph, weighted: bool) -> Result<Self> {
        let mut entries: Vec<Concept> = Vec::new();
        let mut at: HashMap<String, usize> = HashMap::new();
        for &id in g.node_ids() {
            let weight = if weighted {
                match g.max_incident_weight(id)? {
                    Some(w) => w,
                    None => continue,
                }
            } else {
                1.0
            };
            let term = normalize_tokens(g.term(id)?).join(" ");
            if term.is_empty() {
                continue;
            }
            match at.get(&term) {
                Some(&i) => entries[i].weight = entries[i].weight.max(weight),
                None => {
                    at.insert(term.clone(), entries.len());
                    entries.push(Concept { term, weight });
                }
            }
        }
        Ok(Self {
            entries,
            source_kind: if weighted {
                ConceptSource::GraphWeighted
            } else {
                ConceptSource::GraphUnweighted
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: Option<String>,
}

/// Reads every `.txt` file in `dir` (id = file stem, sorted by id) plus an
/// optional `labels.tsv` with header `id\tlabel`.
pub fn read_corpus_dir(dir: impl AsRef<Path>) -> Result<Vec<Document>> {
    let dir = dir.as_ref();
    let mut docs = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(Error::io_at(dir))? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| {
                Error::InvalidArgument(format!("non UTF-8 file name {}", path.display()))
            })?
            .to_string();
        docs.push(Document {
            id,
            text: std::fs::read_to_string(&path).map_err(Error::io_at(&path))?,
            label: None,
        });
    }
    docs.sort_by(|a, b| a.id.cmp(&b.id));

    let labels_path = dir.join("labels.tsv");
    if labels_path.exists() {
        let labels = read_labels(
            std::fs::File::open(&labels_path).map_err(Error::io_at(&labels_path))?,
            &labels_path.display().to_string(),
        )?;
        for d in &mut docs {
            d.label = labels.get(&d.id).cloned();
        }
    }
    Ok(docs)
}

fn read_labels<R: Read>(mut input: R, source: &str) -> Result<HashMap<String, String>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end().split('\t').map(str::trim).eq(["id", "label"]) => {}
        _ => return Err(Error::parse(source, 1, "expected header `id\\tlabel`")),
    }
    let mut out = HashMap::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        if f.len() != 2 {
            return Err(Error::parse(
                source,
                i + 1,
                format!("expected 2 columns, found {}", f.len()),
            ));
        }
        if out
            .insert(f[0].trim().to_string(), f[1].trim().to_string())
            .is_some()
        {
            return Err(Error::parse(
                source,
                i + 1,
                format!("duplicate id `{}`", f[0]),
            ));
        }
    }
    Ok(out)
}

/// Writes documents as `<id>.txt` plus `labels.tsv` when any are labelled.
pub fn write_corpus_dir(dir: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for d in docs {
        std::fs::write(dir.join(format!("{}.txt", d.id)), &d.text)?;
    }
    if docs.iter().any(|d| d.label.is_some()) {
        let mut f = std::fs::File::create(dir.join("labels.tsv"))?;
        writeln!(f, "id\tlabel")?;
        for d in docs {
            if let Some(l) = &d.label {
                writeln!(f, "{}\t{l}", d.id)?;
            }
        }
    }
    Ok(())
}

/// Dense documents × concepts matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub row_ids: Vec<String>,
    pub columns: Vec<String>,
    /// Row-major, `row_ids.len()` rows of `columns.len()` values.
    pub values: Vec<Vec<f64>>,
    pub labels: Vec<Option<String>>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn is_labeled(&self) -> bool {
        !self.labels.is_empty() && self.labels.iter().all(Option::is_some)
    }

    /// Labels of a fully labelled matrix.
    pub fn label_vec(&self) -> Result<Vec<String>> {
        if !self.is_labeled() {
            return Err(Error::InvalidArgument(
                "feature matrix is not fully labelled".into(),
            ));
        }
        Ok(self
            .labels
            .iter()
            .map(|l| l.clone().unwrap_or_default())
            .collect())
    }

    fn select(&self, rows: &[usize]) -> Self {
        Self {
            row_ids: rows.iter().map(|&r| self.row_ids[r].clone()).collect(),
            columns: self.columns.clone(),
            values: rows.iter().map(|&r| self.values[r].clone()).collect(),
            labels: rows.iter().map(|&r| self.labels[r].clone()).collect(),
        }
    }

    /// CSV: `id`, concept columns in order, then `label` if any row is
    /// labelled.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let with_label = self.labels.iter().any(Option::is_some);
        let mut header = vec!["id".to_string()];
        header.extend(self.columns.iter().cloned());
        if with_label {
            header.push("label".into());
        }
        w.write_record(&header).map_err(csv_io)?;
        for (r, id) in self.row_ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(self.values[r].iter().map(f64::to_string));
            if with_label {
                rec.push(self.labels[r].clone().unwrap_or_default());
            }
            w.write_record(&rec).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::parse(source, 1, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.first().map(String::as_str) != Some("id") {
            return Err(Error::parse(source, 1, "first column must be `id`"));
        }
        let with_label = header.last().map(String::as_str) == Some("label") && header.len() > 1;
        let end = if with_label {
            header.len() - 1
        } else {
            header.len()
        };
        let columns = header[1..end].to_vec();
        let mut m = FeatureMatrix {
            row_ids: Vec::new(),
            columns,
            values: Vec::new(),
            labels: Vec::new(),
        };
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                Error::parse(
                    source,
                    e.position().map_or(0, |p| p.line() as usize),
                    e.to_string(),
                )
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            m.row_ids.push(rec[0].to_string());
            let row = (1..end)
                .map(|j| {
                    let v: f64 = rec[j].trim().parse().map_err(|_| {
                        Error::parse(source, line, format!("invalid value `{}`", &rec[j]))
                    })?;
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(Error::parse(
                            source,
                            line,
                            format!("feature value {v} must be finite and >= 0"),
                        ));
                    }
                    Ok(v)
                })
                .collect::<Result<Vec<f64>>>()?;
            m.values.push(row);
            m.labels.push(if with_label && !rec[end].is_empty() {
                Some(rec[end].to_string())
            } else {
                None
            });
        }
        Ok(m)
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Builds the matrix with cell `(k, i) = tf(t_i, d_k) · w_i`. Rows follow
/// document order, columns follow concept order.
pub fn build_feature_matrix(
    docs: &[Document],
    concepts: &ConceptList,
    stopwords: &Stopwords,
    execution: Execution,
) -> Result<FeatureMatrix> {
    if concepts.is_empty() {
        return Err(Error::InvalidArgument("concept list is empty".into()));
    }
    let mut ids = HashSet::new();
    for d in docs {
        if !ids.insert(d.id.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "duplicate document id `{}`",
                d.id
            )));
        }
    }
    // Concept terms go through the same stopword filter as documents so that
    // multiword terms line up with document tokens.
    let term_tokens: Vec<Vec<String>> = concepts
        .entries
        .iter()
        .map(|c| preprocess_document(&c.term, stopwords))
        .collect();
    let values = exec::map(execution, docs, |d| {
        let tokens = preprocess_document(&d.text, stopwords);
        term_tokens
            .iter()
            .zip(&concepts.entries)
            .map(|(t, c)| term_frequency(&tokens, t) as f64 * c.weight)
            .collect::<Vec<f64>>()
    });
    Ok(FeatureMatrix {
        row_ids: docs.iter().map(|d| d.id.clone()).collect(),
        columns: concepts.entries.iter().map(|c| c.term.clone()).collect(),
        values,
        labels: docs.iter().map(|d| d.label.clone()).collect(),
    })
}

/// Seeded shuffle, then the first `floor(train_fraction · n)` rows train.
pub fn split_train_validation(
    matrix: &FeatureMatrix,
    train_fraction: f64,
    seed: u64,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    if !matrix.is_labeled() {
        return Err(Error::InvalidArgument(
            "cannot split an unlabelled matrix".into(),
        ));
    }
    let n = matrix.n_rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((train_fraction * n as f64) + 1e-9).floor() as usize;
    let (train, val) = order.split_at(n_train);
    Ok((matrix.select(train), matrix.select(val)))
}

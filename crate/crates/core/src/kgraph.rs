//! A tiny typed-relation graph and the label-relation matrix built from it.
//!
//! Triples are directed: `(u, v, r)` states that `u` is the `r` of `v`, e.g.
//! `("Mammal", "Rabbit", "class")` makes Mammal the class of Rabbit. Two
//! entities are siblings when they share a parent under the *same* relation
//! type; sharing a parent under different relation types does not count.
//!
//! The relation matrix G mixes soft label vectors toward siblings: the raw
//! entry for column entity n is 1 on the diagonal, beta/|N(n)| on rows m that
//! are siblings of n, and 0 elsewhere, after which each row is normalized to
//! sum 1. |N(n)| counts every sibling of n in the graph, including entities
//! that are not labels; entries exist only for label pairs.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// One `parent \t child \t relation` statement.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triple {
    pub parent: String,
    pub child: String,
    pub relation: String,
}

impl Triple {
    pub fn new(
        parent: impl Into<String>,
        child: impl Into<String>,
        relation: impl Into<String>,
    ) -> Self {
        Triple { parent: parent.into(), child: child.into(), relation: relation.into() }
    }
}

/// Deduplicated triple store with the derived entity set.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    entities: BTreeSet<String>,
    triples: Vec<Triple>,
}

impl KnowledgeGraph {
    /// Builds a graph, dropping exact duplicate triples (first occurrence
    /// kept).
    pub fn new(triples: Vec<Triple>) -> Self {
        let mut seen = HashSet::new();
        let mut kept = Vec::new();
        let mut entities = BTreeSet::new();
        for t in triples {
            entities.insert(t.parent.clone());
            entities.insert(t.child.clone());
            if seen.insert(t.clone()) {
                kept.push(t);
            }
        }
        KnowledgeGraph { entities, triples: kept }
    }

    /// Parses tab-separated `parent\tchild\trelation` lines. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut triples = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 || fields.iter().any(|f| f.trim().is_empty()) {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!(
                        "expected three tab-separated fields `parent\\tchild\\trelation`, got {:?}",
                        line
                    ),
                });
            }
            triples.push(Triple::new(fields[0].trim(), fields[1].trim(), fields[2].trim()));
        }
        Ok(KnowledgeGraph::new(triples))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Writes one `parent\tchild\trelation` line per triple, in stored order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        for t in &self.triples {
            out.push_str(&format!("{}\t{}\t{}\n", t.parent, t.child, t.relation));
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.entities.iter().map(|s| s.as_str())
    }

    pub fn contains(&self, entity: &str) -> bool {
        self.entities.contains(entity)
    }

    /// Entities sharing a parent with `entity` under the same relation type.
    /// The entity itself is never included.
    pub fn siblings(&self, entity: &str) -> Result<BTreeSet<String>> {
        if !self.contains(entity) {
            return Err(Error::Lookup(format!("entity {entity:?} is not in the graph")));
        }
        let mut keys: BTreeSet<(&str, &str)> = BTreeSet::new();
        for t in &self.triples {
            if t.child == entity {
                keys.insert((t.parent.as_str(), t.relation.as_str()));
            }
        }
        let mut out = BTreeSet::new();
        for t in &self.triples {
            if t.child != entity && keys.contains(&(t.parent.as_str(), t.relation.as_str())) {
                out.insert(t.child.clone());
            }
        }
        Ok(out)
    }
}

/// Reads a label-order file: one entity id per line, blank lines and
/// `#` comments skipped. Order in the file defines the label indices.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    let mut labels = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        labels.push(line.to_string());
    }
    if labels.is_empty() {
        return Err(Error::Data("label-order file contains no labels".into()));
    }
    Ok(labels)
}

/// Row-stochastic sibling-mixing matrix over an ordered label set.
#[derive(Debug, Clone)]
pub struct RelationMatrix {
    labels: Vec<String>,
    matrix: Matrix,
    beta: f64,
}

impl RelationMatrix {
    /// Builds G from the graph. Labels absent from the graph get an identity
    /// row (no siblings). See [`build_relation_matrix`].
    pub fn build(graph: &KnowledgeGraph, labels: &[String], beta: f64) -> Result<Self> {
        build_relation_matrix_opts(graph, labels, beta, false)
    }

    /// Same as [`RelationMatrix::build`] but transposes the raw sibling
    /// pattern before row normalization; used for sensitivity checks of the
    /// index convention.
    pub fn build_transposed(
        graph: &KnowledgeGraph,
        labels: &[String],
        beta: f64,
    ) -> Result<Self> {
        build_relation_matrix_opts(graph, labels, beta, true)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// `G * s`: mixes a soft label vector toward sibling classes.
    pub fn apply(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.matrix.matvec(s)
    }
}

/// Builds the row-stochastic relation matrix for `labels` from `graph`.
pub fn build_relation_matrix(
    graph: &KnowledgeGraph,
    labels: &[String],
    beta: f64,
) -> Result<RelationMatrix> {
    RelationMatrix::build(graph, labels, beta)
}

fn build_relation_matrix_opts(
    graph: &KnowledgeGraph,
    labels: &[String],
    beta: f64,
    transpose: bool,
) -> Result<RelationMatrix> {
    if labels.is_empty() {
        return Err(Error::Data("relation matrix needs at least one label".into()));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Parameter(format!("beta {beta} must be finite and >= 0")));
    }
    let index: BTreeMap<&str, usize> =
        labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    if index.len() != labels.len() {
        return Err(Error::Data("duplicate label in relation matrix label set".into()));
    }

    let n = labels.len();
    let mut raw = Matrix::identity(n);
    for (col, label) in labels.iter().enumerate() {
        if !graph.contains(label) {
            continue;
        }
        let sibs = graph.siblings(label)?;
        if sibs.is_empty() {
            continue;
        }
        let weight = beta / sibs.len() as f64;
        for sib in &sibs {
            if let Some(&row) = index.get(sib.as_str()) {
                raw.set(row, col, weight);
            }
        }
    }
    if transpose {
        raw = raw.transposed();
    }
    for r in 0..n {
        let row = raw.row_mut(r);
        let sum: f64 = row.iter().sum();
        // Diagonal is always 1, so the sum is >= 1 and division is safe.
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(RelationMatrix { labels: labels.to_vec(), matrix: raw, beta })
}

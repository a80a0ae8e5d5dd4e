//! Type hierarchy loading and per-type embedding vectors.
//!
//! The hierarchy is kept as a forest: a type that is declared with a second,
//! different parent keeps the first one and the extra edge is reported as a
//! warning. Types are stored in lexicographic id order, which is also the
//! order used by every score vector downstream.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{Embedding, EmbeddingModel};

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("cannot read ontology: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("cycle in type hierarchy: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("token template `{0}` has no `{{}}` placeholder")]
    BadTemplate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OntologyFormat {
    NTriples,
    Tsv,
}

impl FromStr for OntologyFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ntriples" | "nt" | "n-triples" => Ok(OntologyFormat::NTriples),
            "tsv" => Ok(OntologyFormat::Tsv),
            other => Err(format!("unknown ontology format `{other}` (expected ntriples or tsv)")),
        }
    }
}

impl fmt::Display for OntologyFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OntologyFormat::NTriples => "ntriples",
            OntologyFormat::Tsv => "tsv",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeNode {
    pub id: String,
    pub label: String,
    /// Distance from the root of the node's tree; roots have depth 0.
    pub depth: usize,
}

/// Non-fatal problems found while loading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum OntologyWarning {
    /// `child` already had parent `kept`; the edge to `dropped` was ignored.
    ExtraParent {
        child: String,
        kept: String,
        dropped: String,
    },
}

impl fmt::Display for OntologyWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OntologyWarning::ExtraParent { child, kept, dropped } => {
                write!(f, "{child}: keeping parent {kept}, dropping {dropped}")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TypeOntology {
    nodes: Vec<TypeNode>,
    index: HashMap<String, usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    warnings: Vec<OntologyWarning>,
}

impl TypeOntology {
    /// Builds a forest from standalone type declarations and `(child, parent)` edges.
    ///
    /// Types mentioned only as parents are created implicitly. For a child with
    /// several distinct parents the first edge wins.
    pub fn from_edges<I, J, S>(types: I, edges: J) -> Result<Self, OntologyError>
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let types: Vec<String> = types.into_iter().map(Into::into).collect();
        let edges: Vec<(String, String)> = edges.into_iter().map(|(c, p)| (c.into(), p.into())).collect();

        let ids: BTreeSet<&str> = types
            .iter()
            .map(String::as_str)
            .chain(edges.iter().flat_map(|(c, p)| [c.as_str(), p.as_str()]))
            .collect();
        let index: HashMap<String, usize> = ids.iter().enumerate().map(|(i, id)| ((*id).to_owned(), i)).collect();
        let n = index.len();
        let names: Vec<&str> = ids.iter().copied().collect();

        let mut parent: Vec<Option<usize>> = vec![None; n];
        let mut warnings = Vec::new();
        for (child, par) in &edges {
            if child == par {
                return Err(OntologyError::Cycle(vec![child.clone(), par.clone()]));
            }
            let (c, p) = (index[child], index[par]);
            match parent[c] {
                None => parent[c] = Some(p),
                Some(existing) if existing == p => {}
                Some(existing) => warnings.push(OntologyWarning::ExtraParent {
                    child: child.clone(),
                    kept: names[existing].to_owned(),
                    dropped: par.clone(),
                }),
            }
        }

        if let Some(cycle) = find_cycle(&parent, &names) {
            return Err(OntologyError::Cycle(cycle));
        }

        // Index order is lexicographic, so children lists come out sorted.
        let mut children = vec![Vec::new(); n];
        for (c, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(c);
            }
        }

        let mut depth = vec![0usize; n];
        let mut stack: Vec<usize> = (0..n).filter(|&i| parent[i].is_none()).collect();
        while let Some(i) = stack.pop() {
            for &c in &children[i] {
                depth[c] = depth[i] + 1;
                stack.push(c);
            }
        }

        let nodes = names
            .iter()
            .zip(depth)
            .map(|(id, depth)| TypeNode {
                id: (*id).to_owned(),
                label: camel_split(id).join(" "),
                depth,
            })
            .collect();

        Ok(TypeOntology {
            nodes,
            index,
            parent,
            children,
            warnings,
        })
    }

    pub fn load(path: impl AsRef<Path>, format: OntologyFormat) -> Result<Self, OntologyError> {
        let mut reader = BufReader::new(File::open(path.as_ref())?);
        match format {
            OntologyFormat::NTriples => Self::read_ntriples(&mut reader),
            OntologyFormat::Tsv => Self::read_tsv(&mut reader),
        }
    }

    /// Reads `child<TAB>parent` lines; a single-column line declares a root.
    /// Blank lines and `#` comments are skipped.
    pub fn read_tsv<R: BufRead>(reader: &mut R) -> Result<Self, OntologyError> {
        let mut types = Vec::new();
        let mut edges = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let parse_err = |reason: &str| OntologyError::Parse {
                line: i + 1,
                reason: reason.to_owned(),
            };
            match fields.as_slice() {
                [root] => types.push((*root).to_owned()),
                [child, par] if !child.is_empty() && !par.is_empty() => {
                    edges.push(((*child).to_owned(), (*par).to_owned()))
                }
                [_, _] => return Err(parse_err("empty type name")),
                _ => return Err(parse_err("expected `child<TAB>parent` or a single type name")),
            }
        }
        Self::from_edges(types, edges)
    }

    /// Reads the `subClassOf` statements of an N-Triples file.
    ///
    /// Every line must be a well-formed triple; statements with other predicates,
    /// and subclass statements involving blank nodes or literals, are ignored.
    /// IRIs are reduced to their last path segment.
    pub fn read_ntriples<R: BufRead>(reader: &mut R) -> Result<Self, OntologyError> {
        let mut edges = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let triple = parse_triple(&line).map_err(|reason| OntologyError::Parse { line: i + 1, reason })?;
            let Some((s, p, o)) = triple else { continue };
            if !p.iri().is_some_and(|p| p.ends_with("subClassOf")) {
                continue;
            }
            let (Some(child), Some(par)) = (s.iri(), o.iri()) else {
                continue;
            };
            let reduce = |iri: &str| {
                let id = local_name(iri);
                if id.is_empty() {
                    Err(OntologyError::Parse {
                        line: i + 1,
                        reason: format!("cannot derive a type id from <{iri}>"),
                    })
                } else {
                    Ok(id.to_owned())
                }
            };
            edges.push((reduce(child)?, reduce(par)?));
        }
        Self::from_edges(Vec::<String>::new(), edges)
    }

    /// Serializes as TSV: roots as single-column lines, then one edge per line.
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for (i, node) in self.nodes.iter().enumerate() {
            match self.parent[i] {
                None => writeln!(w, "{}", node.id)?,
                Some(p) => writeln!(w, "{}\t{}", node.id, self.nodes[p].id)?,
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn warnings(&self) -> &[OntologyWarning] {
        &self.warnings
    }

    pub fn nodes(&self) -> &[TypeNode] {
        &self.nodes
    }

    /// All type ids in lexicographic order.
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.id.as_str())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn index_of(&self, id: &str) -> Result<usize, OntologyError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| OntologyError::UnknownType(id.to_owned()))
    }

    pub fn node(&self, id: &str) -> Result<&TypeNode, OntologyError> {
        Ok(&self.nodes[self.index_of(id)?])
    }

    pub fn parent_of(&self, id: &str) -> Result<Option<&str>, OntologyError> {
        let i = self.index_of(id)?;
        Ok(self.parent[i].map(|p| self.nodes[p].id.as_str()))
    }

    /// Direct children in lexicographic order.
    pub fn children_of(&self, id: &str) -> Result<Vec<&str>, OntologyError> {
        let i = self.index_of(id)?;
        Ok(self.children[i].iter().map(|&c| self.nodes[c].id.as_str()).collect())
    }

    pub fn roots(&self) -> impl Iterator<Item = &str> {
        self.parent
            .iter()
            .zip(&self.nodes)
            .filter(|(p, _)| p.is_none())
            .map(|(_, n)| n.id.as_str())
    }

    pub(crate) fn child_indices(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Node indices ordered so that every child precedes its parent.
    pub fn bottom_up_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        // Stable sort keeps lexicographic order within a depth.
        order.sort_by_key(|&i| std::cmp::Reverse(self.nodes[i].depth));
        order
    }

    /// Number of nodes in the subtree rooted at `id`, including `id`.
    pub fn subtree_size(&self, id: &str) -> Result<usize, OntologyError> {
        let mut stack = vec![self.index_of(id)?];
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            stack.extend(&self.children[i]);
        }
        Ok(size)
    }

    /// Vector for `id`, computed without caching. See [`TypeVectors`] for the cached form.
    pub fn type_vector(
        &self,
        model: &EmbeddingModel,
        template: &TokenTemplate,
        id: &str,
    ) -> Result<Option<Embedding>, OntologyError> {
        self.index_of(id)?;
        Ok(resolve_type_vector(model, template, id))
    }
}

/// Returns the ids along one parent cycle, if any, starting and ending at the same id.
fn find_cycle(parent: &[Option<usize>], names: &[&str]) -> Option<Vec<String>> {
    // 0 = unvisited, 1 = on current walk, 2 = known acyclic
    let mut state = vec![0u8; parent.len()];
    for start in 0..parent.len() {
        let mut path: Vec<usize> = Vec::new();
        let mut cur = Some(start);
        while let Some(i) = cur {
            match state[i] {
                2 => break,
                1 => {
                    let from = path.iter().position(|&p| p == i).expect("on path");
                    let mut cycle: Vec<String> = path[from..].iter().map(|&p| names[p].to_string()).collect();
                    cycle.push(names[i].to_owned());
                    return Some(cycle);
                }
                _ => {
                    state[i] = 1;
                    path.push(i);
                    cur = parent[i];
                }
            }
        }
        for i in path {
            state[i] = 2;
        }
    }
    None
}

/// Splits a type name into lowercase words at case changes and non-alphanumerics.
///
/// `"MeanOfTransportation"` becomes `["mean", "of", "transportation"]`; every
/// uppercase letter starts a new word, so `"AB"` becomes `["a", "b"]`.
pub fn camel_split(name: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut cur = String::new();
    for ch in name.chars() {
        if !ch.is_alphanumeric() {
            if !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
            continue;
        }
        if ch.is_uppercase() && !cur.is_empty() {
            words.push(std::mem::take(&mut cur));
        }
        cur.extend(ch.to_lowercase());
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words
}

/// How a type id is turned into a model token, e.g. `DBPEDIA_ID/{}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenTemplate(String);

impl TokenTemplate {
    pub fn new(pattern: impl Into<String>) -> Result<Self, OntologyError> {
        let pattern = pattern.into();
        if pattern.contains("{}") {
            Ok(TokenTemplate(pattern))
        } else {
            Err(OntologyError::BadTemplate(pattern))
        }
    }

    pub fn render(&self, id: &str) -> String {
        self.0.replace("{}", id)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Default for TokenTemplate {
    fn default() -> Self {
        TokenTemplate("{}".to_owned())
    }
}

fn resolve_type_vector(model: &EmbeddingModel, template: &TokenTemplate, id: &str) -> Option<Embedding> {
    if let Some(e) = model.lookup(&template.render(id)) {
        return Some(e);
    }
    let words = camel_split(id);
    if words.is_empty() {
        return None;
    }
    model.embed_phrase(&words).ok().flatten()
}

/// Type vectors for one (ontology, model, template) combination, computed once.
#[derive(Debug, Clone)]
pub struct TypeVectors {
    vectors: Vec<Option<Embedding>>,
    ids: Vec<String>,
}

impl TypeVectors {
    pub fn compute(ontology: &TypeOntology, model: &EmbeddingModel, template: &TokenTemplate) -> Self {
        let ids: Vec<String> = ontology.ids().map(str::to_owned).collect();
        let vectors = ids.iter().map(|id| resolve_type_vector(model, template, id)).collect();
        TypeVectors { vectors, ids }
    }

    pub fn get(&self, id: &str) -> Result<Option<&Embedding>, OntologyError> {
        let i = self
            .ids
            .binary_search_by(|probe| probe.as_str().cmp(id))
            .map_err(|_| OntologyError::UnknownType(id.to_owned()))?;
        Ok(self.vectors[i].as_ref())
    }

    /// `(id, vector)` for every type that has a vector, in ontology order.
    pub fn scorable(&self) -> impl Iterator<Item = (&str, &Embedding)> {
        self.ids
            .iter()
            .zip(&self.vectors)
            .filter_map(|(id, v)| v.as_ref().map(|v| (id.as_str(), v)))
    }

    /// Types for which no vector could be obtained.
    pub fn unscorable(&self) -> Vec<&str> {
        self.ids
            .iter()
            .zip(&self.vectors)
            .filter(|(_, v)| v.is_none())
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

// --- minimal N-Triples term parser -----------------------------------------

#[derive(Debug, PartialEq)]
enum Term<'a> {
    Iri(&'a str),
    Blank,
    Literal,
}

impl<'a> Term<'a> {
    fn iri(&self) -> Option<&'a str> {
        match self {
            Term::Iri(s) => Some(s),
            _ => None,
        }
    }
}

type Triple<'a> = (Term<'a>, Term<'a>, Term<'a>);

fn parse_triple(line: &str) -> Result<Option<Triple<'_>>, String> {
    let rest = line.trim_start();
    if rest.is_empty() || rest.starts_with('#') {
        return Ok(None);
    }
    let (s, rest) = parse_term(rest)?;
    if s == Term::Literal {
        return Err("subject cannot be a literal".into());
    }
    let (p, rest) = parse_term(rest.trim_start())?;
    if p.iri().is_none() {
        return Err("predicate must be an IRI".into());
    }
    let (o, rest) = parse_term(rest.trim_start())?;
    let rest = rest.trim_start();
    let Some(rest) = rest.strip_prefix('.') else {
        return Err("missing terminating `.`".into());
    };
    let rest = rest.trim_start();
    if !rest.is_empty() && !rest.starts_with('#') {
        return Err(format!("unexpected trailing content `{rest}`"));
    }
    Ok(Some((s, p, o)))
}

fn parse_term(s: &str) -> Result<(Term<'_>, &str), String> {
    if let Some(rest) = s.strip_prefix('<') {
        let end = rest.find('>').ok_or("unterminated IRI")?;
        let iri = &rest[..end];
        if iri.chars().any(char::is_whitespace) {
            return Err("whitespace inside IRI".into());
        }
        Ok((Term::Iri(iri), &rest[end + 1..]))
    } else if let Some(rest) = s.strip_prefix("_:") {
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        if end == 0 {
            return Err("empty blank node label".into());
        }
        Ok((Term::Blank, &rest[end..]))
    } else if let Some(rest) = s.strip_prefix('"') {
        let mut escaped = false;
        let mut close = None;
        for (i, ch) in rest.char_indices() {
            match ch {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => {
                    close = Some(i);
                    break;
                }
                _ => {}
            }
        }
        let close = close.ok_or("unterminated literal")?;
        let mut rest = &rest[close + 1..];
        if let Some(tail) = rest.strip_prefix("^^") {
            let (dt, tail) = parse_term(tail)?;
            if dt.iri().is_none() {
                return Err("literal datatype must be an IRI".into());
            }
            rest = tail;
        } else if let Some(tail) = rest.strip_prefix('@') {
            let end = tail
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '-'))
                .unwrap_or(tail.len());
            if end == 0 {
                return Err("empty language tag".into());
            }
            rest = &tail[end..];
        }
        Ok((Term::Literal, rest))
    } else {
        Err(format!(
            "expected IRI, blank node or literal at `{}`",
            s.chars().take(20).collect::<String>()
        ))
    }
}

fn local_name(iri: &str) -> &str {
    iri.rsplit(['/', '#']).next().unwrap_or(iri)
}

//! Text normalisation, trigram partial matching and tf-idf exact matching.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Entity, EntityId, GraphSnapshot, NodeIx};

/// Gram length.
pub const Q: usize = 3;
const START_PAD: char = '^';
const END_PAD: char = '$';

pub type Gram = [char; Q];

/// Lowercases, turns every non-alphanumeric character into a separator and
/// collapses runs of separators into single spaces.
pub fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    for word in lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
    {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Whitespace tokens of the normalised text.
pub fn tokenize(text: &str) -> Vec<String> {
    normalize(text)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Distinct trigrams of a normalised text padded with `^^` and `$$`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QGramSet {
    grams: BTreeSet<Gram>,
}

impl QGramSet {
    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn contains(&self, gram: &str) -> bool {
        let chars: Vec<char> = gram.chars().collect();
        <Gram>::try_from(chars.as_slice())
            .map(|g| self.grams.contains(&g))
            .unwrap_or(false)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Gram> {
        self.grams.iter()
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.grams.iter().map(|g| g.iter().collect()).collect()
    }

    pub fn jaccard(&self, other: &QGramSet) -> f64 {
        let shared = self.grams.intersection(&other.grams).count();
        jaccard(shared, self.len(), other.len())
    }
}

fn jaccard(shared: usize, left: usize, right: usize) -> f64 {
    let union = left + right - shared;
    if union == 0 {
        0.0
    } else {
        shared as f64 / union as f64
    }
}

pub fn qgrams(text: &str) -> QGramSet {
    let normalized = normalize(text);
    if normalized.is_empty() {
        return QGramSet::default();
    }
    let padded: Vec<char> = [START_PAD; Q - 1]
        .into_iter()
        .chain(normalized.chars())
        .chain([END_PAD; Q - 1])
        .collect();
    let grams = padded
        .windows(Q)
        .map(|w| [w[0], w[1], w[2]])
        .collect();
    QGramSet { grams }
}

/// Jaccard overlap of the two trigram sets; zero when both are empty.
pub fn partial_similarity(query: &str, name: &str) -> f64 {
    qgrams(query).jaccard(&qgrams(name))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldWeights {
    pub name: f64,
    pub tags: f64,
    pub other: f64,
}

impl Default for FieldWeights {
    fn default() -> Self {
        Self {
            name: 3.0,
            tags: 2.0,
            other: 1.0,
        }
    }
}

impl FieldWeights {
    /// Weighted text fields of `entity`: name, description, then every
    /// labelled field.
    pub fn weighted_fields<'a>(&self, entity: &'a Entity) -> Vec<(&'a str, f64)> {
        let mut out = vec![
            (entity.name.as_str(), self.name),
            (entity.description.as_str(), self.other),
        ];
        for (label, text) in &entity.fields {
            let w = if label.eq_ignore_ascii_case("tags") {
                self.tags
            } else {
                self.other
            };
            out.push((text.as_str(), w));
        }
        out
    }

    /// Weighted term counts over the union of an entity's fields.
    pub fn term_frequencies(&self, entity: &Entity) -> BTreeMap<String, f64> {
        let mut tf = BTreeMap::new();
        for (text, weight) in self.weighted_fields(entity) {
            for token in tokenize(text) {
                *tf.entry(token).or_insert(0.0) += weight;
            }
        }
        tf
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("cannot index an empty graph")]
    EmptyGraph,
    #[error("unknown entity `{0}`")]
    UnknownId(EntityId),
}

/// Unit-length sparse tf-idf vector, entries sorted by term id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FieldVector {
    entries: Vec<(u32, f64)>,
}

impl FieldVector {
    fn from_weights(mut entries: Vec<(u32, f64)>) -> Self {
        entries.retain(|&(_, w)| w > 0.0);
        entries.sort_by_key(|&(t, _)| t);
        let norm = entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut entries {
                *w /= norm;
            }
        }
        Self { entries }
    }

    pub fn weight(&self, term: u32) -> f64 {
        self.entries
            .binary_search_by_key(&term, |&(t, _)| t)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt()
    }
}

/// A query resolved against a [`TextIndex`] vocabulary.
#[derive(Debug, Clone)]
pub struct PreparedQuery {
    pub normalized: String,
    /// Ids of query grams known to the index, sorted.
    grams: Vec<u32>,
    /// Size of the full query gram set, known or not.
    gram_count: usize,
    /// (term id, tf * idf), sorted by term id; only terms with idf > 0.
    terms: Vec<(u32, f64)>,
    term_norm: f64,
    /// Term ids of every query token the index knows, idf zero or not.
    known_terms: Vec<u32>,
}

impl PreparedQuery {
    pub fn is_empty(&self) -> bool {
        self.normalized.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct TextIndex {
    weights: FieldWeights,
    gram_ids: HashMap<Gram, u32>,
    /// Per entity: sorted gram ids of its name.
    name_grams: Vec<Vec<u32>>,
    /// gram id -> entities whose name contains it.
    gram_postings: Vec<Vec<NodeIx>>,
    term_ids: HashMap<String, u32>,
    idf: Vec<f64>,
    /// term id -> entities whose field union contains it.
    term_postings: Vec<Vec<NodeIx>>,
    vectors: Vec<FieldVector>,
}

impl TextIndex {
    pub fn build(snapshot: &GraphSnapshot) -> Result<Self, TextError> {
        Self::build_with(snapshot, FieldWeights::default())
    }

    pub fn build_with(snapshot: &GraphSnapshot, weights: FieldWeights) -> Result<Self, TextError> {
        if snapshot.is_empty() {
            return Err(TextError::EmptyGraph);
        }
        let entities = snapshot.entities();

        let mut gram_ids: HashMap<Gram, u32> = HashMap::new();
        let mut gram_postings: Vec<Vec<NodeIx>> = Vec::new();
        let mut name_grams = Vec::with_capacity(entities.len());
        for (ix, entity) in entities.iter().enumerate() {
            let mut ids: Vec<u32> = qgrams(&entity.name)
                .iter()
                .map(|g| {
                    let next = gram_ids.len() as u32;
                    let id = *gram_ids.entry(*g).or_insert(next);
                    if id == next {
                        gram_postings.push(Vec::new());
                    }
                    gram_postings[id as usize].push(ix as NodeIx);
                    id
                })
                .collect();
            ids.sort_unstable();
            name_grams.push(ids);
        }

        let tfs: Vec<BTreeMap<String, f64>> =
            entities.iter().map(|e| weights.term_frequencies(e)).collect();
        let vocabulary: BTreeSet<&str> = tfs
            .iter()
            .flat_map(|tf| tf.keys().map(String::as_str))
            .collect();
        let term_ids: HashMap<String, u32> = vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.to_string(), i as u32))
            .collect();
        let mut term_postings: Vec<Vec<NodeIx>> = vec![Vec::new(); term_ids.len()];
        for (ix, tf) in tfs.iter().enumerate() {
            for term in tf.keys() {
                term_postings[term_ids[term] as usize].push(ix as NodeIx);
            }
        }
        let n = entities.len() as f64;
        let idf: Vec<f64> = term_postings
            .iter()
            .map(|p| (n / p.len() as f64).ln())
            .collect();
        let vectors = tfs
            .iter()
            .map(|tf| {
                FieldVector::from_weights(
                    tf.iter()
                        .map(|(term, &count)| {
                            let id = term_ids[term];
                            (id, count * idf[id as usize])
                        })
                        .collect(),
                )
            })
            .collect();

        Ok(Self {
            weights,
            gram_ids,
            name_grams,
            gram_postings,
            term_ids,
            idf,
            term_postings,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn weights(&self) -> FieldWeights {
        self.weights
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.term_ids.get(term).map(|&t| self.idf[t as usize])
    }

    pub fn vector(&self, e: NodeIx) -> &FieldVector {
        &self.vectors[e as usize]
    }

    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.term_ids.get(term).copied()
    }

    pub fn prepare(&self, query: &str) -> PreparedQuery {
        let normalized = normalize(query);
        let gram_set = qgrams(&normalized);
        let mut grams: Vec<u32> = gram_set
            .iter()
            .filter_map(|g| self.gram_ids.get(g).copied())
            .collect();
        grams.sort_unstable();

        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for token in tokenize(&normalized) {
            if let Some(&id) = self.term_ids.get(&token) {
                *counts.entry(id).or_insert(0.0) += 1.0;
            }
        }
        let known_terms = counts.keys().copied().collect();
        let terms: Vec<(u32, f64)> = counts
            .into_iter()
            .map(|(id, tf)| (id, tf * self.idf[id as usize]))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        let term_norm = terms.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
        PreparedQuery {
            normalized,
            grams,
            gram_count: gram_set.len(),
            terms,
            term_norm,
            known_terms,
        }
    }

    fn check(&self, e: NodeIx) -> Result<(), TextError> {
        if (e as usize) < self.len() {
            Ok(())
        } else {
            Err(TextError::UnknownId(EntityId::new(format!("#{e}"))))
        }
    }

    /// Trigram Jaccard between the query and the entity's name.
    pub fn partial_ix(&self, query: &PreparedQuery, e: NodeIx) -> Result<f64, TextError> {
        self.check(e)?;
        let name = &self.name_grams[e as usize];
        let shared = query
            .grams
            .iter()
            .filter(|g| name.binary_search(g).is_ok())
            .count();
        Ok(jaccard(shared, query.gram_count, name.len()))
    }

    /// Cosine between the query's tf-idf vector and the entity's field vector.
    pub fn exact_ix(&self, query: &PreparedQuery, e: NodeIx) -> Result<f64, TextError> {
        self.check(e)?;
        if query.term_norm == 0.0 {
            return Ok(0.0);
        }
        let vector = &self.vectors[e as usize];
        let mut dot = 0.0;
        for &(term, w) in &query.terms {
            let ew = vector.weight(term);
            if ew > 0.0 {
                dot += w * ew;
            }
        }
        Ok((dot / query.term_norm).clamp(0.0, 1.0))
    }

    pub fn exact_similarity(
        &self,
        snapshot: &GraphSnapshot,
        query: &str,
        e: &EntityId,
    ) -> Result<f64, TextError> {
        let ix = snapshot.ix(e).ok_or_else(|| TextError::UnknownId(e.clone()))?;
        self.exact_ix(&self.prepare(query), ix)
    }

    /// Every entity sharing at least one name gram or one indexed token with
    /// the query, sorted by position.
    pub fn candidates(&self, query: &PreparedQuery) -> Vec<NodeIx> {
        let mut out: Vec<NodeIx> = query
            .grams
            .iter()
            .flat_map(|&g| self.gram_postings[g as usize].iter().copied())
            .chain(
                query
                    .known_terms
                    .iter()
                    .flat_map(|&t| self.term_postings[t as usize].iter().copied()),
            )
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Partial scores for every entity sharing a name gram with the query.
    /// Same arithmetic as [`TextIndex::partial_ix`].
    pub fn partial_scores(&self, query: &PreparedQuery) -> Vec<(NodeIx, f64)> {
        let mut shared: HashMap<NodeIx, usize> = HashMap::new();
        for &g in &query.grams {
            for &e in &self.gram_postings[g as usize] {
                *shared.entry(e).or_insert(0) += 1;
            }
        }
        let mut out: Vec<(NodeIx, f64)> = shared
            .into_iter()
            .map(|(e, c)| {
                (
                    e,
                    jaccard(c, query.gram_count, self.name_grams[e as usize].len()),
                )
            })
            .collect();
        out.sort_unstable_by_key(|&(e, _)| e);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Entity, EntityKind, Graph};

    fn set(items: &[&str]) -> Vec<String> {
        let mut v: Vec<String> = items.iter().map(|s| s.to_string()).collect();
        v.sort();
        v
    }

    #[test]
    fn normalize_rules() {
        assert_eq!(normalize("Vittorio  Carmignani!"), "vittorio carmignani");
        assert_eq!(normalize(""), "");
        assert_eq!(normalize("  --  "), "");
        assert_eq!(normalize("PCA/SVD: a\tprimer"), "pca svd a primer");
    }

    #[test]
    fn trigram_windows() {
        assert_eq!(qgrams("ab").to_strings(), set(&["^^a", "^ab", "ab$", "b$$"]));
        assert!(qgrams("").is_empty());
        assert_eq!(
            qgrams("pca").to_strings(),
            set(&["^^p", "^pc", "pca", "ca$", "a$$"])
        );
        // grams are computed on normalised text
        assert_eq!(qgrams("PCA!"), qgrams("pca"));
        assert!(qgrams("aaaa").len() < 6);
    }

    #[test]
    fn partial_examples() {
        assert_eq!(partial_similarity("pca", "pca"), 1.0);
        assert_eq!(partial_similarity("ab", "cd"), 0.0);
        assert_eq!(partial_similarity("", ""), 0.0);
        assert_eq!(partial_similarity("", "abc"), 0.0);
        let typo = partial_similarity("vittorio karmignani", "vittorio carmignani");
        assert!(typo > 0.6, "{typo}");
    }

    fn corpus(entities: Vec<Entity>) -> (Graph, TextIndex) {
        let mut g = Graph::new();
        for e in entities {
            g.add_entity(e).unwrap();
        }
        let idx = TextIndex::build(&g.snapshot()).unwrap();
        (g, idx)
    }

    #[test]
    fn single_entity_has_zero_vector() {
        let (_, idx) = corpus(vec![Entity::new("c", EntityKind::Concept, "pca")]);
        assert_eq!(idx.idf("pca"), Some(0.0));
        assert!(idx.vector(0).is_zero());
    }

    #[test]
    fn unique_terms_get_weight() {
        let (_, idx) = corpus(vec![
            Entity::new("a", EntityKind::Concept, "pca shared"),
            Entity::new("b", EntityKind::Concept, "svd shared"),
        ]);
        let pca = idx.term_id("pca").unwrap();
        assert!(idx.vector(0).weight(pca) > 0.0);
        assert_eq!(idx.vector(1).weight(pca), 0.0);
        assert_eq!(idx.vector(0).weight(idx.term_id("shared").unwrap()), 0.0);
        assert!((idx.vector(0).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn build_rejects_empty() {
        assert_eq!(
            TextIndex::build(&Graph::new().snapshot()).unwrap_err(),
            TextError::EmptyGraph
        );
    }

    #[test]
    fn exact_match_examples() {
        let (g, idx) = corpus(vec![
            Entity::new("u1", EntityKind::User, "Ann Smith").with_field("affiliation", "DTU"),
            Entity::new("u2", EntityKind::User, "Bob Jones").with_field("affiliation", "Padua"),
            Entity::new("c1", EntityKind::Concept, "Linear algebra"),
        ]);
        let snap = g.snapshot();
        let s = idx.exact_similarity(&snap, "dtu", &"u1".into()).unwrap();
        assert!(s > 0.0);
        assert_eq!(idx.exact_similarity(&snap, "dtu", &"u2".into()).unwrap(), 0.0);
        assert_eq!(idx.exact_similarity(&snap, "zebra", &"u1".into()).unwrap(), 0.0);
        let full = idx
            .exact_similarity(&snap, "linear algebra", &"c1".into())
            .unwrap();
        assert!((full - 1.0).abs() < 1e-12, "{full}");
        assert_eq!(
            idx.exact_similarity(&snap, "dtu", &"nope".into()),
            Err(TextError::UnknownId("nope".into()))
        );
    }

    #[test]
    fn field_weights_apply() {
        let w = FieldWeights::default();
        let e = Entity::new("x", EntityKind::Post, "pca pca")
            .with_description("pca")
            .with_field("tags", "pca")
            .with_field("affiliation", "pca");
        assert_eq!(w.term_frequencies(&e)["pca"], 3.0 * 2.0 + 1.0 + 2.0 + 1.0);
    }

    #[test]
    fn candidate_sources() {
        let (_, idx) = corpus(vec![
            Entity::new("a", EntityKind::Concept, "pca"),
            Entity::new("b", EntityKind::Source, "unrelated").with_description("uses pca"),
            Entity::new("c", EntityKind::Post, "zzz"),
        ]);
        let q = idx.prepare("pca");
        assert_eq!(idx.candidates(&q), vec![0, 1]);
        let partial = idx.partial_scores(&q);
        assert_eq!(partial, vec![(0, 1.0)]);
        assert_eq!(idx.partial_ix(&q, 0).unwrap(), 1.0);
    }
}

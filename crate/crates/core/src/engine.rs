//! Ranking for search and autocomplete: a weighted mean of topical
//! similarity and social proximity to the searcher.

use std::cmp::Ordering;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance::{DistanceError, DistanceIndex};
use crate::graph::{EntityId, EntityKind, GraphSnapshot, NodeIx};
use crate::text::{TextError, TextIndex};

pub const SEARCH_KINDS: [EntityKind; 5] = [
    EntityKind::User,
    EntityKind::Concept,
    EntityKind::Course,
    EntityKind::Source,
    EntityKind::Post,
];

pub const QAC_KINDS: [EntityKind; 3] = [EntityKind::User, EntityKind::Concept, EntityKind::Course];

pub const DEFAULT_SEARCH_LIMIT: usize = 25;
pub const DEFAULT_QAC_LIMIT: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("unknown user `{0}`")]
    UnknownUser(EntityId),
    #[error("unknown entity `{0}`")]
    UnknownEntity(EntityId),
    #[error("query is empty after normalization")]
    EmptyQuery,
    #[error("limit must be at least 1")]
    InvalidLimit,
    #[error("similarity inputs must lie in [0, 1], got s_t={s_t}, s_u={s_u}")]
    OutOfRangeInput { s_t: f64, s_u: f64 },
    #[error("similarity weights must be positive and finite, got alpha={alpha}, beta={beta}")]
    InvalidWeights { alpha: f64, beta: f64 },
    #[error("kind `{0}` is not searchable")]
    UnsupportedKind(EntityKind),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Text(#[from] TextError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights {
    alpha: f64,
    beta: f64,
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

impl SimilarityWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, EngineError> {
        let ok = |w: f64| w.is_finite() && w > 0.0;
        if ok(alpha) && ok(beta) {
            Ok(Self { alpha, beta })
        } else {
            Err(EngineError::InvalidWeights { alpha, beta })
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn blend(&self, s_t: f64, s_u: f64) -> f64 {
        (self.alpha * s_t + self.beta * s_u) / (self.alpha + self.beta)
    }
}

/// `(alpha * s_t + beta * s_u) / (alpha + beta)`.
pub fn overall_similarity(w: SimilarityWeights, s_t: f64, s_u: f64) -> Result<f64, EngineError> {
    let in_range = |s: f64| (0.0..=1.0).contains(&s);
    if !in_range(s_t) || !in_range(s_u) {
        return Err(EngineError::OutOfRangeInput { s_t, s_u });
    }
    Ok(w.blend(s_t, s_u))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredResult {
    pub id: EntityId,
    pub kind: EntityKind,
    pub name: String,
    /// S
    pub overall: f64,
    /// S_T
    pub topical: f64,
    /// S_U
    pub social: f64,
}

/// Scores are compared at this resolution so that values that are exactly equal but
/// computed along different float paths (1/6 + 1/2 vs 2/3 + 0) still tie.
pub const SCORE_RESOLUTION: f64 = 1e-9;

fn score_key(s: f64) -> i64 {
    (s / SCORE_RESOLUTION).round() as i64
}

/// Result order: overall score descending, then kind, then id.
pub fn rank_order(a: &ScoredResult, b: &ScoredResult) -> Ordering {
    score_key(b.overall)
        .cmp(&score_key(a.overall))
        .then_with(|| a.kind.cmp(&b.kind))
        .then_with(|| a.id.cmp(&b.id))
}

/// Every component behind one (searcher, query, entity) score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityBreakdown {
    pub partial: f64,
    pub exact: f64,
    pub topical: f64,
    pub social: f64,
    pub overall: f64,
    pub distance: Option<u8>,
}

/// Immutable bundle of a graph snapshot and the indexes built from it.
#[derive(Debug, Clone)]
pub struct Engine {
    snapshot: Arc<GraphSnapshot>,
    text: TextIndex,
    distances: DistanceIndex,
    weights: SimilarityWeights,
}

impl Engine {
    /// Builds both indexes; `landmarks = None` uses the default count.
    pub fn build(snapshot: Arc<GraphSnapshot>, landmarks: Option<usize>) -> Result<Self, EngineError> {
        let distances = match landmarks {
            Some(k) => DistanceIndex::build(&snapshot, k)?,
            None => DistanceIndex::build_default(&snapshot)?,
        };
        let text = TextIndex::build(&snapshot)?;
        Ok(Self {
            snapshot,
            text,
            distances,
            weights: SimilarityWeights::default(),
        })
    }

    pub fn from_parts(
        snapshot: Arc<GraphSnapshot>,
        text: TextIndex,
        distances: DistanceIndex,
    ) -> Result<Self, EngineError> {
        if !distances.matches(&snapshot) || text.len() != snapshot.len() {
            return Err(DistanceError::SnapshotMismatch.into());
        }
        Ok(Self {
            snapshot,
            text,
            distances,
            weights: SimilarityWeights::default(),
        })
    }

    pub fn with_weights(mut self, weights: SimilarityWeights) -> Self {
        self.weights = weights;
        self
    }

    pub fn snapshot(&self) -> &Arc<GraphSnapshot> {
        &self.snapshot
    }

    pub fn text(&self) -> &TextIndex {
        &self.text
    }

    pub fn distances(&self) -> &DistanceIndex {
        &self.distances
    }

    pub fn weights(&self) -> SimilarityWeights {
        self.weights
    }

    fn searcher(&self, id: &EntityId) -> Result<NodeIx, EngineError> {
        match self.snapshot.ix(id) {
            Some(ix) if self.snapshot.entity(ix).kind == EntityKind::User => Ok(ix),
            _ => Err(EngineError::UnknownUser(id.clone())),
        }
    }

    fn result(&self, e: NodeIx, topical: f64, social: f64) -> ScoredResult {
        let entity = self.snapshot.entity(e);
        ScoredResult {
            id: entity.id.clone(),
            kind: entity.kind,
            name: entity.name.clone(),
            overall: self.weights.blend(topical, social),
            topical,
            social,
        }
    }

    fn finish(mut results: Vec<ScoredResult>, limit: usize) -> Vec<ScoredResult> {
        results.sort_by(rank_order);
        results.truncate(limit);
        results
    }

    /// Full search over users, concepts, courses, sources and posts.
    /// `kinds` narrows the searchable kinds.
    pub fn search(
        &self,
        searcher: &EntityId,
        query: &str,
        limit: usize,
        kinds: Option<&[EntityKind]>,
    ) -> Result<Vec<ScoredResult>, EngineError> {
        let u = self.searcher(searcher)?;
        if limit == 0 {
            return Err(EngineError::InvalidLimit);
        }
        let allowed: &[EntityKind] = match kinds {
            Some(ks) => {
                if let Some(k) = ks.iter().find(|k| !SEARCH_KINDS.contains(k)) {
                    return Err(EngineError::UnsupportedKind(*k));
                }
                ks
            }
            None => &SEARCH_KINDS,
        };
        let query = self.text.prepare(query);
        if query.is_empty() {
            return Err(EngineError::EmptyQuery);
        }
        let proximity = self.distances.proximity(u)?;
        let mut results = Vec::new();
        for e in self.text.candidates(&query) {
            if !allowed.contains(&self.snapshot.entity(e).kind) {
                continue;
            }
            let partial = self.text.partial_ix(&query, e)?;
            let exact = self.text.exact_ix(&query, e)?;
            let topical = (partial + exact) / 2.0;
            if topical <= 0.0 {
                continue;
            }
            results.push(self.result(e, topical, proximity.similarity(e)));
        }
        Ok(Self::finish(results, limit))
    }

    /// Autocomplete over users, concepts and courses using trigram overlap
    /// with the entity name as the topical score.
    pub fn autocomplete(
        &self,
        searcher: &EntityId,
        prefix: &str,
        limit: usize,
    ) -> Result<Vec<ScoredResult>, EngineError> {
        let u = self.searcher(searcher)?;
        if limit == 0 {
            return Err(EngineError::InvalidLimit);
        }
        let query = self.text.prepare(prefix);
        if query.is_empty() {
            return Err(EngineError::EmptyQuery);
        }
        let proximity = self.distances.proximity(u)?;
        let results = self
            .text
            .partial_scores(&query)
            .into_iter()
            .filter(|&(e, partial)| partial > 0.0 && QAC_KINDS.contains(&self.snapshot.entity(e).kind))
            .map(|(e, partial)| self.result(e, partial, proximity.similarity(e)))
            .collect();
        Ok(Self::finish(results, limit))
    }

    /// Score components for one entity, using the search topical score.
    pub fn explain(
        &self,
        searcher: &EntityId,
        query: &str,
        entity: &EntityId,
    ) -> Result<SimilarityBreakdown, EngineError> {
        let u = self.searcher(searcher)?;
        let e = self
            .snapshot
            .ix(entity)
            .ok_or_else(|| EngineError::UnknownEntity(entity.clone()))?;
        let query = self.text.prepare(query);
        let partial = self.text.partial_ix(&query, e)?;
        let exact = self.text.exact_ix(&query, e)?;
        let topical = (partial + exact) / 2.0;
        let distance = self.distances.approx_distance_ix(u, e)?;
        let social = distance.similarity();
        Ok(SimilarityBreakdown {
            partial,
            exact,
            topical,
            social,
            overall: self.weights.blend(topical, social),
            distance: distance.hops(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Entity, Graph};

    #[test]
    fn float_noise_does_not_break_ties() {
        let r = |id: &str, kind, overall| ScoredResult {
            id: id.into(),
            kind,
            name: String::new(),
            overall,
            topical: 0.0,
            social: 0.0,
        };
        // both are 1/3 reached along different float paths
        let course = r("k1", EntityKind::Course, 0.333_333_333_333_333_37);
        let concept = r("c9", EntityKind::Concept, 0.333_333_333_333_333_31);
        assert_ne!(course.overall, concept.overall);
        assert_eq!(rank_order(&concept, &course), Ordering::Less);
        assert_eq!(rank_order(&course, &concept), Ordering::Greater);
    }

    #[test]
    fn overall_examples() {
        let eq = SimilarityWeights::default();
        assert_eq!(overall_similarity(eq, 1.0, 1.0).unwrap(), 1.0);
        assert!((overall_similarity(eq, 0.6, 0.2).unwrap() - 0.4).abs() < 1e-15);
        let w = SimilarityWeights::new(2.0, 1.0).unwrap();
        assert!((overall_similarity(w, 0.9, 0.0).unwrap() - 0.6).abs() < 1e-15);
        assert!(matches!(
            overall_similarity(eq, 1.2, 0.0),
            Err(EngineError::OutOfRangeInput { .. })
        ));
        assert!(matches!(
            overall_similarity(eq, 0.5, -0.1),
            Err(EngineError::OutOfRangeInput { .. })
        ));
        assert!(SimilarityWeights::new(0.0, 1.0).is_err());
        assert!(SimilarityWeights::new(1.0, f64::NAN).is_err());
    }

    fn fixture() -> Engine {
        let mut g = Graph::new();
        let entities = [
            Entity::new("u1", EntityKind::User, "Vittorio Carmignani").with_field("affiliation", "DTU"),
            Entity::new("u2", EntityKind::User, "Maria Rossi"),
            Entity::new("c1", EntityKind::Concept, "PCA").with_description("principal component analysis"),
            Entity::new("p1", EntityKind::Post, "My notes on PCA"),
            Entity::new("s1", EntityKind::Source, "PCA tutorial video"),
            Entity::new("s2", EntityKind::Source, "Vittorio lecture slides"),
            Entity::new("k1", EntityKind::Course, "Machine learning"),
            Entity::new("o1", EntityKind::Origin, "PCA institute"),
        ];
        for e in entities {
            g.add_entity(e).unwrap();
        }
        for (a, b) in [("u1", "c1"), ("u2", "c1"), ("c1", "p1"), ("c1", "s1"), ("u1", "k1")] {
            g.add_edge(Edge::new(a, b, "includes")).unwrap();
        }
        Engine::build(g.snapshot(), None).unwrap()
    }

    #[test]
    fn search_pca_finds_concept_posts_sources() {
        let engine = fixture();
        let results = engine.search(&"u2".into(), "pca", 25, None).unwrap();
        let ids: Vec<&str> = results.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids[0], "c1");
        assert!(ids.contains(&"p1") && ids.contains(&"s1"));
        // origins are never search results
        assert!(!ids.contains(&"o1"));
        for r in &results {
            let recon = (r.topical + r.social) / 2.0;
            assert!((r.overall - recon).abs() <= 1e-12);
        }
    }

    #[test]
    fn search_tolerates_typos() {
        let engine = fixture();
        let results = engine
            .search(&"u2".into(), "Vittorio Karmignani", 25, None)
            .unwrap();
        assert_eq!(results[0].id.as_str(), "u1");
    }

    #[test]
    fn search_uses_non_name_fields() {
        let engine = fixture();
        let results = engine.search(&"u2".into(), "dtu", 25, None).unwrap();
        assert!(results.iter().any(|r| r.id.as_str() == "u1"));
    }

    #[test]
    fn autocomplete_restricts_kinds() {
        let engine = fixture();
        let results = engine.autocomplete(&"u2".into(), "vitto", 10).unwrap();
        assert!(results.iter().any(|r| r.id.as_str() == "u1"));
        assert!(results.iter().all(|r| QAC_KINDS.contains(&r.kind)));
        assert!(!results.iter().any(|r| r.id.as_str() == "s2"));
        let tutorial = engine.autocomplete(&"u2".into(), "tutorial", 10).unwrap();
        assert!(!tutorial.iter().any(|r| r.id.as_str() == "s1"));
    }

    #[test]
    fn errors() {
        let engine = fixture();
        assert_eq!(
            engine.search(&"c1".into(), "pca", 5, None),
            Err(EngineError::UnknownUser("c1".into()))
        );
        assert_eq!(
            engine.search(&"ghost".into(), "pca", 5, None),
            Err(EngineError::UnknownUser("ghost".into()))
        );
        assert_eq!(engine.search(&"u1".into(), " !? ", 5, None), Err(EngineError::EmptyQuery));
        assert_eq!(engine.autocomplete(&"u1".into(), "", 5), Err(EngineError::EmptyQuery));
        assert_eq!(engine.search(&"u1".into(), "pca", 0, None), Err(EngineError::InvalidLimit));
        assert_eq!(
            engine.search(&"u1".into(), "pca", 5, Some(&[EntityKind::Tag])),
            Err(EngineError::UnsupportedKind(EntityKind::Tag))
        );
    }

    #[test]
    fn kind_filter_and_limit() {
        let engine = fixture();
        let only_sources = engine
            .search(&"u1".into(), "pca", 25, Some(&[EntityKind::Source]))
            .unwrap();
        assert!(!only_sources.is_empty());
        assert!(only_sources.iter().all(|r| r.kind == EntityKind::Source));
        assert_eq!(engine.search(&"u1".into(), "pca", 1, None).unwrap().len(), 1);
    }

    #[test]
    fn closer_entity_wins_ties() {
        let mut g = Graph::new();
        for e in [
            Entity::new("me", EntityKind::User, "Searcher"),
            Entity::new("friend", EntityKind::User, "Hub"),
            Entity::new("near", EntityKind::Concept, "Graph theory"),
            Entity::new("far", EntityKind::Concept, "Graph theory"),
            Entity::new("other", EntityKind::User, "Someone"),
        ] {
            g.add_entity(e).unwrap();
        }
        g.add_edge(Edge::new("me", "near", "includes")).unwrap();
        g.add_edge(Edge::new("other", "far", "includes")).unwrap();
        let engine = Engine::build(g.snapshot(), Some(5)).unwrap();
        let results = engine.search(&"me".into(), "graph theory", 10, None).unwrap();
        // "far" sorts before "near" by id, so only the social term can put
        // "near" first
        assert_eq!(results[0].id.as_str(), "near");
        assert_eq!(results[1].id.as_str(), "far");
        assert_eq!(results[0].social, 0.75);
        assert_eq!(results[1].social, 0.0);
        assert_eq!(results[0].topical, results[1].topical);
    }

    #[test]
    fn explain_matches_search_row() {
        let engine = fixture();
        let results = engine.search(&"u1".into(), "pca", 25, None).unwrap();
        for r in results {
            let b = engine.explain(&"u1".into(), "pca", &r.id).unwrap();
            assert_eq!(b.topical, r.topical);
            assert_eq!(b.social, r.social);
            assert_eq!(b.overall, r.overall);
        }
    }
}

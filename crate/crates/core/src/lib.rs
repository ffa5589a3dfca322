//! Social information retrieval over a typed social graph.
//!
//! Search and autocomplete rank entities by a blend of topical similarity
//! (trigram overlap and tf-idf cosine) and social proximity (landmark
//! approximated hop distance from the searcher). Query suggestions combine a
//! user's recent history with time-windowed popularity. A points ledger
//! drives contributor and responder leaderboards.

pub mod datagen;
pub mod distance;
pub mod engine;
pub mod graph;
pub mod leaderboard;
pub mod stats;
pub mod suggest;
pub mod text;

pub use distance::{CompressionReport, Distance, DistanceError, DistanceIndex};
pub use engine::{Engine, EngineError, ScoredResult, SimilarityBreakdown, SimilarityWeights};
pub use graph::{
    Edge, Entity, EntityId, EntityKind, Graph, GraphError, GraphSnapshot, IngestCounts,
    IngestError, Timestamp,
};
pub use leaderboard::{
    ActionKind, Activity, BoardKind, Ledger, LeaderboardError, LeaderboardView, NewActivity,
    Points, ScoreFilter, TimeWindow, ViewDesign,
};
pub use stats::LatencySummary;
pub use suggest::{QueryLog, QueryLogEntry, SuggestError, Suggestion};
pub use text::{TextError, TextIndex};

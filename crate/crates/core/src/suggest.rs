//! Query suggestions shown before anything is typed: the searcher's own
//! recent queries followed by what is popular across all users inside a
//! recent time window.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EntityId, EntityKind, GraphSnapshot, Timestamp};
use crate::text::normalize;

pub const HISTORY_SLOTS: usize = 5;
pub const TRENDING_SLOTS: usize = 5;
pub const DEFAULT_TRENDING_WINDOW: Timestamp = 7 * 24 * 3600;

#[derive(Debug, Error)]
pub enum SuggestError {
    #[error("unknown user `{0}`")]
    UnknownUser(EntityId),
    #[error("unknown entity `{0}`")]
    UnknownEntity(EntityId),
    #[error("query is empty after normalization")]
    EmptyQuery,
    #[error("timestamp {ts} is older than the last logged entry ({last})")]
    NonMonotonic { ts: Timestamp, last: Timestamp },
    #[error("query log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("query log i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLogEntry {
    pub user: EntityId,
    #[serde(rename = "q")]
    pub raw: String,
    #[serde(rename = "norm")]
    pub normalized: String,
    pub ts: Timestamp,
    #[serde(default)]
    pub clicked: Option<EntityId>,
}

impl QueryLogEntry {
    pub fn new(user: impl Into<EntityId>, raw: impl Into<String>, ts: Timestamp) -> Self {
        let raw = raw.into();
        Self {
            user: user.into(),
            normalized: normalize(&raw),
            raw,
            ts,
            clicked: None,
        }
    }

    pub fn clicked(mut self, entity: impl Into<EntityId>) -> Self {
        self.clicked = Some(entity.into());
        self
    }

    fn payload(&self) -> Payload {
        match &self.clicked {
            Some(id) => Payload::EntityLink { id: id.clone() },
            None => Payload::PastQuery {
                text: self.raw.trim().to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    PastQuery { text: String },
    EntityLink { id: EntityId },
}

impl Payload {
    /// Dedup key: normalised text for queries, the id for entities.
    fn key(&self) -> PayloadKey {
        match self {
            Payload::PastQuery { text } => PayloadKey::Query(normalize(text)),
            Payload::EntityLink { id } => PayloadKey::Entity(id.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum PayloadKey {
    Query(String),
    Entity(EntityId),
}

impl PayloadKey {
    fn text(&self) -> &str {
        match self {
            PayloadKey::Query(q) => q,
            PayloadKey::Entity(id) => id.as_str(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuggestionSource {
    History,
    Trending,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub payload: Payload,
    pub source: SuggestionSource,
    /// Recency (timestamp) for history items, in-window count for trending ones.
    pub score: f64,
}

/// Append-only query log. Appends go through `&mut self`, so a shared log
/// needs an external lock; readers see every completed append.
#[derive(Debug)]
pub struct QueryLog {
    entries: Vec<QueryLogEntry>,
    by_user: HashMap<EntityId, Vec<usize>>,
    window: Timestamp,
    sink: Option<File>,
}

impl Default for QueryLog {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl QueryLog {
    pub fn in_memory() -> Self {
        Self {
            entries: Vec::new(),
            by_user: HashMap::new(),
            window: DEFAULT_TRENDING_WINDOW,
            sink: None,
        }
    }

    /// Opens (or creates) a JSON-lines log, replaying what is already there.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, SuggestError> {
        let path = path.as_ref();
        let mut log = Self::in_memory();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: QueryLogEntry =
                    serde_json::from_str(&line).map_err(|e| SuggestError::Corrupt {
                        line: n + 1,
                        message: e.to_string(),
                    })?;
                log.push(entry);
            }
        }
        log.sink = Some(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(log)
    }

    pub fn with_window(mut self, window: Timestamp) -> Self {
        self.window = window;
        self
    }

    pub fn window(&self) -> Timestamp {
        self.window
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[QueryLogEntry] {
        &self.entries
    }

    pub fn last_timestamp(&self) -> Option<Timestamp> {
        self.entries.last().map(|e| e.ts)
    }

    fn push(&mut self, entry: QueryLogEntry) {
        self.by_user
            .entry(entry.user.clone())
            .or_default()
            .push(self.entries.len());
        self.entries.push(entry);
    }

    pub fn log_query(
        &mut self,
        graph: &GraphSnapshot,
        mut entry: QueryLogEntry,
    ) -> Result<&QueryLogEntry, SuggestError> {
        match graph.get(&entry.user) {
            Some(e) if e.kind == EntityKind::User => {}
            _ => return Err(SuggestError::UnknownUser(entry.user)),
        }
        if let Some(clicked) = &entry.clicked {
            if !graph.contains(clicked) {
                return Err(SuggestError::UnknownEntity(clicked.clone()));
            }
        }
        entry.normalized = normalize(&entry.raw);
        if entry.normalized.is_empty() {
            return Err(SuggestError::EmptyQuery);
        }
        if let Some(last) = self.last_timestamp() {
            if entry.ts < last {
                return Err(SuggestError::NonMonotonic { ts: entry.ts, last });
            }
        }
        if let Some(sink) = &mut self.sink {
            let mut line = serde_json::to_string(&entry).expect("log entries serialize");
            line.push('\n');
            sink.write_all(line.as_bytes())?;
            sink.flush()?;
        }
        self.push(entry);
        Ok(self.entries.last().expect("just pushed"))
    }

    /// Up to five of the user's own recent queries, then up to five trending
    /// items from the window ending at `now` that the history half does not
    /// already show.
    pub fn suggest(
        &self,
        graph: &GraphSnapshot,
        user: &EntityId,
        now: Timestamp,
    ) -> Result<Vec<Suggestion>, SuggestError> {
        match graph.get(user) {
            Some(e) if e.kind == EntityKind::User => {}
            _ => return Err(SuggestError::UnknownUser(user.clone())),
        }

        let mut seen_norms: HashSet<&str> = HashSet::new();
        let mut seen_keys: HashSet<PayloadKey> = HashSet::new();
        let mut out = Vec::with_capacity(HISTORY_SLOTS + TRENDING_SLOTS);
        let own = self.by_user.get(user).map(Vec::as_slice).unwrap_or(&[]);
        for &i in own.iter().rev() {
            if out.len() == HISTORY_SLOTS {
                break;
            }
            let entry = &self.entries[i];
            if entry.ts > now || seen_norms.contains(entry.normalized.as_str()) {
                continue;
            }
            seen_norms.insert(&entry.normalized);
            let payload = entry.payload();
            if !seen_keys.insert(payload.key()) {
                continue;
            }
            out.push(Suggestion {
                payload,
                source: SuggestionSource::History,
                score: entry.ts as f64,
            });
        }

        struct Trend<'a> {
            count: u64,
            last: Timestamp,
            latest: &'a QueryLogEntry,
        }
        let start = self.entries.partition_point(|e| e.ts < now - self.window);
        let mut trends: HashMap<PayloadKey, Trend> = HashMap::new();
        for entry in self.entries[start..].iter().take_while(|e| e.ts <= now) {
            let trend = trends.entry(entry.payload().key()).or_insert(Trend {
                count: 0,
                last: entry.ts,
                latest: entry,
            });
            trend.count += 1;
            if entry.ts >= trend.last {
                trend.last = entry.ts;
                trend.latest = entry;
            }
        }
        let mut ranked: Vec<(PayloadKey, Trend)> = trends
            .into_iter()
            .filter(|(key, _)| {
                !seen_keys.contains(key)
                    && !matches!(key, PayloadKey::Query(q) if seen_norms.contains(q.as_str()))
            })
            .collect();
        ranked.sort_by(|(ka, a), (kb, b)| {
            b.count
                .cmp(&a.count)
                .then(b.last.cmp(&a.last))
                .then_with(|| ka.text().cmp(kb.text()))
                .then_with(|| ka.cmp(kb))
        });
        out.extend(
            ranked
                .into_iter()
                .take(TRENDING_SLOTS)
                .map(|(_, t)| Suggestion {
                    payload: t.latest.payload(),
                    source: SuggestionSource::Trending,
                    score: t.count as f64,
                }),
        );
        Ok(out)
    }
}

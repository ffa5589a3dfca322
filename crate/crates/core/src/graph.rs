//! The typed social graph: entities of eight kinds connected by labelled,
//! directed relationships. Distances and adjacency queries use the
//! undirected projection of every edge.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// UTC epoch seconds.
pub type Timestamp = i64;

/// Dense position of an entity inside a snapshot.
pub type NodeIx = u32;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

impl From<String> for EntityId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// Node kinds of the k-partite graph. The declaration order is also the
/// tie-break order used when ranking results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    User,
    Concept,
    Course,
    Source,
    Post,
    Origin,
    Tag,
    Playlist,
}

impl EntityKind {
    pub const ALL: [EntityKind; 8] = [
        EntityKind::User,
        EntityKind::Concept,
        EntityKind::Course,
        EntityKind::Source,
        EntityKind::Post,
        EntityKind::Origin,
        EntityKind::Tag,
        EntityKind::Playlist,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::User => "user",
            EntityKind::Concept => "concept",
            EntityKind::Course => "course",
            EntityKind::Source => "source",
            EntityKind::Post => "post",
            EntityKind::Origin => "origin",
            EntityKind::Tag => "tag",
            EntityKind::Playlist => "playlist",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityKind {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| GraphError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub kind: EntityKind,
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Additional labelled text fields (affiliation, tags, instructions, ...).
    #[serde(default)]
    pub fields: BTreeMap<String, String>,
    #[serde(default)]
    pub created_at: Timestamp,
}

impl Entity {
    pub fn new(id: impl Into<EntityId>, kind: EntityKind, name: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind,
            name: name.into(),
            description: String::new(),
            fields: BTreeMap::new(),
            created_at: 0,
        }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn with_field(mut self, label: impl Into<String>, text: impl Into<String>) -> Self {
        self.fields.insert(label.into(), text.into());
        self
    }

    pub fn at(mut self, ts: Timestamp) -> Self {
        self.created_at = ts;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: EntityId,
    pub dst: EntityId,
    pub relation: String,
    #[serde(default)]
    pub created_at: Timestamp,
}

impl Edge {
    pub fn new(src: impl Into<EntityId>, dst: impl Into<EntityId>, relation: impl Into<String>) -> Self {
        Self {
            src: src.into(),
            dst: dst.into(),
            relation: relation.into(),
            created_at: 0,
        }
    }

    pub fn at(mut self, ts: Timestamp) -> Self {
        self.created_at = ts;
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("entity id `{0}` already exists")]
    DuplicateId(EntityId),
    #[error("entity `{0}` has an empty name")]
    EmptyName(EntityId),
    #[error("edge endpoint `{0}` does not exist")]
    MissingEndpoint(EntityId),
    #[error("self-loop on `{0}` rejected")]
    SelfLoop(EntityId),
    #[error("edge {src} -[{relation}]-> {dst} already exists")]
    DuplicateEdge {
        src: EntityId,
        dst: EntityId,
        relation: String,
    },
    #[error("unknown entity `{0}`")]
    UnknownId(EntityId),
    #[error("unknown entity kind `{0}`")]
    UnknownKind(String),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read ingest file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: edge references a missing entity: {source}")]
    Referential { line: usize, source: GraphError },
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: GraphError },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestCounts {
    pub entities: usize,
    pub edges: usize,
}

/// One line of the JSON-lines ingest format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "lowercase")]
pub enum IngestRecord {
    Entity {
        id: EntityId,
        kind: EntityKind,
        name: String,
        #[serde(default)]
        description: String,
        #[serde(default)]
        fields: BTreeMap<String, String>,
        #[serde(default)]
        ts: Timestamp,
    },
    Edge {
        src: EntityId,
        dst: EntityId,
        rel: String,
        #[serde(default)]
        ts: Timestamp,
    },
}

impl From<&Entity> for IngestRecord {
    fn from(e: &Entity) -> Self {
        IngestRecord::Entity {
            id: e.id.clone(),
            kind: e.kind,
            name: e.name.clone(),
            description: e.description.clone(),
            fields: e.fields.clone(),
            ts: e.created_at,
        }
    }
}

impl From<&Edge> for IngestRecord {
    fn from(e: &Edge) -> Self {
        IngestRecord::Edge {
            src: e.src.clone(),
            dst: e.dst.clone(),
            rel: e.relation.clone(),
            ts: e.created_at,
        }
    }
}

/// Immutable view of the graph. Cheap to share: readers hold an `Arc`.
#[derive(Debug, Clone, Default)]
pub struct GraphSnapshot {
    entities: Vec<Entity>,
    ids: HashMap<EntityId, NodeIx>,
    adjacency: Vec<BTreeSet<NodeIx>>,
    edges: Vec<Edge>,
    edge_keys: HashSet<(NodeIx, NodeIx, String)>,
    revision: u64,
}

impl GraphSnapshot {
    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Monotone counter bumped by every mutation of the owning [`Graph`].
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn entity(&self, ix: NodeIx) -> &Entity {
        &self.entities[ix as usize]
    }

    pub fn get(&self, id: &EntityId) -> Option<&Entity> {
        self.ix(id).map(|ix| self.entity(ix))
    }

    pub fn ix(&self, id: &EntityId) -> Option<NodeIx> {
        self.ids.get(id).copied()
    }

    pub fn require(&self, id: &EntityId) -> Result<NodeIx, GraphError> {
        self.ix(id).ok_or_else(|| GraphError::UnknownId(id.clone()))
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        self.ids.contains_key(id)
    }

    pub fn degree(&self, ix: NodeIx) -> usize {
        self.adjacency[ix as usize].len()
    }

    /// Undirected neighbour positions (order is by position, not by id).
    pub fn adjacent(&self, ix: NodeIx) -> impl Iterator<Item = NodeIx> + '_ {
        self.adjacency[ix as usize].iter().copied()
    }

    /// Undirected neighbour ids, sorted by id.
    pub fn neighbors(&self, id: &EntityId) -> Result<Vec<EntityId>, GraphError> {
        let ix = self.require(id)?;
        let mut out: Vec<EntityId> = self
            .adjacent(ix)
            .map(|n| self.entity(n).id.clone())
            .collect();
        out.sort();
        Ok(out)
    }

    /// Checks every structural invariant; returns the first violation found.
    pub fn audit(&self) -> Result<(), String> {
        for (ix, adj) in self.adjacency.iter().enumerate() {
            for &n in adj {
                if !self.adjacency[n as usize].contains(&(ix as NodeIx)) {
                    return Err(format!("asymmetric adjacency {ix} -> {n}"));
                }
            }
        }
        for e in &self.edges {
            if !self.contains(&e.src) || !self.contains(&e.dst) {
                return Err(format!("dangling edge {} -> {}", e.src, e.dst));
            }
            if e.src == e.dst {
                return Err(format!("self-loop on {}", e.src));
            }
        }
        if self.edge_keys.len() != self.edges.len() {
            return Err("duplicate edge triples".to_string());
        }
        Ok(())
    }

    /// Serializes the snapshot in the ingest format, entities first.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let records = self
            .entities
            .iter()
            .map(IngestRecord::from)
            .chain(self.edges.iter().map(IngestRecord::from));
        for record in records {
            out.push_str(&serde_json::to_string(&record).expect("ingest records serialize"));
            out.push('\n');
        }
        out
    }

    fn add_entity(&mut self, entity: Entity) -> Result<EntityId, GraphError> {
        if self.ids.contains_key(&entity.id) {
            return Err(GraphError::DuplicateId(entity.id));
        }
        if entity.name.trim().is_empty() {
            return Err(GraphError::EmptyName(entity.id));
        }
        let ix = self.entities.len() as NodeIx;
        let id = entity.id.clone();
        self.ids.insert(id.clone(), ix);
        self.entities.push(entity);
        self.adjacency.push(BTreeSet::new());
        self.revision += 1;
        Ok(id)
    }

    fn add_edge(&mut self, edge: Edge) -> Result<(), GraphError> {
        let src = self
            .ix(&edge.src)
            .ok_or_else(|| GraphError::MissingEndpoint(edge.src.clone()))?;
        let dst = self
            .ix(&edge.dst)
            .ok_or_else(|| GraphError::MissingEndpoint(edge.dst.clone()))?;
        if src == dst {
            return Err(GraphError::SelfLoop(edge.src));
        }
        if !self.edge_keys.insert((src, dst, edge.relation.clone())) {
            return Err(GraphError::DuplicateEdge {
                src: edge.src,
                dst: edge.dst,
                relation: edge.relation,
            });
        }
        self.adjacency[src as usize].insert(dst);
        self.adjacency[dst as usize].insert(src);
        self.edges.push(edge);
        self.revision += 1;
        Ok(())
    }
}

/// Single-writer graph store. Mutations are copy-on-write with respect to
/// outstanding snapshots, so readers never observe a partial update.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    data: Arc<GraphSnapshot>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> Arc<GraphSnapshot> {
        Arc::clone(&self.data)
    }

    pub fn add_entity(&mut self, entity: Entity) -> Result<EntityId, GraphError> {
        Arc::make_mut(&mut self.data).add_entity(entity)
    }

    pub fn add_edge(&mut self, edge: Edge) -> Result<(), GraphError> {
        Arc::make_mut(&mut self.data).add_edge(edge)
    }

    pub fn neighbors(&self, id: &EntityId) -> Result<Vec<EntityId>, GraphError> {
        self.data.neighbors(id)
    }

    pub fn get(&self, id: &EntityId) -> Option<&Entity> {
        self.data.get(id)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.data.edge_count()
    }

    pub fn revision(&self) -> u64 {
        self.data.revision
    }

    /// Loads a JSON-lines file. Either every record is applied or none is.
    pub fn ingest(&mut self, path: impl AsRef<Path>) -> Result<IngestCounts, IngestError> {
        let file = File::open(path)?;
        self.ingest_reader(BufReader::new(file))
    }

    pub fn ingest_reader(&mut self, reader: impl BufRead) -> Result<IngestCounts, IngestError> {
        let mut staged = (*self.data).clone();
        let mut counts = IngestCounts::default();
        for (n, line) in reader.lines().enumerate() {
            let line_no = n + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: IngestRecord =
                serde_json::from_str(&line).map_err(|e| IngestError::Parse {
                    line: line_no,
                    message: e.to_string(),
                })?;
            match record {
                IngestRecord::Entity {
                    id,
                    kind,
                    name,
                    description,
                    fields,
                    ts,
                } => {
                    staged
                        .add_entity(Entity {
                            id,
                            kind,
                            name,
                            description,
                            fields,
                            created_at: ts,
                        })
                        .map_err(|source| IngestError::Invalid {
                            line: line_no,
                            source,
                        })?;
                    counts.entities += 1;
                }
                IngestRecord::Edge { src, dst, rel, ts } => {
                    staged
                        .add_edge(Edge {
                            src,
                            dst,
                            relation: rel,
                            created_at: ts,
                        })
                        .map_err(|source| match source {
                            GraphError::MissingEndpoint(_) => IngestError::Referential {
                                line: line_no,
                                source,
                            },
                            other => IngestError::Invalid {
                                line: line_no,
                                source: other,
                            },
                        })?;
                    counts.edges += 1;
                }
            }
        }
        self.data = Arc::new(staged);
        Ok(counts)
    }
}

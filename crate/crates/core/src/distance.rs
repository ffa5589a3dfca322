//! Landmark-based approximation of hop distance on the undirected graph.
//!
//! A breadth-first traversal from each landmark is truncated at
//! [`CUTOFF`] hops; anything farther is never stored and is treated as
//! unreachable. The distance between two arbitrary nodes is approximated by
//! the best detour through a landmark, `min_l d(u,l) + d(l,e)`, which is an
//! upper bound on the true distance.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EntityId, GraphSnapshot, NodeIx};

/// Farthest hop distance kept in the table.
pub const CUTOFF: u8 = 3;
/// Normalisation constant for user similarity.
pub const MAX_D: f64 = 4.0;

const NO_PATH: u8 = u8::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    Hops(u8),
    Infinite,
}

impl Distance {
    fn from_raw(raw: u8) -> Self {
        if raw <= CUTOFF {
            Distance::Hops(raw)
        } else {
            Distance::Infinite
        }
    }

    pub fn hops(self) -> Option<u8> {
        match self {
            Distance::Hops(h) => Some(h),
            Distance::Infinite => None,
        }
    }

    /// `1 - d / MAX_D`, with unreachable pairs scoring zero.
    pub fn similarity(self) -> f64 {
        match self {
            Distance::Hops(h) => 1.0 - f64::from(h) / MAX_D,
            Distance::Infinite => 0.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DistanceError {
    #[error("cannot build a distance index over an empty graph")]
    EmptyGraph,
    #[error("invalid landmark count {k} for a graph of {entities} entities")]
    InvalidK { k: usize, entities: usize },
    #[error("unknown entity `{0}`")]
    UnknownId(EntityId),
    #[error("distance index was built for a different graph")]
    SnapshotMismatch,
}

/// Nodes within [`CUTOFF`] hops of one landmark, grouped by distance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Ball {
    /// Node positions ordered by (distance, position).
    nodes: Vec<NodeIx>,
    /// `nodes[bounds[d]..bounds[d + 1]]` sit at distance `d`.
    bounds: [u32; CUTOFF as usize + 2],
}

impl Ball {
    fn ring(&self, d: u8) -> &[NodeIx] {
        let d = d as usize;
        &self.nodes[self.bounds[d] as usize..self.bounds[d + 1] as usize]
    }

    fn distance_to(&self, node: NodeIx) -> Option<u8> {
        (0..=CUTOFF).find(|&d| self.ring(d).binary_search(&node).is_ok())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    pub landmarks: usize,
    pub entities: usize,
    pub stored_pairs: u64,
    pub total_pairs: u64,
    pub saving_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceIndex {
    entity_ids: Vec<EntityId>,
    edge_count: usize,
    landmarks: Vec<NodeIx>,
    balls: Vec<Ball>,
}

/// `max(16, ceil(sqrt(n)))`, never more than the graph holds.
pub fn default_landmark_count(entities: usize) -> usize {
    let root = (entities as f64).sqrt().ceil() as usize;
    root.max(16).min(entities)
}

/// Top-`k` nodes by undirected degree, ties broken by ascending id.
pub fn select_landmarks(snapshot: &GraphSnapshot, k: usize) -> Vec<NodeIx> {
    let mut order: Vec<NodeIx> = (0..snapshot.len() as NodeIx).collect();
    order.sort_by(|&a, &b| {
        snapshot
            .degree(b)
            .cmp(&snapshot.degree(a))
            .then_with(|| snapshot.entity(a).id.cmp(&snapshot.entity(b).id))
    });
    order.truncate(k);
    order
}

fn truncated_bfs(snapshot: &GraphSnapshot, root: NodeIx, seen: &mut [u8]) -> Ball {
    let mut rings: Vec<Vec<NodeIx>> = vec![Vec::new(); CUTOFF as usize + 1];
    let mut queue = VecDeque::new();
    let mut touched = vec![root];
    seen[root as usize] = 0;
    queue.push_back(root);
    while let Some(node) = queue.pop_front() {
        let d = seen[node as usize];
        rings[d as usize].push(node);
        if d == CUTOFF {
            continue;
        }
        for next in snapshot.adjacent(node) {
            if seen[next as usize] == NO_PATH {
                seen[next as usize] = d + 1;
                touched.push(next);
                queue.push_back(next);
            }
        }
    }
    for node in touched {
        seen[node as usize] = NO_PATH;
    }

    let mut nodes = Vec::new();
    let mut bounds = [0u32; CUTOFF as usize + 2];
    for (d, mut ring) in rings.into_iter().enumerate() {
        ring.sort_unstable();
        nodes.extend(ring);
        bounds[d + 1] = nodes.len() as u32;
    }
    Ball { nodes, bounds }
}

impl DistanceIndex {
    pub fn build(snapshot: &GraphSnapshot, k: usize) -> Result<Self, DistanceError> {
        if snapshot.is_empty() {
            return Err(DistanceError::EmptyGraph);
        }
        if k == 0 || k > snapshot.len() {
            return Err(DistanceError::InvalidK {
                k,
                entities: snapshot.len(),
            });
        }
        let landmarks = select_landmarks(snapshot, k);
        let mut seen = vec![NO_PATH; snapshot.len()];
        let balls = landmarks
            .iter()
            .map(|&l| truncated_bfs(snapshot, l, &mut seen))
            .collect();
        Ok(Self {
            entity_ids: snapshot.entities().iter().map(|e| e.id.clone()).collect(),
            edge_count: snapshot.edge_count(),
            landmarks,
            balls,
        })
    }

    pub fn build_default(snapshot: &GraphSnapshot) -> Result<Self, DistanceError> {
        Self::build(snapshot, default_landmark_count(snapshot.len()))
    }

    /// True when this index was built from a graph with the same entities
    /// and edge count as `snapshot`.
    pub fn matches(&self, snapshot: &GraphSnapshot) -> bool {
        self.edge_count == snapshot.edge_count()
            && self.entity_ids.len() == snapshot.len()
            && self
                .entity_ids
                .iter()
                .zip(snapshot.entities())
                .all(|(a, b)| *a == b.id)
    }

    pub fn landmark_count(&self) -> usize {
        self.landmarks.len()
    }

    pub fn landmark_ids(&self) -> Vec<EntityId> {
        self.landmarks
            .iter()
            .map(|&l| self.entity_ids[l as usize].clone())
            .collect()
    }

    /// Stored distance from landmark number `slot` to `node`, if within the cutoff.
    pub fn stored(&self, slot: usize, node: NodeIx) -> Option<u8> {
        self.balls.get(slot)?.distance_to(node)
    }

    fn check(&self, node: NodeIx) -> Result<(), DistanceError> {
        if (node as usize) < self.entity_ids.len() {
            Ok(())
        } else {
            Err(DistanceError::UnknownId(EntityId::new(format!("#{node}"))))
        }
    }

    pub fn approx_distance_ix(&self, u: NodeIx, e: NodeIx) -> Result<Distance, DistanceError> {
        self.check(u)?;
        self.check(e)?;
        if u == e {
            return Ok(Distance::Hops(0));
        }
        let best = self
            .balls
            .iter()
            .filter_map(|ball| Some(ball.distance_to(u)? + ball.distance_to(e)?))
            .min()
            .unwrap_or(NO_PATH);
        Ok(Distance::from_raw(best))
    }

    pub fn approx_distance(
        &self,
        snapshot: &GraphSnapshot,
        u: &EntityId,
        e: &EntityId,
    ) -> Result<Distance, DistanceError> {
        let u = snapshot.ix(u).ok_or_else(|| DistanceError::UnknownId(u.clone()))?;
        let e = snapshot.ix(e).ok_or_else(|| DistanceError::UnknownId(e.clone()))?;
        self.approx_distance_ix(u, e)
    }

    pub fn user_similarity(
        &self,
        snapshot: &GraphSnapshot,
        u: &EntityId,
        e: &EntityId,
    ) -> Result<f64, DistanceError> {
        Ok(self.approx_distance(snapshot, u, e)?.similarity())
    }

    /// Approximate distances from `u` to every node at once. Only rings that
    /// can still land within the cutoff are visited.
    pub fn proximity(&self, u: NodeIx) -> Result<Proximity, DistanceError> {
        self.check(u)?;
        let mut dist = vec![NO_PATH; self.entity_ids.len()];
        for ball in &self.balls {
            let Some(to_landmark) = ball.distance_to(u) else {
                continue;
            };
            for d in 0..=(CUTOFF - to_landmark) {
                let total = to_landmark + d;
                for &node in ball.ring(d) {
                    let slot = &mut dist[node as usize];
                    if total < *slot {
                        *slot = total;
                    }
                }
            }
        }
        dist[u as usize] = 0;
        Ok(Proximity { dist })
    }

    pub fn compression_report(&self) -> CompressionReport {
        let stored_pairs: u64 = self.balls.iter().map(|b| b.nodes.len() as u64).sum();
        let total_pairs = (self.landmarks.len() * self.entity_ids.len()) as u64;
        CompressionReport {
            landmarks: self.landmarks.len(),
            entities: self.entity_ids.len(),
            stored_pairs,
            total_pairs,
            saving_ratio: 1.0 - stored_pairs as f64 / total_pairs as f64,
        }
    }
}

/// Approximate distances from one origin to every node.
#[derive(Debug, Clone)]
pub struct Proximity {
    dist: Vec<u8>,
}

impl Proximity {
    pub fn distance(&self, e: NodeIx) -> Distance {
        Distance::from_raw(self.dist[e as usize])
    }

    pub fn similarity(&self, e: NodeIx) -> f64 {
        self.distance(e).similarity()
    }
}

//! Test-only oracles. Everything here is written from the scoring
//! definitions directly (plain BFS, dense vectors, linear scans) and shares
//! no code with the indexed implementations it checks.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sir_core::leaderboard::{ActionKind, Activity, Ledger, NewActivity};
use sir_core::{Edge, Entity, EntityId, EntityKind, Graph, GraphSnapshot, QueryLogEntry, Timestamp};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- graphs

/// Undirected adjacency built straight from the edge list.
pub fn adjacency(snapshot: &GraphSnapshot) -> HashMap<EntityId, Vec<EntityId>> {
    let mut adj: HashMap<EntityId, Vec<EntityId>> = snapshot
        .entities()
        .iter()
        .map(|e| (e.id.clone(), Vec::new()))
        .collect();
    for edge in snapshot.edges() {
        adj.get_mut(&edge.src).unwrap().push(edge.dst.clone());
        adj.get_mut(&edge.dst).unwrap().push(edge.src.clone());
    }
    for list in adj.values_mut() {
        list.sort();
        list.dedup();
    }
    adj
}

/// Exact hop distances from `root` (no cutoff).
pub fn bfs(adj: &HashMap<EntityId, Vec<EntityId>>, root: &EntityId) -> HashMap<EntityId, u32> {
    let mut dist = HashMap::new();
    dist.insert(root.clone(), 0);
    let mut queue = VecDeque::from([root.clone()]);
    while let Some(node) = queue.pop_front() {
        let d = dist[&node];
        for next in &adj[&node] {
            if !dist.contains_key(next) {
                dist.insert(next.clone(), d + 1);
                queue.push_back(next.clone());
            }
        }
    }
    dist
}

/// Landmarks: highest degree first, ties by id.
pub fn oracle_landmarks(snapshot: &GraphSnapshot, k: usize) -> Vec<EntityId> {
    let adj = adjacency(snapshot);
    let mut ids: Vec<&EntityId> = adj.keys().collect();
    ids.sort_by(|a, b| adj[*b].len().cmp(&adj[*a].len()).then(a.cmp(b)));
    ids.into_iter().take(k).cloned().collect()
}

/// `min_l d(u,l) + d(l,e)` over landmark distances capped at 3, with
/// anything above 3 reported as `None`.
pub struct LandmarkOracle {
    from_landmark: Vec<HashMap<EntityId, u32>>,
}

impl LandmarkOracle {
    pub fn new(snapshot: &GraphSnapshot, k: usize) -> Self {
        let adj = adjacency(snapshot);
        let from_landmark = oracle_landmarks(snapshot, k)
            .iter()
            .map(|l| {
                bfs(&adj, l)
                    .into_iter()
                    .filter(|&(_, d)| d <= 3)
                    .collect()
            })
            .collect();
        Self { from_landmark }
    }

    pub fn distance(&self, u: &EntityId, e: &EntityId) -> Option<u32> {
        if u == e {
            return Some(0);
        }
        self.from_landmark
            .iter()
            .filter_map(|t| Some(t.get(u)? + t.get(e)?))
            .min()
            .filter(|&d| d <= 3)
    }

    pub fn similarity(&self, u: &EntityId, e: &EntityId) -> f64 {
        match self.distance(u, e) {
            Some(d) => 1.0 - d as f64 / 4.0,
            None => 0.0,
        }
    }
}

/// Erdős–Rényi style graph with `n` user nodes.
pub fn random_graph(seed: u64, n: usize, edge_prob: f64) -> Graph {
    let mut r = rng(seed);
    let mut g = Graph::new();
    for i in 0..n {
        g.add_entity(Entity::new(format!("n{i:03}").as_str(), EntityKind::User, format!("node {i}")))
            .unwrap();
    }
    for a in 0..n {
        for b in a + 1..n {
            if r.gen_bool(edge_prob) {
                let (src, dst) = if r.gen_bool(0.5) { (a, b) } else { (b, a) };
                g.add_edge(Edge::new(format!("n{src:03}").as_str(), format!("n{dst:03}").as_str(), "knows"))
                    .unwrap();
            }
        }
    }
    g
}

// ---------------------------------------------------------------- text

pub fn oracle_normalize(text: &str) -> String {
    let mapped: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn oracle_grams(text: &str) -> HashSet<String> {
    let norm = oracle_normalize(text);
    if norm.is_empty() {
        return HashSet::new();
    }
    let padded: Vec<char> = format!("^^{norm}$$").chars().collect();
    (0..padded.len() - 2)
        .map(|i| padded[i..i + 3].iter().collect())
        .collect()
}

pub fn oracle_jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn field_union(e: &Entity) -> Vec<(String, f64)> {
    let mut out = vec![(e.name.clone(), 3.0), (e.description.clone(), 1.0)];
    for (label, text) in &e.fields {
        let w = if label.to_lowercase() == "tags" { 2.0 } else { 1.0 };
        out.push((text.clone(), w));
    }
    out
}

fn weighted_tf(e: &Entity) -> HashMap<String, f64> {
    let mut tf = HashMap::new();
    for (text, w) in field_union(e) {
        for tok in oracle_normalize(&text).split_whitespace() {
            *tf.entry(tok.to_string()).or_insert(0.0) += w;
        }
    }
    tf
}

/// One row of a brute-force ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub id: EntityId,
    pub kind: EntityKind,
    pub overall: f64,
    pub topical: f64,
    pub social: f64,
}

/// Scores every entity of the graph from scratch.
pub struct BruteForceScorer {
    entities: Vec<Entity>,
    idf: HashMap<String, f64>,
    tfs: Vec<HashMap<String, f64>>,
    grams: Vec<HashSet<String>>,
    landmarks: LandmarkOracle,
    alpha: f64,
    beta: f64,
}

pub const SEARCHABLE: [EntityKind; 5] = [
    EntityKind::User,
    EntityKind::Concept,
    EntityKind::Course,
    EntityKind::Source,
    EntityKind::Post,
];
pub const COMPLETABLE: [EntityKind; 3] = [EntityKind::User, EntityKind::Concept, EntityKind::Course];

impl BruteForceScorer {
    pub fn new(snapshot: &GraphSnapshot, landmarks: usize) -> Self {
        let entities = snapshot.entities().to_vec();
        let tfs: Vec<HashMap<String, f64>> = entities.iter().map(weighted_tf).collect();
        let n = entities.len() as f64;
        let mut df: HashMap<String, f64> = HashMap::new();
        for tf in &tfs {
            for term in tf.keys() {
                *df.entry(term.clone()).or_insert(0.0) += 1.0;
            }
        }
        let idf = df.into_iter().map(|(t, d)| (t, (n / d).ln())).collect();
        Self {
            grams: entities.iter().map(|e| oracle_grams(&e.name)).collect(),
            landmarks: LandmarkOracle::new(snapshot, landmarks),
            entities,
            idf,
            tfs,
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn with_weights(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    fn cosine(&self, query: &str, i: usize) -> f64 {
        let mut q: HashMap<String, f64> = HashMap::new();
        for tok in oracle_normalize(query).split_whitespace() {
            *q.entry(tok.to_string()).or_insert(0.0) += 1.0;
        }
        let idf = |t: &str| self.idf.get(t).copied().unwrap_or(0.0);
        let qv: HashMap<&str, f64> = q.iter().map(|(t, tf)| (t.as_str(), tf * idf(t))).collect();
        let ev: HashMap<&str, f64> = self.tfs[i]
            .iter()
            .map(|(t, tf)| (t.as_str(), tf * idf(t)))
            .collect();
        let qn = qv.values().map(|w| w * w).sum::<f64>().sqrt();
        let en = ev.values().map(|w| w * w).sum::<f64>().sqrt();
        if qn == 0.0 || en == 0.0 {
            return 0.0;
        }
        let dot: f64 = qv.iter().map(|(t, w)| w * ev.get(t).copied().unwrap_or(0.0)).sum();
        dot / (qn * en)
    }

    pub fn partial(&self, query: &str, i: usize) -> f64 {
        oracle_jaccard(&oracle_grams(query), &self.grams[i])
    }

    fn rank(&self, searcher: &EntityId, kinds: &[EntityKind], topical: impl Fn(usize) -> f64) -> Vec<OracleRow> {
        let mut rows: Vec<OracleRow> = (0..self.entities.len())
            .filter(|&i| kinds.contains(&self.entities[i].kind))
            .filter_map(|i| {
                let st = topical(i);
                if st <= 0.0 {
                    return None;
                }
                let e = &self.entities[i];
                let su = self.landmarks.similarity(searcher, &e.id);
                Some(OracleRow {
                    id: e.id.clone(),
                    kind: e.kind,
                    overall: (self.alpha * st + self.beta * su) / (self.alpha + self.beta),
                    topical: st,
                    social: su,
                })
            })
            .collect();
        // scores equal at 1e-9 resolution count as tied
        rows.sort_by(|a, b| {
            let qa = (a.overall / 1e-9).round() as i64;
            let qb = (b.overall / 1e-9).round() as i64;
            qb.cmp(&qa).then(a.kind.cmp(&b.kind)).then(a.id.cmp(&b.id))
        });
        rows
    }

    pub fn search(&self, searcher: &EntityId, query: &str) -> Vec<OracleRow> {
        self.rank(searcher, &SEARCHABLE, |i| {
            (self.partial(query, i) + self.cosine(query, i)) / 2.0
        })
    }

    pub fn autocomplete(&self, searcher: &EntityId, prefix: &str) -> Vec<OracleRow> {
        self.rank(searcher, &COMPLETABLE, |i| self.partial(prefix, i))
    }
}

const VOCAB: &[&str] = &[
    "pca", "graph", "theory", "linear", "algebra", "neural", "network", "vittorio", "carmignani",
    "maria", "rossi", "dtu", "padua", "entropy", "bayes", "markov", "chain", "tensor", "search",
    "index", "query", "rank", "social", "learning", "deep", "data", "model", "test", "notes",
    "exam",
];

fn phrase(r: &mut ChaCha8Rng, words: usize) -> String {
    (0..words)
        .map(|_| *VOCAB.choose(r).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Random typed graph with a small shared vocabulary so that names collide
/// and scores tie often.
pub fn random_corpus(seed: u64, entities: usize, edges: usize) -> Graph {
    let mut r = rng(seed);
    let mut g = Graph::new();
    let mut ids = Vec::new();
    for i in 0..entities {
        // keep at least one user
        let kind = if i == 0 {
            EntityKind::User
        } else {
            EntityKind::ALL[r.gen_range(0..EntityKind::ALL.len())]
        };
        let id = format!("e{i:04}");
        let name_words = r.gen_range(1..=3);
        let mut e = Entity::new(id.as_str(), kind, phrase(&mut r, name_words));
        if r.gen_bool(0.6) {
            let words = r.gen_range(1..=6);
            e.description = phrase(&mut r, words);
        }
        if r.gen_bool(0.3) {
            let words = r.gen_range(1..=2);
            e.fields.insert("tags".into(), phrase(&mut r, words));
        }
        if r.gen_bool(0.2) {
            e.fields.insert("affiliation".into(), phrase(&mut r, 1).to_uppercase());
        }
        g.add_entity(e).unwrap();
        ids.push(id);
    }
    let mut added = 0;
    let mut tries = 0;
    while added < edges && tries < edges * 20 {
        tries += 1;
        let a = r.gen_range(0..entities);
        let b = r.gen_range(0..entities);
        if g.add_edge(Edge::new(ids[a].as_str(), ids[b].as_str(), "rel")).is_ok() {
            added += 1;
        }
    }
    g
}

/// Queries mixing whole vocabulary words, prefixes and typos.
pub fn random_queries(seed: u64, count: usize) -> Vec<String> {
    let mut r = rng(seed);
    (0..count)
        .map(|i| {
            let words = r.gen_range(1..=2);
            let p = phrase(&mut r, words);
            match i % 3 {
                0 => p,
                1 => p.chars().take(r.gen_range(1..=p.len())).collect(),
                _ => {
                    let mut cs: Vec<char> = p.chars().collect();
                    let at = r.gen_range(0..cs.len());
                    cs[at] = 'x';
                    cs.into_iter().collect()
                }
            }
        })
        .filter(|q| !oracle_normalize(q).is_empty())
        .collect()
}

// ---------------------------------------------------------------- ledger

/// Linear-scan leaderboard scores in tenths over `(after, until]`.
pub fn ledger_scores(
    records: &[Activity],
    context: Option<&EntityId>,
    after: Option<Timestamp>,
    until: Timestamp,
    responder: bool,
    upvote_bonus_tenths: i64,
) -> BTreeMap<EntityId, i64> {
    let mut scores: BTreeMap<EntityId, i64> = BTreeMap::new();
    for r in records {
        let in_window = r.ts <= until && after.map_or(true, |a| r.ts > a);
        let in_context = context.map_or(true, |c| *c == r.location);
        if !in_window || !in_context {
            continue;
        }
        let comment = matches!(r.action, ActionKind::SourceComment | ActionKind::PostComment);
        let upvote = matches!(
            r.action,
            ActionKind::SourceUpvoteComment | ActionKind::PostUpvoteComment
        );
        if !responder {
            *scores.entry(r.actor.clone()).or_default() += r.points.tenths();
        } else if comment {
            *scores.entry(r.actor.clone()).or_default() += r.points.tenths();
        } else if upvote {
            if let Some(t) = r.target {
                let author = records[t as usize].actor.clone();
                let sign = if r.reverts.is_some() { -1 } else { 1 };
                *scores.entry(author).or_default() += sign * upvote_bonus_tenths;
            }
        }
    }
    scores
}

// ---------------------------------------------------------------- suggestions

/// `"q:<normalized text>"` for plain queries, `"e:<id>"` for clicked ones.
pub fn suggestion_key(normalized: &str, clicked: Option<&EntityId>) -> String {
    match clicked {
        Some(id) => format!("e:{}", id.as_str()),
        None => format!("q:{normalized}"),
    }
}

/// Expected `(history keys, trending (key, count))` for `user` at `now`,
/// by scanning every entry.
pub fn suggestion_oracle(
    entries: &[QueryLogEntry],
    user: &EntityId,
    now: Timestamp,
    window: Timestamp,
) -> (Vec<String>, Vec<(String, u64)>) {
    let mut norms = HashSet::new();
    let mut keys = HashSet::new();
    let mut history = Vec::new();
    for e in entries.iter().rev() {
        if history.len() == 5 {
            break;
        }
        if &e.user != user || e.ts > now || !norms.insert(e.normalized.clone()) {
            continue;
        }
        let key = suggestion_key(&e.normalized, e.clicked.as_ref());
        if keys.insert(key.clone()) {
            history.push(key);
        }
    }
    let mut groups: HashMap<String, (u64, Timestamp)> = HashMap::new();
    for e in entries {
        if e.ts < now - window || e.ts > now {
            continue;
        }
        let g = groups
            .entry(suggestion_key(&e.normalized, e.clicked.as_ref()))
            .or_insert((0, e.ts));
        g.0 += 1;
        g.1 = g.1.max(e.ts);
    }
    let mut trending: Vec<(String, u64, Timestamp)> = groups
        .into_iter()
        .filter(|(k, _)| !keys.contains(k) && !k.strip_prefix("q:").is_some_and(|q| norms.contains(q)))
        .map(|(k, (c, last))| (k, c, last))
        .collect();
    trending.sort_by(|a, b| b.1.cmp(&a.1).then(b.2.cmp(&a.2)).then_with(|| a.0[2..].cmp(&b.0[2..])).then_with(|| b.0.cmp(&a.0)));
    (
        history,
        trending.into_iter().take(5).map(|(k, c, _)| (k, c)).collect(),
    )
}

// ---------------------------------------------------------------- ledger fixtures

pub const DAY: Timestamp = 24 * 3600;

/// Users `u00..`, courses `c0..` and sources `s00..` with no edges.
pub fn ledger_graph(users: usize, courses: usize, sources: usize) -> Graph {
    let mut g = Graph::new();
    for i in 0..users {
        g.add_entity(Entity::new(format!("u{i:02}").as_str(), EntityKind::User, format!("User {i}")))
            .unwrap();
    }
    for i in 0..courses {
        g.add_entity(Entity::new(format!("c{i}").as_str(), EntityKind::Course, format!("Course {i}")))
            .unwrap();
    }
    for i in 0..sources {
        g.add_entity(Entity::new(format!("s{i:02}").as_str(), EntityKind::Source, format!("Source {i}")))
            .unwrap();
    }
    g
}

/// `count` ledger records (activities and deletes) over roughly a year ending near `end`, about
/// one in ten deleted later and about one in five upvoting an earlier comment.
pub fn random_ledger(seed: u64, graph: &GraphSnapshot, count: usize, end: Timestamp) -> Ledger {
    let mut r = rng(seed);
    let users: Vec<EntityId> = ids_of(graph, EntityKind::User);
    let mut places = ids_of(graph, EntityKind::Course);
    places.extend(ids_of(graph, EntityKind::Concept));
    let objects = ids_of(graph, EntityKind::Source);
    let mut ledger = Ledger::in_memory();
    let mut comments: Vec<u64> = Vec::new();
    let start = end - 365 * DAY;
    let mut ts = start;
    let mut attempts = 0;
    while ledger.len() < count && attempts < count * 10 {
        attempts += 1;
        ts += r.gen_range(0..(2 * 365 * DAY / count as i64).max(1));
        let actor = users.choose(&mut r).unwrap().clone();
        let location = places.choose(&mut r).unwrap().clone();
        let object = objects.choose(&mut r).unwrap().clone();
        let roll = r.gen_range(0..10);
        if roll == 0 && !ledger.is_empty() {
            let id = r.gen_range(0..ledger.len() as u64);
            let owner = ledger.get(id).unwrap().actor.clone();
            // rejected deletes (already deleted, delete of delete) are fine to skip
            let _ = ledger.record_delete(&owner, id, ts);
            continue;
        }
        let new = if roll <= 2 && !comments.is_empty() {
            let action = if r.gen_bool(0.5) { ActionKind::SourceUpvoteComment } else { ActionKind::PostUpvoteComment };
            NewActivity::new(actor, action, location, object, ts).upvoting(*comments.choose(&mut r).unwrap())
        } else {
            let action = ActionKind::ALL[r.gen_range(0..ActionKind::ALL.len())];
            if action.is_comment_upvote() {
                continue;
            }
            NewActivity::new(actor, action, location, object, ts)
        };
        if let Ok(rec) = ledger.record_activity(graph, new) {
            if rec.action.is_comment() {
                comments.push(rec.id);
            }
        }
    }
    ledger
}

fn ids_of(graph: &GraphSnapshot, kind: EntityKind) -> Vec<EntityId> {
    graph.entities().iter().filter(|e| e.kind == kind).map(|e| e.id.clone()).collect()
}

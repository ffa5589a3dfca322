//! Deterministic synthetic datasets: a hub-heavy social graph in the ingest
//! format, bench query corpora, and a background query log.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::SEARCH_KINDS;
use crate::graph::{EntityId, EntityKind, GraphSnapshot, IngestRecord, Timestamp};
use crate::suggest::QueryLogEntry;
use crate::text::normalize;

/// Entity count of the reference dataset.
pub const REFERENCE_ENTITIES: usize = 5724;
/// Relationship count of the reference dataset.
pub const REFERENCE_RELATIONSHIPS: usize = 21512;

const BASE_TS: Timestamp = 1_600_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DatagenError {
    #[error("{relationships} relationships cannot fit among {entities} entities (at most {max})")]
    InfeasibleCounts {
        entities: usize,
        relationships: usize,
        max: usize,
    },
    #[error("cannot sample from an empty graph")]
    EmptyGraph,
}

const FIRST_NAMES: &[&str] = &[
    "Anna", "Marco", "Sofia", "Lukas", "Emma", "Mads", "Giulia", "Jonas", "Clara", "Nikolaj",
    "Elena", "Oliver", "Freja", "Matteo", "Ida", "Pietro", "Laura", "Anders", "Chiara", "Emil",
    "Sara", "Luca", "Maja", "Davide", "Alma", "Filippo", "Nora", "Kasper", "Irene", "Viktor",
    "Paola", "Henrik", "Marta", "Tobias", "Beatrice", "Mikkel", "Alessia", "Rasmus", "Greta",
    "Nicola",
];

const LAST_NAMES: &[&str] = &[
    "Rossi", "Hansen", "Bianchi", "Jensen", "Ferrari", "Nielsen", "Esposito", "Pedersen",
    "Romano", "Andersen", "Colombo", "Christensen", "Ricci", "Larsen", "Marino", "Sorensen",
    "Greco", "Rasmussen", "Bruno", "Jorgensen", "Gallo", "Petersen", "Conti", "Madsen",
    "De Luca", "Kristensen", "Mancini", "Olsen", "Costa", "Thomsen", "Giordano", "Poulsen",
    "Rizzo", "Johansen", "Lombardi", "Knudsen", "Moretti", "Mortensen", "Barbieri", "Moller",
];

const TOPICS: &[&str] = &[
    "PCA", "Linear Regression", "Logistic Regression", "Neural Networks", "Backpropagation",
    "Gradient Descent", "Support Vector Machines", "Decision Trees", "Random Forests",
    "K-Means Clustering", "Bayesian Inference", "Markov Chains", "Hidden Markov Models",
    "Eigenvalues", "Singular Value Decomposition", "Fourier Transform", "Convolution",
    "Graph Theory", "Dynamic Programming", "Sorting Algorithms", "Hash Tables",
    "Binary Search Trees", "Shortest Paths", "Information Retrieval", "Inverted Index",
    "Tf-Idf", "Cosine Similarity", "Recommender Systems", "Reinforcement Learning",
    "Q-Learning", "Probability Theory", "Central Limit Theorem", "Hypothesis Testing",
    "Entropy", "Cross Validation", "Overfitting", "Regularization", "Dimensionality Reduction",
    "Word Embeddings", "Transformers", "Attention Mechanism", "Relational Algebra",
    "SQL Joins", "Database Normalization", "Operating Systems", "Thermodynamics",
    "Organic Chemistry", "Cell Biology", "Microeconomics", "Game Theory",
];

const QUALIFIERS: &[&str] = &[
    "Introduction to", "Advanced", "Applied", "Foundations of", "Topics in", "Practical",
    "Computational", "Statistical", "Modern", "Elements of",
];

const SOURCE_FORMATS: &[&str] = &[
    "lecture notes", "video tutorial", "slides", "textbook chapter", "exercise set",
    "cheat sheet", "blog article", "paper summary", "worked examples", "podcast episode",
];

const POST_OPENERS: &[&str] = &[
    "Question about", "My notes on", "Struggling with", "Great resource for", "Summary of",
    "Exam tips for", "Intuition behind", "Study group for", "Visual guide to", "Mistakes in",
];

const ORIGINS: &[&str] = &[
    "DTU", "University of Padua", "University of Copenhagen", "Politecnico di Milano",
    "Aarhus University", "University of Bologna", "KU Leuven", "ETH Zurich", "TU Delft",
    "Sapienza University of Rome",
];

const TAG_WORDS: &[&str] = &[
    "math", "statistics", "programming", "exam", "beginner", "theory", "visual", "python",
    "proofs", "review",
];

fn kind_prefix(kind: EntityKind) -> &'static str {
    match kind {
        EntityKind::User => "u",
        EntityKind::Concept => "c",
        EntityKind::Course => "k",
        EntityKind::Source => "s",
        EntityKind::Post => "p",
        EntityKind::Origin => "o",
        EntityKind::Tag => "t",
        EntityKind::Playlist => "l",
    }
}

/// Entity counts per kind: 40% users, 20% posts, 15% sources, 15% concepts,
/// 8% courses and 2% split across origins, tags and playlists.
pub fn kind_mix(entities: usize) -> BTreeMap<EntityKind, usize> {
    let share = |pct: usize| entities * pct / 100;
    let misc = share(2);
    let mut mix = BTreeMap::new();
    mix.insert(EntityKind::Post, share(20));
    mix.insert(EntityKind::Source, share(15));
    mix.insert(EntityKind::Concept, share(15));
    mix.insert(EntityKind::Course, share(8));
    mix.insert(EntityKind::Tag, misc / 3);
    mix.insert(EntityKind::Playlist, misc / 3);
    mix.insert(EntityKind::Origin, misc - 2 * (misc / 3));
    let taken: usize = mix.values().sum();
    mix.insert(EntityKind::User, entities - taken);
    mix
}

fn relation(src: EntityKind, dst: EntityKind) -> &'static str {
    use EntityKind::*;
    match (src, dst) {
        (User, User | Concept | Course) => "includes",
        (User, Source) => "shared",
        (User, Post) => "authored",
        (User, Origin) => "affiliated_with",
        (User, Playlist) => "created",
        (Source | Post, Tag) => "tagged_with",
        (Source | Post, Concept | Course) => "posted_in",
        (Playlist, Source) => "contains",
        (Course, Origin) => "offered_by",
        (Course, Concept) => "covers",
        _ => "related_to",
    }
}

fn entity_record(
    rng: &mut ChaCha8Rng,
    kind: EntityKind,
    ordinal: usize,
    ts: Timestamp,
) -> IngestRecord {
    let id = EntityId::new(format!("{}{ordinal:05}", kind_prefix(kind)));
    let pick = |rng: &mut ChaCha8Rng, words: &[&'static str]| *words.choose(rng).expect("non-empty");
    let mut fields = BTreeMap::new();
    let mut description = String::new();
    let name = match kind {
        EntityKind::User if ordinal == 0 => {
            fields.insert("affiliation".to_string(), "DTU".to_string());
            "Vittorio Carmignani".to_string()
        }
        EntityKind::User => {
            fields.insert("affiliation".to_string(), pick(rng, ORIGINS).to_string());
            format!("{} {}", pick(rng, FIRST_NAMES), pick(rng, LAST_NAMES))
        }
        EntityKind::Concept if ordinal < TOPICS.len() => {
            description = format!("Learning space for {}", TOPICS[ordinal]);
            TOPICS[ordinal].to_string()
        }
        EntityKind::Concept => {
            let topic = pick(rng, TOPICS);
            description = format!("Learning space for {topic}");
            format!("{} {topic}", pick(rng, QUALIFIERS))
        }
        EntityKind::Course => {
            let topic = pick(rng, TOPICS);
            let origin = pick(rng, ORIGINS);
            fields.insert("affiliation".to_string(), origin.to_string());
            description = format!("{topic} course held at {origin}");
            format!("{} {topic}", pick(rng, QUALIFIERS))
        }
        EntityKind::Source => {
            let topic = pick(rng, TOPICS);
            fields.insert("tags".to_string(), format!("{} {}", pick(rng, TAG_WORDS), pick(rng, TAG_WORDS)));
            description = format!("A {} covering {topic}", pick(rng, SOURCE_FORMATS));
            format!("{topic} {}", pick(rng, SOURCE_FORMATS))
        }
        EntityKind::Post => {
            let topic = pick(rng, TOPICS);
            fields.insert("tags".to_string(), pick(rng, TAG_WORDS).to_string());
            description = format!("Discussion thread about {topic}");
            format!("{} {topic}", pick(rng, POST_OPENERS))
        }
        EntityKind::Origin => ORIGINS[ordinal % ORIGINS.len()].to_string(),
        EntityKind::Tag => TAG_WORDS[ordinal % TAG_WORDS.len()].to_string(),
        EntityKind::Playlist => format!("{} favourites", pick(rng, TOPICS)),
    };
    IngestRecord::Entity {
        id,
        kind,
        name,
        description,
        fields,
        ts,
    }
}

/// Generates a graph in the ingest format. The output is a pure function of
/// the arguments; at most one relationship joins any pair of entities.
pub fn generate_dataset(
    seed: u64,
    entities: usize,
    relationships: usize,
) -> Result<String, DatagenError> {
    let max = entities.saturating_mul(entities.saturating_sub(1)) / 2;
    if relationships > max {
        return Err(DatagenError::InfeasibleCounts {
            entities,
            relationships,
            max,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(entities + relationships);
    let mut ids = Vec::with_capacity(entities);
    let mut kinds = Vec::with_capacity(entities);
    for (kind, count) in kind_mix(entities) {
        for ordinal in 0..count {
            let ts = BASE_TS + (records.len() as Timestamp) * 37;
            let record = entity_record(&mut rng, kind, ordinal, ts);
            if let IngestRecord::Entity { id, .. } = &record {
                ids.push(id.clone());
            }
            kinds.push(kind);
            records.push(record);
        }
    }
    // shuffle so ids of every kind interleave in the file order
    let mut order: Vec<usize> = (0..entities).collect();
    order.shuffle(&mut rng);
    let records: Vec<IngestRecord> = {
        let mut slots: Vec<Option<IngestRecord>> = records.into_iter().map(Some).collect();
        order.iter().map(|&i| slots[i].take().expect("each slot once")).collect()
    };
    let ids: Vec<EntityId> = order.iter().map(|&i| ids[i].clone()).collect();
    let kinds: Vec<EntityKind> = order.iter().map(|&i| kinds[i]).collect();

    let mut out = String::new();
    for record in &records {
        out.push_str(&serde_json::to_string(record).expect("records serialize"));
        out.push('\n');
    }

    // Preferential attachment: one endpoint uniform, the other drawn in
    // proportion to degree + 1.
    let mut pool: Vec<usize> = (0..entities).collect();
    let mut pairs: HashSet<(usize, usize)> = HashSet::with_capacity(relationships);
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(relationships);
    let mut attempts = 0usize;
    let budget = relationships.saturating_mul(50) + 1000;
    while edges.len() < relationships && attempts < budget {
        attempts += 1;
        let a = rng.gen_range(0..entities);
        let b = pool[rng.gen_range(0..pool.len())];
        if a == b || !pairs.insert((a.min(b), a.max(b))) {
            continue;
        }
        pool.push(a);
        pool.push(b);
        edges.push((a, b));
    }
    if edges.len() < relationships {
        let mut rest: Vec<(usize, usize)> = (0..entities)
            .flat_map(|a| (a + 1..entities).map(move |b| (a, b)))
            .filter(|p| !pairs.contains(p))
            .collect();
        rest.shuffle(&mut rng);
        edges.extend(rest.into_iter().take(relationships - edges.len()));
    }
    for (j, &(a, b)) in edges.iter().enumerate() {
        // orient user-initiated relationships from the user side
        let (src, dst) = if kinds[b] == EntityKind::User && kinds[a] != EntityKind::User {
            (b, a)
        } else {
            (a, b)
        };
        let record = IngestRecord::Edge {
            src: ids[src].clone(),
            dst: ids[dst].clone(),
            rel: relation(kinds[src], kinds[dst]).to_string(),
            ts: BASE_TS + 10_000_000 + j as Timestamp * 11,
        };
        out.push_str(&serde_json::to_string(&record).expect("records serialize"));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_dataset(
    path: impl AsRef<Path>,
    seed: u64,
    entities: usize,
    relationships: usize,
) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    fs::write(path, generate_dataset(seed, entities, relationships)?)?;
    Ok(())
}

fn with_typo(rng: &mut ChaCha8Rng, text: &str) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    let letters: Vec<usize> = (0..chars.len()).filter(|&i| chars[i].is_alphabetic()).collect();
    if let Some(&i) = letters.choose(rng) {
        let replacement = (b'a' + rng.gen_range(0..26u8)) as char;
        chars[i] = if replacement == chars[i].to_ascii_lowercase() {
            if replacement == 'z' { 'a' } else { (replacement as u8 + 1) as char }
        } else {
            replacement
        };
    }
    chars.into_iter().collect()
}

/// Bench queries drawn from searchable entity names: whole names, prefixes
/// of at least three characters, and names with one substituted letter.
pub fn sample_queries(
    snapshot: &GraphSnapshot,
    seed: u64,
    count: usize,
) -> Result<Vec<String>, DatagenError> {
    let names: Vec<&str> = snapshot
        .entities()
        .iter()
        .filter(|e| SEARCH_KINDS.contains(&e.kind))
        .map(|e| e.name.as_str())
        .collect();
    if names.is_empty() {
        return Err(DatagenError::EmptyGraph);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let name = names[rng.gen_range(0..names.len())];
        let query = match out.len() % 3 {
            0 => name.to_string(),
            1 => {
                let chars: Vec<char> = name.chars().collect();
                let len = rng.gen_range(3.min(chars.len())..=chars.len());
                chars[..len].iter().collect()
            }
            _ => with_typo(&mut rng, name),
        };
        if !normalize(&query).is_empty() {
            out.push(query);
        }
    }
    Ok(out)
}

/// A background query log spread evenly over the `span` seconds ending at
/// `end`, with roughly one click in four.
pub fn synthetic_query_log(
    snapshot: &GraphSnapshot,
    seed: u64,
    entries: usize,
    end: Timestamp,
    span: Timestamp,
) -> Result<Vec<QueryLogEntry>, DatagenError> {
    let users: Vec<&EntityId> = snapshot
        .entities()
        .iter()
        .filter(|e| e.kind == EntityKind::User)
        .map(|e| &e.id)
        .collect();
    let targets: Vec<&EntityId> = snapshot
        .entities()
        .iter()
        .filter(|e| SEARCH_KINDS.contains(&e.kind))
        .map(|e| &e.id)
        .collect();
    if users.is_empty() || targets.is_empty() {
        return Err(DatagenError::EmptyGraph);
    }
    // a small popular vocabulary makes trending meaningful
    let vocabulary = sample_queries(snapshot, seed ^ 0x9e37_79b9, 200)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = if entries == 0 { 0 } else { span / entries as Timestamp };
    let start = end - step * entries as Timestamp;
    Ok((0..entries)
        .map(|i| {
            let user = users[rng.gen_range(0..users.len())].clone();
            // squaring skews the pick toward the head of the vocabulary
            let skew: f64 = rng.gen::<f64>().powi(2);
            let raw = vocabulary[(skew * vocabulary.len() as f64) as usize].clone();
            let mut entry = QueryLogEntry::new(user, raw, start + step * i as Timestamp);
            if rng.gen_ratio(1, 4) {
                entry.clicked = Some(targets[rng.gen_range(0..targets.len())].clone());
            }
            entry
        })
        .collect())
}

use std::fs;
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard, PoisonError, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use sir_core::{DistanceIndex, Engine, Graph, Ledger, QueryLog, TextIndex, Timestamp};

use crate::config::ServiceConfig;
use crate::request_log::RequestLog;
use crate::ServiceError;

/// Source of "now" in seconds. Tests pin it.
pub type Clock = Arc<dyn Fn() -> Timestamp + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs() as Timestamp)
            .unwrap_or(0)
    })
}

/// Shared service state. Readers clone the engine `Arc` and drop the lock
/// before scoring, so a reload never blocks behind a slow search.
pub struct AppState {
    engine: RwLock<Arc<Engine>>,
    pub(crate) queries: Mutex<QueryLog>,
    pub(crate) ledger: Mutex<Ledger>,
    pub(crate) requests: Mutex<RequestLog>,
    pub(crate) clock: Clock,
    pub(crate) config: ServiceConfig,
}

fn data_error(path: &Path, err: impl ToString) -> ServiceError {
    ServiceError::DataLoad {
        path: path.to_path_buf(),
        message: err.to_string(),
    }
}

/// Ingests the graph file and builds (or loads a matching) engine.
pub fn load_engine(config: &ServiceConfig) -> Result<Engine, ServiceError> {
    let graph_path = config.graph_path();
    let mut graph = Graph::new();
    graph.ingest(&graph_path).map_err(|e| data_error(&graph_path, e))?;
    let snapshot = graph.snapshot();

    let index_path = config.distance_index_path();
    let stored = fs::read_to_string(&index_path)
        .ok()
        .and_then(|text| serde_json::from_str::<DistanceIndex>(&text).ok())
        .filter(|idx| idx.matches(&snapshot))
        .filter(|idx| config.landmarks.is_none_or(|k| idx.landmark_count() == k));
    match stored {
        Some(distances) => {
            let text = TextIndex::build(&snapshot).map_err(|e| data_error(&graph_path, e))?;
            Engine::from_parts(snapshot, text, distances).map_err(|e| data_error(&index_path, e))
        }
        None => Engine::build(snapshot, config.landmarks).map_err(|e| data_error(&graph_path, e)),
    }
}

impl AppState {
    pub fn new(engine: Engine, queries: QueryLog, ledger: Ledger, requests: RequestLog, config: ServiceConfig) -> Self {
        Self {
            engine: RwLock::new(Arc::new(engine)),
            queries: Mutex::new(queries),
            ledger: Mutex::new(ledger),
            requests: Mutex::new(requests),
            clock: system_clock(),
            config,
        }
    }

    /// Opens every data file named by `config`.
    pub fn load(config: ServiceConfig) -> Result<Self, ServiceError> {
        let engine = load_engine(&config)?;
        let qpath = config.query_log_path();
        let queries = QueryLog::open(&qpath)
            .map_err(|e| data_error(&qpath, e))?
            .with_window(config.trending_window);
        let lpath = config.ledger_path();
        let ledger = Ledger::open(&lpath).map_err(|e| data_error(&lpath, e))?;
        let requests = match &config.request_log {
            Some(path) => RequestLog::to_file(path).map_err(|e| data_error(path, e))?,
            None => RequestLog::in_memory(),
        };
        Ok(Self::new(engine, queries, ledger, requests, config))
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn now(&self) -> Timestamp {
        (self.clock)()
    }

    pub fn engine(&self) -> Arc<Engine> {
        Arc::clone(&self.engine.read().unwrap_or_else(PoisonError::into_inner))
    }

    pub fn replace_engine(&self, engine: Engine) {
        *self.engine.write().unwrap_or_else(PoisonError::into_inner) = Arc::new(engine);
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn requests(&self) -> MutexGuard<'_, RequestLog> {
        lock(&self.requests)
    }

    pub fn queries(&self) -> MutexGuard<'_, QueryLog> {
        lock(&self.queries)
    }

    pub fn ledger(&self) -> MutexGuard<'_, Ledger> {
        lock(&self.ledger)
    }
}

pub(crate) fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(PoisonError::into_inner)
}

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use sir_bench::{run_bench, BenchError, BenchPlan, Endpoint, Workload};
use sir_core::datagen::{generate_dataset, synthetic_query_log, DatagenError};
use sir_core::leaderboard::ActivityId;
use sir_core::{
    BoardKind, DistanceError, DistanceIndex, EngineError, EntityId, EntityKind, Graph, GraphError,
    IngestError, LeaderboardError, Ledger, NewActivity, QueryLog, QueryLogEntry, ScoreFilter,
    SuggestError, Timestamp, TimeWindow, ViewDesign,
};
use sir_service::state::load_engine;
use sir_service::{ServiceConfig, ServiceError};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "sir", version, about = "Social search, suggestions and leaderboards")]
struct Cli {
    /// Config file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory with graph.jsonl, queries.jsonl, ledger.jsonl and distance_index.json.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Merge a JSON-lines graph file into the data directory.
    Ingest { file: PathBuf },
    #[command(subcommand)]
    Index(IndexCommand),
    /// Ranked search over users, concepts, courses, sources and posts.
    Search {
        #[arg(long)]
        user: String,
        #[arg(long)]
        q: String,
        #[arg(long)]
        limit: Option<usize>,
        /// Comma-separated kinds to keep.
        #[arg(long)]
        kinds: Option<String>,
        /// Do not record the query for suggestions.
        #[arg(long)]
        no_log: bool,
    },
    /// Autocomplete over users, concepts and courses.
    Qac {
        #[arg(long)]
        user: String,
        #[arg(long)]
        q: String,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Query suggestions for an empty search box.
    Qs {
        #[arg(long)]
        user: String,
        #[arg(long)]
        now: Option<Timestamp>,
    },
    #[command(subcommand)]
    Activity(ActivityCommand),
    #[command(subcommand)]
    Leaderboard(LeaderboardCommand),
    /// Run the HTTP service.
    Serve,
    #[command(subcommand)]
    Bench(BenchCommand),
    #[command(subcommand)]
    Debug(DebugCommand),
}

#[derive(Debug, Subcommand)]
enum IndexCommand {
    /// Build and store the landmark distance index.
    Build {
        #[arg(long)]
        landmarks: Option<usize>,
    },
    /// Storage figures for the stored index.
    Report,
}

#[derive(Debug, Subcommand)]
enum ActivityCommand {
    Record {
        #[arg(long)]
        actor: String,
        #[arg(long)]
        action: String,
        #[arg(long)]
        location: String,
        #[arg(long)]
        object: String,
        #[arg(long)]
        ts: Option<Timestamp>,
        /// Comment activity id, for comment upvotes.
        #[arg(long)]
        target: Option<ActivityId>,
    },
    Delete {
        #[arg(long)]
        actor: String,
        #[arg(long)]
        id: ActivityId,
        #[arg(long)]
        ts: Option<Timestamp>,
    },
}

#[derive(Debug, Subcommand)]
enum LeaderboardCommand {
    Show(ShowArgs),
}

#[derive(Debug, Args)]
struct ShowArgs {
    #[arg(long)]
    user: String,
    #[arg(long)]
    context: Option<String>,
    #[arg(long, default_value = "all_time")]
    window: String,
    #[arg(long, default_value = "contributor")]
    kind: String,
    #[arg(long)]
    design: Option<String>,
    #[arg(long)]
    now: Option<Timestamp>,
}

#[derive(Debug, Subcommand)]
enum BenchCommand {
    /// Write a synthetic graph (and optionally a query log).
    Gen {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = sir_core::datagen::REFERENCE_ENTITIES)]
        entities: usize,
        #[arg(long, default_value_t = sir_core::datagen::REFERENCE_RELATIONSHIPS)]
        relationships: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        query_log: Option<PathBuf>,
        #[arg(long, default_value_t = 20_000)]
        log_entries: usize,
    },
    /// Load-test a running service.
    Run {
        #[arg(long)]
        endpoint: String,
        #[arg(long, default_value_t = sir_bench::DEFAULT_TOTAL)]
        total: usize,
        /// Comma-separated client counts.
        #[arg(long, default_value = "1,2,4,8,16,32,64")]
        levels: String,
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        target: String,
        /// Output prefix; writes `<out>.csv` and `<out>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Debug, Subcommand)]
enum DebugCommand {
    /// Every score component for one entity.
    Sim {
        #[arg(long)]
        q: String,
        #[arg(long)]
        entity: String,
        #[arg(long)]
        user: String,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Suggest(#[from] SuggestError),
    #[error(transparent)]
    Leaderboard(#[from] LeaderboardError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Input(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Ingest(_) => "ingest",
            CliError::Graph(_) => "graph",
            CliError::Distance(_) => "distance",
            CliError::Engine(_) => "engine",
            CliError::Suggest(_) => "suggest",
            CliError::Leaderboard(_) => "leaderboard",
            CliError::Service(_) => "service",
            CliError::Bench(_) => "bench",
            CliError::Datagen(_) => "datagen",
            CliError::Io { .. } => "io",
            CliError::Input(_) => "input",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn now() -> Timestamp {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as Timestamp)
        .unwrap_or(0)
}

struct Out {
    json: bool,
}

impl Out {
    fn emit(&self, value: &Value, text: impl FnOnce() -> String) {
        if self.json {
            println!("{}", serde_json::to_string_pretty(value).expect("values serialize"));
        } else {
            println!("{}", text());
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = json!({"error": {"kind": e.kind(), "message": e.to_string()}});
            eprintln!("{body}");
            ExitCode::from(1)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ServiceConfig, CliError> {
    let mut config = ServiceConfig::load(cli.config.as_deref()).map_err(ServiceError::from)?;
    if let Some(dir) = &cli.data_dir {
        config.data_dir = dir.clone();
    }
    Ok(config)
}

fn load_graph(config: &ServiceConfig) -> Result<Graph, CliError> {
    let mut graph = Graph::new();
    let path = config.graph_path();
    if path.exists() {
        graph.ingest(&path)?;
    }
    Ok(graph)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = load_config(&cli)?;
    let out = Out { json: cli.json };
    match cli.command {
        Command::Ingest { file } => {
            let mut graph = load_graph(&config)?;
            let counts = graph.ingest(&file)?;
            fs::create_dir_all(&config.data_dir).map_err(io_err(&config.data_dir))?;
            let path = config.graph_path();
            fs::write(&path, graph.snapshot().to_jsonl()).map_err(io_err(&path))?;
            out.emit(
                &json!({"added": counts, "entities": graph.len(), "relationships": graph.edge_count()}),
                || {
                    format!(
                        "added {} entities and {} relationships; graph now has {} entities and {} relationships",
                        counts.entities,
                        counts.edges,
                        graph.len(),
                        graph.edge_count()
                    )
                },
            );
        }
        Command::Index(IndexCommand::Build { landmarks }) => {
            let snapshot = load_graph(&config)?.snapshot();
            let index = match landmarks.or(config.landmarks) {
                Some(k) => DistanceIndex::build(&snapshot, k)?,
                None => DistanceIndex::build_default(&snapshot)?,
            };
            let path = config.distance_index_path();
            fs::write(&path, serde_json::to_string(&index).expect("index serializes")).map_err(io_err(&path))?;
            print_report(&out, &index);
        }
        Command::Index(IndexCommand::Report) => {
            let path = config.distance_index_path();
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let index: DistanceIndex =
                serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            print_report(&out, &index);
        }
        Command::Search {
            user,
            q,
            limit,
            kinds,
            no_log,
        } => {
            let engine = load_engine(&config)?;
            let kinds = kinds
                .map(|k| {
                    k.split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| s.trim().parse::<EntityKind>())
                        .collect::<Result<Vec<_>, _>>()
                })
                .transpose()?;
            let user = EntityId::from(user);
            let results = engine.search(&user, &q, limit.unwrap_or(config.search_limit), kinds.as_deref())?;
            if !no_log {
                let mut log = QueryLog::open(config.query_log_path())?;
                let ts = log.last_timestamp().map_or(now(), |last| last.max(now()));
                log.log_query(engine.snapshot(), QueryLogEntry::new(user.clone(), q.clone(), ts))?;
            }
            print_results(&out, &json!({"user": user, "q": q, "results": results}));
        }
        Command::Qac { user, q, limit } => {
            let engine = load_engine(&config)?;
            let user = EntityId::from(user);
            let results = engine.autocomplete(&user, &q, limit.unwrap_or(config.qac_limit))?;
            print_results(&out, &json!({"user": user, "q": q, "results": results}));
        }
        Command::Qs { user, now: at } => {
            let snapshot = load_graph(&config)?.snapshot();
            let log = QueryLog::open(config.query_log_path())?.with_window(config.trending_window);
            let at = at.unwrap_or_else(now);
            let suggestions = log.suggest(&snapshot, &EntityId::from(user.clone()), at)?;
            let value = json!({"user": user, "now": at, "suggestions": suggestions});
            out.emit(&value, || {
                value["suggestions"]
                    .as_array()
                    .into_iter()
                    .flatten()
                    .map(|s| {
                        let p = &s["payload"];
                        let shown = p.get("text").or_else(|| p.get("id")).cloned().unwrap_or_default();
                        format!("[{}] {} ({})", s["source"].as_str().unwrap_or(""), shown, s["score"])
                    })
                    .collect::<Vec<_>>()
                    .join("\n")
            });
        }
        Command::Activity(cmd) => {
            let snapshot = load_graph(&config)?.snapshot();
            let mut ledger = Ledger::open(config.ledger_path())?;
            let record = match cmd {
                ActivityCommand::Record {
                    actor,
                    action,
                    location,
                    object,
                    ts,
                    target,
                } => {
                    let mut new = NewActivity::new(actor, action.parse()?, location, object, ts.unwrap_or_else(now));
                    if let Some(t) = target {
                        new = new.upvoting(t);
                    }
                    ledger.record_activity(&snapshot, new)?.clone()
                }
                ActivityCommand::Delete { actor, id, ts } => ledger
                    .record_delete(&EntityId::from(actor), id, ts.unwrap_or_else(now))?
                    .clone(),
            };
            let value = serde_json::to_value(&record).expect("activities serialize");
            out.emit(&value, || {
                format!(
                    "#{} {} {} at {} ({} points)",
                    record.id,
                    record.actor,
                    record.action.as_str(),
                    record.location,
                    record.points
                )
            });
        }
        Command::Leaderboard(LeaderboardCommand::Show(args)) => {
            let snapshot = load_graph(&config)?.snapshot();
            let ledger = Ledger::open(config.ledger_path())?;
            let context = args.context.map(EntityId::from);
            let design = match (&args.design, &context) {
                (Some(d), _) => d.parse()?,
                (None, Some(c)) => ViewDesign::default_for(
                    snapshot
                        .get(c)
                        .ok_or_else(|| LeaderboardError::UnknownEntity(c.clone()))?
                        .kind,
                ),
                (None, None) => ViewDesign::HybridAbsolute,
            };
            let window: TimeWindow = args.window.parse()?;
            let kind: BoardKind = args.kind.parse()?;
            let filter = ScoreFilter::new(context, window, kind, args.now.unwrap_or_else(now));
            let view = ledger.build_view(&snapshot, &filter, &EntityId::from(args.user), design)?;
            let value = serde_json::to_value(&view).expect("views serialize");
            out.emit(&value, || {
                let mut lines = vec![format!("{kind} / {window} / {design} ({} ranked)", view.ranked)];
                for row in &view.rows {
                    let mark = if row.active { " <" } else { "" };
                    lines.push(format!("{:>4}. {:<24} {:>8}{mark}", row.rank, row.name, row.score));
                }
                lines.join("\n")
            });
        }
        Command::Serve => {
            let runtime = tokio::runtime::Runtime::new().map_err(io_err(Path::new("tokio runtime")))?;
            eprintln!("listening on {}:{}", config.host, config.port);
            runtime.block_on(sir_service::run(config))?;
        }
        Command::Bench(BenchCommand::Gen {
            seed,
            entities,
            relationships,
            out: path,
            query_log,
            log_entries,
        }) => {
            let text = generate_dataset(seed, entities, relationships)?;
            fs::write(&path, &text).map_err(io_err(&path))?;
            let mut logged = 0;
            if let Some(log_path) = query_log {
                let mut graph = Graph::new();
                graph.ingest(&path)?;
                let entries = synthetic_query_log(&graph.snapshot(), seed, log_entries, now(), 30 * 24 * 3600)?;
                let mut file = fs::File::create(&log_path).map_err(io_err(&log_path))?;
                for entry in &entries {
                    let line = serde_json::to_string(entry).expect("entries serialize");
                    writeln!(file, "{line}").map_err(io_err(&log_path))?;
                }
                logged = entries.len();
            }
            out.emit(
                &json!({"seed": seed, "entities": entities, "relationships": relationships, "query_log_entries": logged}),
                || format!("wrote {entities} entities, {relationships} relationships, {logged} logged queries"),
            );
        }
        Command::Bench(BenchCommand::Run {
            endpoint,
            total,
            levels,
            target,
            out: prefix,
            seed,
        }) => {
            let endpoint: Endpoint = endpoint.parse()?;
            let levels = levels
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|_| CliError::Input(format!("bad level `{s}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            let snapshot = load_graph(&config)?.snapshot();
            let workload = Workload::from_snapshot(&snapshot, seed, 500)?;
            let plan = BenchPlan {
                endpoint,
                total,
                levels,
            };
            let runtime = tokio::runtime::Runtime::new().map_err(io_err(Path::new("tokio runtime")))?;
            let report = runtime.block_on(run_bench(&target, &plan, &workload))?;
            let csv = report.to_csv();
            let value = serde_json::to_value(&report).expect("reports serialize");
            if let Some(prefix) = prefix {
                let csv_path = prefix.with_extension("csv");
                fs::write(&csv_path, &csv).map_err(io_err(&csv_path))?;
                let json_path = prefix.with_extension("json");
                let body = serde_json::to_string_pretty(&value).expect("reports serialize");
                fs::write(&json_path, body).map_err(io_err(&json_path))?;
            }
            out.emit(&value, || csv.trim_end().to_string());
            report.check()?;
        }
        Command::Debug(DebugCommand::Sim { q, entity, user }) => {
            let engine = load_engine(&config)?;
            let b = engine.explain(&EntityId::from(user), &q, &EntityId::from(entity))?;
            let value = json!(b);
            out.emit(&value, || {
                format!(
                    "partial {:.6}\nexact   {:.6}\ntopical {:.6}\nsocial  {:.2} (distance {})\noverall {:.6}",
                    b.partial,
                    b.exact,
                    b.topical,
                    b.social,
                    b.distance.map_or("none".to_string(), |d| d.to_string()),
                    b.overall
                )
            });
        }
    }
    Ok(())
}

fn print_report(out: &Out, index: &DistanceIndex) {
    let r = index.compression_report();
    out.emit(&json!(r), || {
        format!(
            "{} landmarks over {} entities: {} of {} landmark pairs stored ({:.1}% saved)",
            r.landmarks,
            r.entities,
            r.stored_pairs,
            r.total_pairs,
            r.saving_ratio * 100.0
        )
    });
}

fn print_results(out: &Out, value: &Value) {
    out.emit(value, || {
        value["results"]
            .as_array()
            .into_iter()
            .flatten()
            .enumerate()
            .map(|(i, r)| {
                format!(
                    "{:>3}. {:<10} {:<8} {:<32} S={:.4} T={:.4} U={:.2}",
                    i + 1,
                    r["id"].as_str().unwrap_or(""),
                    r["kind"].as_str().unwrap_or(""),
                    r["name"].as_str().unwrap_or(""),
                    r["overall"].as_f64().unwrap_or(0.0),
                    r["topical"].as_f64().unwrap_or(0.0),
                    r["social"].as_f64().unwrap_or(0.0)
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    });
}

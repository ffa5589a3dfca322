//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashSet;
use std::io::Cursor;
use std::panic::{self, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use sir_bench::{run_bench, BenchPlan, BenchReport, Endpoint, Workload, DEFAULT_LEVELS};
use sir_core::datagen::{generate_dataset, synthetic_query_log, REFERENCE_ENTITIES, REFERENCE_RELATIONSHIPS};
use sir_core::distance::default_landmark_count;
use sir_core::leaderboard::visible_ranks;
use sir_core::suggest::{Payload, SuggestionSource, DEFAULT_TRENDING_WINDOW};
use sir_core::{
    ActionKind, BoardKind, DistanceIndex, Engine, Entity, EntityId, EntityKind, Graph, GraphSnapshot,
    Points, QueryLog, QueryLogEntry, ScoreFilter, ScoredResult, SimilarityWeights, TimeWindow,
    ViewDesign,
};
use sir_service::{AppState, RunningServer, ServiceConfig};
use sir_testkit::{
    adjacency, bfs, ledger_graph, ledger_scores, random_corpus, random_graph, random_ledger,
    random_queries, rng, BruteForceScorer, OracleRow, DAY,
};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn users(snap: &GraphSnapshot) -> Vec<EntityId> {
    snap.entities()
        .iter()
        .filter(|e| e.kind == EntityKind::User)
        .map(|e| e.id.clone())
        .collect()
}

fn ids(results: &[ScoredResult]) -> Vec<&str> {
    results.iter().map(|r| r.id.as_str()).collect()
}

fn oracle_ids(rows: &[OracleRow]) -> Vec<&str> {
    rows.iter().map(|r| r.id.as_str()).collect()
}

fn oracle_ranking() -> Check {
    let started = Instant::now();
    let mut lists = 0;
    for seed in 0..50u64 {
        let n = 100 + (seed as usize * 173) % 901;
        let snap = random_corpus(1000 + seed, n, 3 * n).snapshot();
        let k = default_landmark_count(n);
        let engine = Engine::build(Arc::clone(&snap), Some(k)).map_err(|e| e.to_string())?;
        let oracle = BruteForceScorer::new(&snap, k);
        let us = users(&snap);
        for (i, q) in random_queries(seed, 8).iter().enumerate() {
            let u = &us[(i * 7) % us.len()];
            let got = engine.search(u, q, usize::MAX, None).map_err(|e| e.to_string())?;
            let want = oracle.search(u, q);
            ensure(ids(&got) == oracle_ids(&want), || format!("search order differs: corpus {seed}, user {u}, query {q:?}"))?;
            let got = engine.autocomplete(u, q, usize::MAX).map_err(|e| e.to_string())?;
            let want = oracle.autocomplete(u, q);
            ensure(ids(&got) == oracle_ids(&want), || format!("qac order differs: corpus {seed}, user {u}, query {q:?}"))?;
            lists += 2;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 120.0, || format!("took {secs:.1}s, limit 120s"))?;
    Ok(format!("50 corpora, {lists} ranked lists identical, {secs:.1}s"))
}

fn landmark_bound() -> Check {
    let mut pairs = 0u64;
    for seed in 0..100u64 {
        let n = 20 + (seed as usize * 53) % 181;
        let p = [0.01, 0.02, 0.04, 0.08][seed as usize % 4];
        let snap = random_graph(seed, n, p).snapshot();
        let adj = adjacency(&snap);
        let sparse = DistanceIndex::build_default(&snap).map_err(|e| e.to_string())?;
        let full = DistanceIndex::build(&snap, n).map_err(|e| e.to_string())?;
        for u in snap.entities() {
            let exact = bfs(&adj, &u.id);
            for e in snap.entities() {
                let truth = exact.get(&e.id).copied();
                let approx = sparse.approx_distance(&snap, &u.id, &e.id).map_err(|e| e.to_string())?;
                if let (Some(h), Some(t)) = (approx.hops(), truth) {
                    ensure(u32::from(h) >= t, || format!("graph {seed}: {} -> {} approx {h} < exact {t}", u.id, e.id))?;
                }
                ensure(approx.hops().is_some() <= truth.is_some(), || format!("graph {seed}: path invented"))?;
                let all = full.approx_distance(&snap, &u.id, &e.id).map_err(|e| e.to_string())?;
                let want = truth.filter(|&t| t <= 3);
                ensure(all.hops().map(u32::from) == want, || {
                    format!("graph {seed}: all-landmark {} -> {} gave {:?}, exact {:?}", u.id, e.id, all, truth)
                })?;
                pairs += 1;
            }
        }
    }
    Ok(format!("100 graphs, {pairs} ordered pairs"))
}

fn score_numerics() -> Check {
    let allowed = [1.0, 0.75, 0.5, 0.25, 0.0];
    let mut emitted = 0;
    for seed in 0..10u64 {
        let snap = random_corpus(2000 + seed, 600, 1800).snapshot();
        let base = Engine::build(Arc::clone(&snap), None).map_err(|e| e.to_string())?;
        for (alpha, beta) in [(1.0, 1.0), (2.0, 1.0), (1.0, 3.0)] {
            let engine = base.clone().with_weights(SimilarityWeights::new(alpha, beta).map_err(|e| e.to_string())?);
            for (i, q) in random_queries(seed, 6).iter().enumerate() {
                let u = &users(&snap)[i];
                let mut results = engine.search(u, q, usize::MAX, None).map_err(|e| e.to_string())?;
                results.extend(engine.autocomplete(u, q, usize::MAX).map_err(|e| e.to_string())?);
                for r in &results {
                    ensure(allowed.contains(&r.social), || format!("S_U = {}", r.social))?;
                    let rebuilt = (alpha * r.topical + beta * r.social) / (alpha + beta);
                    ensure((r.overall - rebuilt).abs() <= 1e-12, || format!("{}: S {} vs {rebuilt}", r.id, r.overall))?;
                    emitted += 1;
                }
            }
        }
    }
    Ok(format!("{emitted} emitted results checked"))
}

fn points_table() -> Check {
    let table = [
        (ActionKind::SourceAdd, 9.1),
        (ActionKind::SourceShare, 7.8),
        (ActionKind::SourceRate, 6.3),
        (ActionKind::SourceComment, 6.4),
        (ActionKind::SourceUpvoteComment, 5.1),
        (ActionKind::PostAdd, 7.0),
        (ActionKind::PostShare, 5.8),
        (ActionKind::PostLike, 5.7),
        (ActionKind::PostComment, 6.2),
        (ActionKind::PostUpvoteComment, 5.7),
        (ActionKind::Include, 4.7),
    ];
    for (action, pts) in table {
        ensure(action.points() == Points::from_f64(pts), || format!("{action:?} = {}", action.points()))?;
    }
    let g = ledger_graph(50, 5, 40).snapshot();
    let ledger = random_ledger(77, &g, 10_000, 1_700_000_000);
    let mut deletes = 0;
    for r in ledger.records() {
        if let Some(orig) = r.reverts {
            let original = ledger.get(orig).ok_or("dangling delete")?;
            ensure(r.points == -original.points, || format!("delete #{} does not negate #{orig}", r.id))?;
            deletes += 1;
        }
    }
    let mut filters = 0;
    let contexts: Vec<Option<EntityId>> =
        std::iter::once(None).chain((0..5).map(|i| Some(EntityId::from(format!("c{i}"))))).collect();
    for now in [1_700_000_000 - 100 * DAY, 1_700_000_000, 1_700_000_000 + 300 * DAY] {
        for context in &contexts {
            for window in [TimeWindow::Week, TimeWindow::Month, TimeWindow::Semester, TimeWindow::AllTime] {
                for kind in [BoardKind::TopContributor, BoardKind::TopResponder] {
                    let filter = ScoreFilter::new(context.clone(), window, kind, now);
                    let mut want = ledger_scores(
                        ledger.records(),
                        context.as_ref(),
                        window.ending_at(now).after,
                        now,
                        kind == BoardKind::TopResponder,
                        10,
                    );
                    want.retain(|_, v| *v > 0);
                    let got: std::collections::BTreeMap<EntityId, i64> =
                        ledger.compute_scores(&filter).into_iter().map(|(u, p)| (u, p.tenths())).collect();
                    ensure(got == want, || format!("scores differ for {filter:?}"))?;
                    filters += 1;
                }
            }
        }
    }
    Ok(format!(
        "11 values exact, {deletes} deletes negate, {} records x {filters} filters match",
        ledger.len()
    ))
}

fn leaderboard_views() -> Check {
    let now = 1_700_000_000;
    let mut views = 0;
    for seed in 0..20u64 {
        let n_users = 4 + (seed as usize * 11) % 37;
        let g = ledger_graph(n_users, 2, 6).snapshot();
        let ledger = random_ledger(500 + seed, &g, 30 + seed as usize * 25, now);
        let filter = ScoreFilter::new(None, TimeWindow::AllTime, BoardKind::TopContributor, now);
        let standings = ledger.standings(&filter);
        for a in 0..n_users {
            let active = EntityId::from(format!("u{a:02}"));
            let rank = standings.iter().position(|s| s.user == active).map_or(standings.len() + 1, |i| i + 1);
            let total = standings.len().max(rank);
            for design in [ViewDesign::HybridAbsolute, ViewDesign::Hybrid5050] {
                let view = ledger.build_view(&g, &filter, &active, design).map_err(|e| e.to_string())?;
                let want: Vec<usize> = (1..=total)
                    .filter(|&r| match design {
                        ViewDesign::HybridAbsolute => r <= 10 || r == rank,
                        ViewDesign::Hybrid5050 => r <= 5 || r.abs_diff(rank) <= 2,
                    })
                    .collect();
                let got: Vec<usize> = view.rows.iter().map(|r| r.rank).collect();
                ensure(got == want, || format!("fixture {seed}, {active}, {design}: rows {got:?}, want {want:?}"))?;
                ensure(got == visible_ranks(design, total, rank), || "visible_ranks disagrees".into())?;
                let flagged: Vec<&EntityId> = view.rows.iter().filter(|r| r.active).map(|r| &r.user).collect();
                ensure(flagged == [&active], || format!("fixture {seed}: active flags {flagged:?}"))?;
                for row in &view.rows {
                    if row.rank <= standings.len() {
                        ensure(row.user == standings[row.rank - 1].user, || "row/user mismatch".into())?;
                    }
                }
                views += 1;
            }
        }
    }
    Ok(format!("20 fixtures, {views} views"))
}

fn qs_contract() -> Check {
    let mut g = Graph::new();
    for i in 0..6 {
        g.add_entity(Entity::new(format!("u{i}").as_str(), EntityKind::User, format!("User {i}")))
            .map_err(|e| e.to_string())?;
    }
    g.add_entity(Entity::new("c1", EntityKind::Concept, "PCA")).map_err(|e| e.to_string())?;
    let snap = g.snapshot();
    let now = 1_700_000_000;

    // 10 recent searches beat 100 older ones
    let mut log = QueryLog::in_memory();
    for i in 0..100 {
        log.log_query(&snap, QueryLogEntry::new("u1", "old favourite", now - 30 * DAY + i * 600))
            .map_err(|e| e.to_string())?;
    }
    for i in 0..10 {
        log.log_query(&snap, QueryLogEntry::new("u2", "new thing", now - DAY + i * 60))
            .map_err(|e| e.to_string())?;
    }
    let got = log.suggest(&snap, &"u3".into(), now).map_err(|e| e.to_string())?;
    ensure(
        got.len() == 1 && got[0].payload == Payload::PastQuery { text: "new thing".into() },
        || format!("window fixture gave {got:?}"),
    )?;

    let mut r = rng(9);
    let mut log = QueryLog::in_memory().with_window(DEFAULT_TRENDING_WINDOW);
    let words = ["pca", "svd", "bayes", "lda", "knn", "ica", "gmm", "hmm", "crf", "rnn", "cnn", "gan"];
    let mut ts = now - 20 * DAY;
    for _ in 0..2000 {
        use rand::Rng;
        ts += r.gen_range(0..900);
        let mut e = QueryLogEntry::new(format!("u{}", r.gen_range(0..6)).as_str(), words[r.gen_range(0..words.len())], ts);
        if r.gen_ratio(1, 5) {
            e = e.clicked("c1");
        }
        log.log_query(&snap, e).map_err(|e| e.to_string())?;
    }
    let mut lists = 0;
    for u in 0..6 {
        for at in [now - 10 * DAY, ts, ts + 3 * DAY] {
            let s = log.suggest(&snap, &EntityId::from(format!("u{u}")), at).map_err(|e| e.to_string())?;
            let h = s.iter().take_while(|x| x.source == SuggestionSource::History).count();
            let t = s.len() - h;
            ensure(h <= 5 && t <= 5, || format!("{h} history + {t} trending"))?;
            ensure(s[h..].iter().all(|x| x.source == SuggestionSource::Trending), || "sources interleaved".into())?;
            let mut keys = HashSet::new();
            ensure(s.iter().all(|x| keys.insert(format!("{:?}", x.payload))), || "duplicate payload".into())?;
            lists += 1;
        }
    }
    Ok(format!("window fixture passes, {lists} suggestion lists within 5 + 5"))
}

struct ServiceRun {
    reports: Vec<BenchReport>,
    server_avgs: Vec<f64>,
    bench_secs: f64,
    saving_ratio: f64,
    landmarks: usize,
}

fn service_bench() -> Result<ServiceRun, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let text = generate_dataset(42, REFERENCE_ENTITIES, REFERENCE_RELATIONSHIPS).map_err(|e| e.to_string())?;
    std::fs::write(dir.path().join("graph.jsonl"), &text).map_err(|e| e.to_string())?;
    let mut graph = Graph::new();
    graph.ingest_reader(Cursor::new(text.as_bytes())).map_err(|e| e.to_string())?;
    let snap = graph.snapshot();
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_err(|e| e.to_string())?
        .as_secs() as i64;
    let entries = synthetic_query_log(&snap, 42, 20_000, now - 60, 30 * DAY).map_err(|e| e.to_string())?;
    let log: String = entries.iter().map(|e| serde_json::to_string(e).unwrap() + "\n").collect();
    std::fs::write(dir.path().join("queries.jsonl"), log).map_err(|e| e.to_string())?;

    let index = DistanceIndex::build_default(&snap).map_err(|e| e.to_string())?;
    let report = index.compression_report();
    std::fs::write(dir.path().join("distance_index.json"), serde_json::to_string(&index).unwrap())
        .map_err(|e| e.to_string())?;

    let workload = Workload::from_snapshot(&snap, 7, 500).map_err(|e| e.to_string())?;
    let config = ServiceConfig {
        port: 0,
        data_dir: dir.path().to_path_buf(),
        ..ServiceConfig::default()
    };
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| e.to_string())?;
    runtime.block_on(async {
        let state = AppState::load(config).map_err(|e| e.to_string())?;
        let server = RunningServer::start(Arc::new(state)).await.map_err(|e| e.to_string())?;
        let started = Instant::now();
        let mut reports = Vec::new();
        let mut server_avgs = Vec::new();
        for endpoint in [Endpoint::Qs, Endpoint::Qac, Endpoint::Search] {
            // single client first so its figure is also read off the server log
            let single = BenchPlan { endpoint, total: 1000, levels: vec![1] };
            run_bench(&server.url(), &single, &workload).await.map_err(|e| e.to_string())?;
            let summary = server.state.requests().latency_summary(endpoint.path(), None).map_err(|e| e.to_string())?;
            server_avgs.push(summary.avg);
            let plan = BenchPlan::new(endpoint);
            let report = run_bench(&server.url(), &plan, &workload).await.map_err(|e| e.to_string())?;
            report.check().map_err(|e| e.to_string())?;
            reports.push(report);
        }
        let bench_secs = started.elapsed().as_secs_f64();
        server.shutdown().await.map_err(|e| e.to_string())?;
        Ok(ServiceRun {
            reports,
            server_avgs,
            bench_secs,
            saving_ratio: report.saving_ratio,
            landmarks: report.landmarks,
        })
    })
}

fn latency_targets(run: &ServiceRun) -> Check {
    let targets = [0.1, 1.0, 1.5];
    let reference = [0.06, 0.11, 0.10];
    let mut parts = Vec::new();
    for (i, report) in run.reports.iter().enumerate() {
        let level = report.level(1).ok_or("no n=1 level")?;
        ensure(level.avg < targets[i], || {
            format!("{} avg {:.4}s at n=1, target < {}s", report.endpoint, level.avg, targets[i])
        })?;
        parts.push(format!(
            "{} {:.4}s (server {:.4}s, target <{}s, reference {}s)",
            report.endpoint, level.avg, run.server_avgs[i], targets[i], reference[i]
        ));
    }
    ensure(run.bench_secs < 600.0, || format!("bench took {:.0}s", run.bench_secs))?;
    Ok(format!("{}; bench {:.0}s", parts.join(", "), run.bench_secs))
}

fn stress_trend(run: &ServiceRun) -> Check {
    let mut parts = Vec::new();
    for report in &run.reports {
        let ns: Vec<usize> = report.levels.iter().map(|l| l.n).collect();
        ensure(ns == DEFAULT_LEVELS, || format!("{} levels {ns:?}", report.endpoint))?;
        let (one, top) = (report.level(1).unwrap(), report.level(64).unwrap());
        ensure(top.avg > one.avg, || {
            format!("{}: avg(64) {:.4}s <= avg(1) {:.4}s", report.endpoint, top.avg, one.avg)
        })?;
        parts.push(format!("{} {:.4}s -> {:.4}s", report.endpoint, one.avg, top.avg));
    }
    for report in &run.reports {
        for line in report.to_csv().lines().skip(1) {
            println!("      {line}");
        }
    }
    Ok(parts.join(", "))
}

fn compression(run: &ServiceRun) -> Check {
    let verdict = if run.saving_ratio > 0.8 { "above" } else { "below" };
    Ok(format!(
        "saving ratio {:.1}% with {} landmarks, {verdict} the 80% reference (reported, not asserted)",
        run.saving_ratio * 100.0,
        run.landmarks
    ))
}

fn run_check(name: &str, failed: &mut usize, f: impl FnOnce() -> Check) {
    let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match outcome {
        Ok(detail) => println!("PASS {name}: {detail}"),
        Err(reason) => {
            *failed += 1;
            println!("FAIL {name}: {reason}");
        }
    }
}

fn main() {
    let mut failed = 0;
    run_check("oracle ranking equivalence", &mut failed, oracle_ranking);
    run_check("landmark bound", &mut failed, landmark_bound);
    run_check("similarity numerics", &mut failed, score_numerics);
    run_check("action points and ledger scoring", &mut failed, points_table);
    run_check("leaderboard views", &mut failed, leaderboard_views);
    run_check("query suggestion contract", &mut failed, qs_contract);
    match panic::catch_unwind(service_bench) {
        Ok(Ok(run)) => {
            run_check("latency targets at n=1", &mut failed, || latency_targets(&run));
            run_check("stress trend", &mut failed, || stress_trend(&run));
            run_check("compression report", &mut failed, || compression(&run));
        }
        other => {
            let reason = match other {
                Ok(Err(e)) => e,
                _ => "bench panicked".to_string(),
            };
            for name in ["latency targets at n=1", "stress trend", "compression report"] {
                failed += 1;
                println!("FAIL {name}: {reason}");
            }
        }
    }
    println!("{} criteria failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sir(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sir"))
        .arg("--data-dir")
        .arg(dir)
        .args(args)
        .env_remove("SIR_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn json_out(dir: &Path, args: &[&str]) -> Value {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let out = sir(dir, &full);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn seeded() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("gen.jsonl");
    let g = graph.to_str().unwrap();
    json_out(dir.path(), &["bench", "gen", "--seed", "3", "--entities", "400", "--relationships", "1200", "--out", g]);
    let added = json_out(dir.path(), &["ingest", g]);
    assert_eq!(added["entities"], 400);
    assert_eq!(added["relationships"], 1200);
    dir
}

#[test]
fn index_search_and_explain() {
    let dir = seeded();
    let report = json_out(dir.path(), &["index", "build", "--landmarks", "20"]);
    assert_eq!(report["landmarks"], 20);
    assert_eq!(json_out(dir.path(), &["index", "report"]), report);

    let found = json_out(dir.path(), &["search", "--user", "u00000", "--q", "PCA", "--limit", "5"]);
    let results = found["results"].as_array().unwrap();
    assert!(!results.is_empty() && results.len() <= 5);
    let top = results[0]["id"].as_str().unwrap();
    let explained = json_out(dir.path(), &["debug", "sim", "--q", "PCA", "--entity", top, "--user", "u00000"]);
    assert_eq!(explained["overall"], results[0]["overall"]);

    let qac = json_out(dir.path(), &["qac", "--user", "u00000", "--q", "vit"]);
    assert_eq!(qac["results"][0]["id"], "u00000");

    // the search above went into the query log
    let qs = json_out(dir.path(), &["qs", "--user", "u00000"]);
    assert_eq!(qs["suggestions"][0]["payload"]["text"], "PCA");
}

#[test]
fn activity_and_leaderboard() {
    let dir = seeded();
    let comment = json_out(
        dir.path(),
        &["activity", "record", "--actor", "u00001", "--action", "post-comment", "--location", "c00000", "--object", "p00000", "--ts", "100"],
    );
    assert_eq!(comment["points"], 6.2);
    let id = comment["id"].to_string();
    json_out(
        dir.path(),
        &["activity", "record", "--actor", "u00002", "--action", "post_upvote_comment", "--location", "c00000", "--object", "p00000", "--ts", "110", "--target", &id],
    );
    let board = json_out(
        dir.path(),
        &["leaderboard", "show", "--user", "u00003", "--kind", "responder", "--context", "c00000", "--now", "200"],
    );
    assert_eq!(board["design"], "hybrid_absolute");
    assert_eq!(board["rows"][0]["user"], "u00001");
    assert_eq!(board["rows"][0]["score"], 7.2);
    assert_eq!(board["rows"][1]["user"], "u00003");
    assert_eq!(board["rows"][1]["active"], true);

    let out = sir(dir.path(), &["activity", "delete", "--actor", "u00002", "--id", &id]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "leaderboard");
}

#[test]
fn exit_codes() {
    let dir = seeded();
    assert_eq!(sir(dir.path(), &["search", "--user", "u00000"]).status.code(), Some(2));
    assert_eq!(sir(dir.path(), &["frobnicate"]).status.code(), Some(2));
    let out = sir(dir.path(), &["search", "--user", "nobody", "--q", "pca"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "engine");
    let out = sir(dir.path(), &["ingest", "/no/such/file.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
}

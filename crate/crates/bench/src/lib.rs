//! Closed-loop load generator: `n` clients, each with its own user, send
//! requests back to back and time every round trip.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sir_core::datagen::sample_queries;
use sir_core::{EntityKind, GraphSnapshot, LatencySummary};
use thiserror::Error;

pub const DEFAULT_TOTAL: usize = 1000;
pub const DEFAULT_LEVELS: [usize; 7] = [1, 2, 4, 8, 16, 32, 64];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("service at {url} is unreachable: {message}")]
    ServiceUnreachable { url: String, message: String },
    #[error("{failures} of {attempted} requests failed")]
    PartialFailure { failures: usize, attempted: usize },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("unknown endpoint `{0}`")]
    UnknownEndpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Qs,
    Qac,
    Search,
}

impl Endpoint {
    pub fn path(self) -> &'static str {
        match self {
            Endpoint::Qs => "/qs",
            Endpoint::Qac => "/qac",
            Endpoint::Search => "/search",
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.path()[1..])
    }
}

impl FromStr for Endpoint {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim_start_matches('/').to_ascii_lowercase().as_str() {
            "qs" => Ok(Endpoint::Qs),
            "qac" => Ok(Endpoint::Qac),
            "search" => Ok(Endpoint::Search),
            _ => Err(BenchError::UnknownEndpoint(s.to_string())),
        }
    }
}

/// Each level runs `n` clients with `total / n` requests apiece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchPlan {
    pub endpoint: Endpoint,
    pub total: usize,
    pub levels: Vec<usize>,
}

impl BenchPlan {
    pub fn new(endpoint: Endpoint) -> Self {
        Self {
            endpoint,
            total: DEFAULT_TOTAL,
            levels: DEFAULT_LEVELS.to_vec(),
        }
    }

    pub fn per_client(&self, n: usize) -> usize {
        self.total / n
    }

    fn validate(&self) -> Result<(), BenchError> {
        if self.levels.is_empty() {
            return Err(BenchError::InvalidPlan("no concurrency levels".into()));
        }
        if let Some(&n) = self.levels.iter().find(|&&n| n == 0 || n > self.total) {
            return Err(BenchError::InvalidPlan(format!(
                "level {n} needs 1 <= n <= total ({})",
                self.total
            )));
        }
        Ok(())
    }
}

/// Users and query strings the clients draw from.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub users: Vec<String>,
    pub queries: Vec<String>,
}

impl Workload {
    pub fn from_snapshot(snapshot: &GraphSnapshot, seed: u64, queries: usize) -> Result<Self, BenchError> {
        let users: Vec<String> = snapshot
            .entities()
            .iter()
            .filter(|e| e.kind == EntityKind::User)
            .map(|e| e.id.as_str().to_string())
            .collect();
        if users.is_empty() {
            return Err(BenchError::InvalidPlan("dataset has no users".into()));
        }
        let queries =
            sample_queries(snapshot, seed, queries).map_err(|e| BenchError::InvalidPlan(e.to_string()))?;
        Ok(Self { users, queries })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub n: usize,
    pub count: usize,
    pub failures: usize,
    pub avg: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
    /// Wall time for the whole level.
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub endpoint: Endpoint,
    /// The service's `/health` body at the start of the run.
    pub dataset: serde_json::Value,
    pub levels: Vec<LevelReport>,
}

impl BenchReport {
    pub fn failures(&self) -> usize {
        self.levels.iter().map(|l| l.failures).sum()
    }

    /// `Err(PartialFailure)` if any request failed.
    pub fn check(&self) -> Result<(), BenchError> {
        match self.failures() {
            0 => Ok(()),
            failures => Err(BenchError::PartialFailure {
                failures,
                attempted: self.levels.iter().map(|l| l.count + l.failures).sum(),
            }),
        }
    }

    pub fn level(&self, n: usize) -> Option<&LevelReport> {
        self.levels.iter().find(|l| l.n == n)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("endpoint,n,count,avg_s,p50_s,p95_s,max_s\n");
        for l in &self.levels {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
                self.endpoint, l.n, l.count, l.avg, l.p50, l.p95, l.max
            ));
        }
        out
    }
}

fn request(client: &reqwest::Client, base: &str, endpoint: Endpoint, user: &str, query: &str) -> reqwest::RequestBuilder {
    let url = format!("{base}{}", endpoint.path());
    match endpoint {
        Endpoint::Qs => client.get(url).query(&[("user", user)]),
        Endpoint::Qac => client.get(url).query(&[("user", user), ("q", query)]),
        // keep the suggestion log unchanged between runs
        Endpoint::Search => client.get(url).query(&[("user", user), ("q", query), ("log", "false")]),
    }
}

/// Runs every level of `plan` in order against `base_url`.
pub async fn run_bench(base_url: &str, plan: &BenchPlan, workload: &Workload) -> Result<BenchReport, BenchError> {
    plan.validate()?;
    if workload.users.is_empty() || workload.queries.is_empty() {
        return Err(BenchError::InvalidPlan("empty workload".into()));
    }
    let base = base_url.trim_end_matches('/').to_string();
    let client = reqwest::Client::builder()
        .timeout(Duration::from_secs(60))
        .pool_max_idle_per_host(256)
        .build()
        .map_err(|e| BenchError::InvalidPlan(e.to_string()))?;
    let unreachable = |e: reqwest::Error| BenchError::ServiceUnreachable {
        url: base.clone(),
        message: e.to_string(),
    };
    let dataset: serde_json::Value = client
        .get(format!("{base}/health"))
        .send()
        .await
        .map_err(unreachable)?
        .json()
        .await
        .map_err(unreachable)?;

    let workload = Arc::new(workload.clone());
    let mut levels = Vec::with_capacity(plan.levels.len());
    for &n in &plan.levels {
        let per_client = plan.per_client(n);
        let started = Instant::now();
        let mut tasks = Vec::with_capacity(n);
        for c in 0..n {
            let (client, base, workload) = (client.clone(), base.clone(), Arc::clone(&workload));
            let endpoint = plan.endpoint;
            tasks.push(tokio::spawn(async move {
                let user = &workload.users[c % workload.users.len()];
                let mut samples = Vec::with_capacity(per_client);
                let mut failures = 0;
                for i in 0..per_client {
                    let query = &workload.queries[(c * per_client + i) % workload.queries.len()];
                    let t = Instant::now();
                    let ok = match request(&client, &base, endpoint, user, query).send().await {
                        Ok(resp) => resp.status().is_success() && resp.bytes().await.is_ok(),
                        Err(_) => false,
                    };
                    if ok {
                        samples.push(t.elapsed().as_secs_f64());
                    } else {
                        failures += 1;
                    }
                }
                (samples, failures)
            }));
        }
        let mut samples = Vec::with_capacity(per_client * n);
        let mut failures = 0;
        for task in tasks {
            match task.await {
                Ok((s, f)) => {
                    samples.extend(s);
                    failures += f;
                }
                Err(_) => failures += per_client,
            }
        }
        let elapsed = started.elapsed().as_secs_f64();
        let summary = LatencySummary::from_samples(&samples).unwrap_or(LatencySummary {
            count: 0,
            avg: f64::NAN,
            p50: f64::NAN,
            p95: f64::NAN,
            max: f64::NAN,
        });
        levels.push(LevelReport {
            n,
            count: summary.count,
            failures,
            avg: summary.avg,
            p50: summary.p50,
            p95: summary.p95,
            max: summary.max,
            elapsed,
        });
    }
    Ok(BenchReport {
        endpoint: plan.endpoint,
        dataset,
        levels,
    })
}
